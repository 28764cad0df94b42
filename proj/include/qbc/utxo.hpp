#pragma once

// Unspent-output view derived from a chain.
//
// A confirmed transaction creates one output of `amount` per receiver,
// keyed by (transaction id, receiver). A spending transaction redeems the
// sender's outputs in its source list. Payment and change are two
// transactions that list the same sources, so redemption is tracked per
// spend key (sender, sorted sources): the first confirmed transaction with a
// given key consumes the outputs into a pool, and siblings with the same key
// draw from that pool until it is exhausted.

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qbc/encoding.hpp"
#include "qbc/ledger.hpp"

namespace qbc {

struct Output {
  NodeId owner{};
  Amount value = 0;
  std::uint64_t seq = 0;  // confirmation order, used for oldest-first selection

  bool operator==(const Output&) const = default;
};

struct SpendKey {
  NodeId sender{};
  std::vector<TxId> sources;  // sorted

  auto operator<=>(const SpendKey&) const = default;
};

SpendKey spend_key(const Transaction& tx);

struct Pool {
  Amount capacity = 0;
  Amount spent = 0;

  Amount remaining() const { return capacity - spent; }
  bool operator==(const Pool&) const = default;
};

struct OutputRef {
  TxId tx;
  Output output;
};

class UtxoView {
 public:
  static UtxoView from_chain(const ledger::Chain& chain);

  /// Applies a transaction that has already passed verification.
  void apply(const Transaction& tx);

  bool is_confirmed(const TxId& id) const { return confirmed_.contains(id); }
  const Transaction* confirmed_tx(const TxId& id) const;
  std::optional<Amount> unspent_value(const TxId& tx, NodeId owner) const;
  const Pool* pool(const SpendKey& key) const;

  /// Unspent outputs owned by `owner`, oldest first.
  std::vector<OutputRef> unspent_of(NodeId owner) const;
  Amount balance(NodeId owner) const;
  /// Unspent outputs plus undrawn pool remainders.
  Amount supply() const;

  const std::map<TxId, std::map<NodeId, Output>>& unspent() const { return unspent_; }

  bool operator==(const UtxoView&) const = default;

 private:
  std::map<TxId, Transaction> confirmed_;
  std::map<TxId, std::map<NodeId, Output>> unspent_;
  std::map<SpendKey, Pool> pools_;
  std::uint64_t next_seq_ = 0;
};

enum class Redemption { Ok, AlreadyConfirmed, Conflict, Overdrawn };

/// Rule-4 check: would `tx` redeem only value that is still available, given
/// the confirmed view and a set of pending (logged or same-block)
/// transactions? Entries of `pending` with the same id as `tx` are ignored.
Redemption check_redemption(const Transaction& tx, const UtxoView& view, std::span<const Transaction> pending);

}  // namespace qbc
