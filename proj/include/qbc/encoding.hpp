#pragma once

// Canonical transaction serialization, the byte <-> amplitude codec, and
// lexicographic qubit labels for state vectors of dimension 2^n.
//
// Wire layout of a transaction (all integers big-endian):
//
//   u32 sender
//   u16 receiver count, then u32 per receiver
//   u64 amount
//   u16 source count, then 8-byte transaction id per source
//   u64 timestamp
//   u16 signature length, then the signature bytes
//
// The signing payload is the same layout with the signature field omitted.
// A preliminary block is a u16 transaction count followed by the
// concatenated transaction serializations.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qbc/types.hpp"

namespace qbc {

struct Transaction {
  NodeId sender{};
  std::vector<NodeId> receivers;
  Amount amount = 0;
  std::vector<TxId> sources;
  Bytes signature;
  Tick timestamp = 0;

  bool is_coinbase() const { return sender == kMintId; }
  /// Value created by this transaction: amount per receiver.
  Amount total_out() const { return amount * receivers.size(); }

  bool operator==(const Transaction&) const = default;
};

Bytes serialize(const Transaction& tx);
Bytes signing_payload(const Transaction& tx);
/// Parses one transaction starting at `offset`, advancing it.
Transaction deserialize(std::span<const std::uint8_t> bytes, std::size_t& offset);

/// First 8 bytes of SHA-256 over the full canonical serialization.
TxId tx_id(const Transaction& tx);

/// Field-level checks that need no ledger context: receivers non-empty and
/// distinct, sources distinct and present unless the transaction is a grant,
/// total output representable.
bool is_well_formed(const Transaction& tx);

/// Timestamp, then transaction id.
void canonical_sort(std::vector<Transaction>& txs);

namespace encoding {

/// Coordinate 0 carries a sentinel 1, coordinates 1..L carry (b + 1) / 257,
/// the rest are 0; the vector is then normalized.
StateVector encode_bytes(std::span<const std::uint8_t> bytes, Index n);
/// Inverse of encode_bytes up to any positive real scale.
Bytes decode_bytes(const StateVector& v);

StateVector encode_transaction(const Transaction& tx, Index n);
Transaction decode_transaction(const StateVector& v);

/// Canonically sorts `txs`, then encodes count + concatenated serializations.
StateVector encode_preliminary_block(std::vector<Transaction> txs, Index n);
std::vector<Transaction> decode_preliminary_block(const StateVector& v);

struct BasisLabel {
  std::string bits;  // b_1 .. b_n, most significant first
  int n = 0;

  std::uint64_t index() const;
  bool operator==(const BasisLabel&) const = default;
};

BasisLabel index_to_basis_label(std::uint64_t i, int n);
std::uint64_t label_to_index(const BasisLabel& label);

struct KetTerm {
  BasisLabel label;
  cd amplitude;
};

/// Nonzero (|a| > 1e-15) terms of x in index order. dim(x) must be 2^n.
std::vector<KetTerm> vector_to_ket_expansion(const StateVector& x);
StateVector ket_expansion_to_vector(const std::vector<KetTerm>& terms, int n);

}  // namespace encoding
}  // namespace qbc
