#pragma once

// Tokens bound to confirmed blocks: a classical serial paired with a state
// vector, checked by a token machine that keeps the expected state of every
// serial it has issued.
//
// The state of a token is the block's encrypted lifted part with a diagonal
// phase mask derived from the serial applied to it. Several owners can hold
// tokens from the same block, and the mask keeps their states distinct, so
// distinct serials always come with distinct states.

#include <map>
#include <optional>
#include <set>
#include <string>

#include "qbc/ledger.hpp"

namespace qbc::qtoken {

inline constexpr double kFidelityFloor = 1.0 - 1e-9;
inline constexpr double kStateTol = 1e-9;  // relative distance to the registered state

struct Token {
  std::string serial;
  StateVector qstate;
  Amount value = 0;
  Index block_index = 0;
  NodeId owner{};
  std::uint32_t generation = 0;  // issue number within the source block; 0 for mints
};

/// Hex of SHA-256(disclosed payload) || index || owner || generation.
std::string make_serial(const StateVector& disclosed, Index block_index, NodeId owner, std::uint32_t generation);

/// Unit-modulus diagonal derived from the serial.
StateVector serial_phase_mask(const std::string& serial, Index dim);

class TokenMachine {
 public:
  struct Entry {
    StateVector expected;
    StateVector base;  // encrypted lifted part of the source block
    Amount value = 0;
    Index block_index = 0;
    NodeId owner{};
    std::uint32_t generation = 0;
    std::string lineage;  // serial of the first token in the transfer line
    bool live = true;
  };

  const std::map<std::string, Entry>& registry() const { return registry_; }
  const Entry* find(const std::string& serial) const;

  /// Owners with a passphrase must present it to transfer.
  void set_passphrase(NodeId owner, std::string passphrase);

  std::size_t live_in_lineage(const std::string& lineage) const;

  friend Token mint_token(TokenMachine& machine, const ledger::Chain& chain, Index block_index, NodeId owner);
  friend Token transfer_token(TokenMachine& machine, const Token& token, NodeId new_owner,
                              const std::optional<std::string>& passphrase);

 private:
  Token issue(const StateVector& base, const std::string& serial, Entry entry);

  std::map<std::string, Entry> registry_;
  std::set<std::pair<Index, NodeId>> minted_;
  std::map<Index, std::uint32_t> transfers_per_block_;
  std::map<NodeId, std::string> passphrases_;
};

/// Total paid to `owner` by the transactions of block `block_index`.
Amount value_for_owner(const ledger::Chain& chain, Index block_index, NodeId owner);

/// Throws UnconfirmedBlock, AlreadyMinted, NoValueForOwner.
Token mint_token(TokenMachine& machine, const ledger::Chain& chain, Index block_index, NodeId owner);

/// Registered, live, same value, fidelity >= 1 - 1e-9 and within 1e-9
/// (relative) of the registered state.
bool verify_token(const TokenMachine& machine, const Token& token);

/// Retires the token and issues a successor to `new_owner`. Its generation is
/// the next transfer number for the source block, so serials never repeat.
/// Throws InvalidToken, Unauthorized.
Token transfer_token(TokenMachine& machine, const Token& token, NodeId new_owner,
                     const std::optional<std::string>& passphrase = std::nullopt);

/// Exhaustive check over every registry entry, retired ones included:
/// serials differ exactly when states differ.
bool correspondence_holds(const TokenMachine& machine);

/// {serial, value, qstate: [[re, im], ...]}
std::string token_to_json(const Token& token);
Token token_from_json(const std::string& text);

}  // namespace qbc::qtoken
