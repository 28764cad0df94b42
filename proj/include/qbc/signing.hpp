#pragma once

// Signature stub: a keyed HMAC-SHA256 tag (truncated to 16 bytes) over the
// canonical serialization without the signature field. The registry stands
// in for a public-key directory.

#include <map>

#include "qbc/encoding.hpp"
#include "qbc/types.hpp"

namespace qbc {

inline constexpr std::size_t kTagSize = 16;

class KeyRegistry {
 public:
  void register_key(NodeId id, Bytes secret) { keys_[id] = std::move(secret); }
  const Bytes* find(NodeId id) const {
    auto it = keys_.find(id);
    return it == keys_.end() ? nullptr : &it->second;
  }

 private:
  std::map<NodeId, Bytes> keys_;
};

Bytes keyed_tag(const Bytes& secret, const Bytes& payload);

Bytes sign(const Transaction& tx, const Bytes& secret);
/// Returns tx with its signature field set.
Transaction signed_copy(Transaction tx, const Bytes& secret);
/// Throws UnknownSigner when the sender has no registered key.
bool verify_signature(const Transaction& tx, const KeyRegistry& registry);

}  // namespace qbc
