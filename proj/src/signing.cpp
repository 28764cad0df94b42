#include "qbc/signing.hpp"

#include <algorithm>

#include "qbc/crypto.hpp"
#include "qbc/error.hpp"

namespace qbc {

Bytes keyed_tag(const Bytes& secret, const Bytes& payload) {
  const auto mac = crypto::hmac_sha256(secret, payload);
  return Bytes(mac.begin(), mac.begin() + kTagSize);
}

Bytes sign(const Transaction& tx, const Bytes& secret) { return keyed_tag(secret, signing_payload(tx)); }

Transaction signed_copy(Transaction tx, const Bytes& secret) {
  tx.signature = sign(tx, secret);
  return tx;
}

bool verify_signature(const Transaction& tx, const KeyRegistry& registry) {
  const Bytes* secret = registry.find(tx.sender);
  if (!secret) throw Error(Errc::UnknownSigner, "no key registered for node " + std::to_string(raw(tx.sender)));
  const Bytes expected = sign(tx, *secret);
  return tx.signature.size() == expected.size() && std::equal(expected.begin(), expected.end(), tx.signature.begin());
}

}  // namespace qbc
