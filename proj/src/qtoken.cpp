#include "qbc/qtoken.hpp"

#include <cmath>
#include <numbers>

#include "qbc/crypto.hpp"
#include "qbc/dump.hpp"
#include "qbc/error.hpp"

namespace qbc::qtoken {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

std::string make_serial(const StateVector& disclosed, Index block_index, NodeId owner, std::uint32_t generation) {
  const auto digest = crypto::sha256(encoding::decode_bytes(disclosed));
  Bytes raw_serial(digest.begin(), digest.end());
  put_u32(raw_serial, static_cast<std::uint32_t>(block_index));
  put_u32(raw_serial, raw(owner));
  put_u32(raw_serial, generation);
  return to_hex(raw_serial);
}

StateVector serial_phase_mask(const std::string& serial, Index dim) {
  StateVector mask(dim);
  Bytes seed(serial.begin(), serial.end());
  seed.resize(seed.size() + 4);
  crypto::Digest d{};
  for (Index k = 0; k < dim; ++k) {
    if (k % 16 == 0) {
      const auto block = static_cast<std::uint32_t>(k / 16);
      for (int b = 0; b < 4; ++b) seed[seed.size() - 4 + static_cast<std::size_t>(b)] = static_cast<std::uint8_t>(block >> (8 * (3 - b)));
      d = crypto::sha256(seed);
    }
    const std::size_t at = static_cast<std::size_t>(2 * (k % 16));
    const double frac = static_cast<double>((d[at] << 8) | d[at + 1]) / 65536.0;
    mask(k) = std::polar(1.0, 2.0 * std::numbers::pi * frac);
  }
  return mask;
}

const TokenMachine::Entry* TokenMachine::find(const std::string& serial) const {
  auto it = registry_.find(serial);
  return it == registry_.end() ? nullptr : &it->second;
}

void TokenMachine::set_passphrase(NodeId owner, std::string passphrase) { passphrases_[owner] = std::move(passphrase); }

std::size_t TokenMachine::live_in_lineage(const std::string& lineage) const {
  std::size_t count = 0;
  for (const auto& [serial, e] : registry_)
    if (e.live && e.lineage == lineage) ++count;
  return count;
}

Token TokenMachine::issue(const StateVector& base, const std::string& serial, Entry entry) {
  if (registry_.contains(serial)) throw Error(Errc::AlreadyMinted, "serial " + serial + " already issued");
  entry.base = base;
  entry.expected = serial_phase_mask(serial, base.size()).cwiseProduct(base);
  entry.live = true;
  if (entry.lineage.empty()) entry.lineage = serial;
  Token token{serial, entry.expected, entry.value, entry.block_index, entry.owner, entry.generation};
  registry_[serial] = std::move(entry);
  return token;
}

Amount value_for_owner(const ledger::Chain& chain, Index block_index, NodeId owner) {
  Amount total = 0;
  for (const auto& tx : ledger::read_block(chain, block_index))
    for (NodeId r : tx.receivers)
      if (r == owner) total += tx.amount;
  return total;
}

Token mint_token(TokenMachine& machine, const ledger::Chain& chain, Index block_index, NodeId owner) {
  if (block_index < 1 || block_index > chain.length())
    throw Error(Errc::UnconfirmedBlock, "block " + std::to_string(block_index) + " is not confirmed");
  if (machine.minted_.contains({block_index, owner}))
    throw Error(Errc::AlreadyMinted, "block " + std::to_string(block_index) + " already minted for node " +
                                         std::to_string(raw(owner)));
  const Amount value = value_for_owner(chain, block_index, owner);
  if (value == 0)
    throw Error(Errc::NoValueForOwner, "block " + std::to_string(block_index) + " pays nothing to node " +
                                           std::to_string(raw(owner)));

  const auto& params = chain.params();
  const StateVector& stored = chain.blocks()[static_cast<std::size_t>(block_index - 1)];
  const StateVector base = stored.tail(params.m_max);
  const std::string serial = make_serial(stored.head(params.n), block_index, owner, 0);
  machine.minted_.insert({block_index, owner});
  TokenMachine::Entry entry;
  entry.value = value;
  entry.block_index = block_index;
  entry.owner = owner;
  return machine.issue(base, serial, std::move(entry));
}

bool verify_token(const TokenMachine& machine, const Token& token) {
  const TokenMachine::Entry* e = machine.find(token.serial);
  if (!e || !e->live) return false;
  if (token.value != e->value || token.qstate.size() != e->expected.size()) return false;
  if (!token.qstate.allFinite()) return false;
  if (ledger::fidelity(token.qstate, e->expected) < kFidelityFloor) return false;
  return (token.qstate - e->expected).norm() <= kStateTol * e->expected.norm();
}

Token transfer_token(TokenMachine& machine, const Token& token, NodeId new_owner,
                     const std::optional<std::string>& passphrase) {
  if (!verify_token(machine, token)) throw Error(Errc::InvalidToken, "token " + token.serial + " does not verify");
  auto& old = machine.registry_.at(token.serial);
  if (auto it = machine.passphrases_.find(old.owner); it != machine.passphrases_.end())
    if (!passphrase || *passphrase != it->second)
      throw Error(Errc::Unauthorized, "passphrase required to transfer token " + token.serial);

  old.live = false;
  TokenMachine::Entry next;
  next.value = old.value;
  next.block_index = old.block_index;
  next.owner = new_owner;
  next.generation = ++machine.transfers_per_block_[old.block_index];
  next.lineage = old.lineage;
  // The serial keeps the source block's disclosed digest; only the trailing fields change.
  std::string serial = token.serial.substr(0, 64 + 8);
  Bytes tail;
  put_u32(tail, raw(new_owner));
  put_u32(tail, next.generation);
  serial += to_hex(tail);
  const StateVector base = old.base;
  return machine.issue(base, serial, std::move(next));
}

bool correspondence_holds(const TokenMachine& machine) {
  const auto& reg = machine.registry();
  for (auto a = reg.begin(); a != reg.end(); ++a) {
    for (auto b = std::next(a); b != reg.end(); ++b) {
      const auto& qa = a->second.expected;
      const auto& qb = b->second.expected;
      const bool same_state =
          qa.size() == qb.size() && (qa - qb).norm() <= kStateTol * std::max(qa.norm(), qb.norm());
      // Serials are map keys and therefore distinct, so states must differ.
      if (same_state) return false;
    }
  }
  return true;
}

std::string token_to_json(const Token& token) {
  return "{\"serial\":\"" + token.serial + "\",\"value\":" + std::to_string(token.value) +
         ",\"qstate\":" + dump::complex_array(token.qstate) + "}";
}

Token token_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Token t;
    t.serial = j.at("serial").get<std::string>();
    t.value = j.at("value").get<Amount>();
    t.qstate = dump::parse_complex_array(j.at("qstate"));
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidToken, std::string("malformed token: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::InvalidToken, std::string("malformed token: ") + e.what());
  }
}

}  // namespace qbc::qtoken
