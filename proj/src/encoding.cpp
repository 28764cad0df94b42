#include "qbc/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "qbc/crypto.hpp"
#include "qbc/error.hpp"

namespace qbc {
namespace {

void put_u16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint16_t checked_u16(std::size_t n, const char* field) {
  if (n > std::numeric_limits<std::uint16_t>::max())
    throw Error(Errc::PayloadTooLarge, std::string(field) + " list too long");
  return static_cast<std::uint16_t>(n);
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t& offset) : bytes_(bytes), offset_(offset) {}

  std::uint64_t uint(int width) {
    if (offset_ + static_cast<std::size_t>(width) > bytes_.size())
      throw Error(Errc::MalformedEncoding, "truncated transaction record");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | bytes_[offset_++];
    return v;
  }

  void copy(std::uint8_t* dst, std::size_t n) {
    if (offset_ + n > bytes_.size()) throw Error(Errc::MalformedEncoding, "truncated transaction record");
    std::copy_n(bytes_.begin() + static_cast<std::ptrdiff_t>(offset_), n, dst);
    offset_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t& offset_;
};

void serialize_body(const Transaction& tx, Bytes& out) {
  put_u32(out, raw(tx.sender));
  put_u16(out, checked_u16(tx.receivers.size(), "receiver"));
  for (NodeId r : tx.receivers) put_u32(out, raw(r));
  put_u64(out, tx.amount);
  put_u16(out, checked_u16(tx.sources.size(), "source"));
  for (const TxId& s : tx.sources) out.insert(out.end(), s.bytes.begin(), s.bytes.end());
  put_u64(out, tx.timestamp);
}

}  // namespace

Bytes serialize(const Transaction& tx) {
  Bytes out;
  serialize_body(tx, out);
  put_u16(out, checked_u16(tx.signature.size(), "signature"));
  out.insert(out.end(), tx.signature.begin(), tx.signature.end());
  return out;
}

Bytes signing_payload(const Transaction& tx) {
  Bytes out;
  serialize_body(tx, out);
  return out;
}

Transaction deserialize(std::span<const std::uint8_t> bytes, std::size_t& offset) {
  Reader rd(bytes, offset);
  Transaction tx;
  tx.sender = NodeId{static_cast<std::uint32_t>(rd.uint(4))};
  const auto n_recv = rd.uint(2);
  for (std::uint64_t i = 0; i < n_recv; ++i) tx.receivers.push_back(NodeId{static_cast<std::uint32_t>(rd.uint(4))});
  tx.amount = rd.uint(8);
  const auto n_src = rd.uint(2);
  for (std::uint64_t i = 0; i < n_src; ++i) {
    TxId id;
    rd.copy(id.bytes.data(), id.bytes.size());
    tx.sources.push_back(id);
  }
  tx.timestamp = rd.uint(8);
  tx.signature.resize(rd.uint(2));
  rd.copy(tx.signature.data(), tx.signature.size());
  return tx;
}

TxId tx_id(const Transaction& tx) {
  const Bytes b = serialize(tx);
  const auto d = crypto::sha256(b);
  TxId id;
  std::copy_n(d.begin(), id.bytes.size(), id.bytes.begin());
  return id;
}

bool is_well_formed(const Transaction& tx) {
  if (tx.receivers.empty()) return false;
  if (std::set<NodeId>(tx.receivers.begin(), tx.receivers.end()).size() != tx.receivers.size()) return false;
  if (std::set<TxId>(tx.sources.begin(), tx.sources.end()).size() != tx.sources.size()) return false;
  if (tx.sources.empty() != tx.is_coinbase()) return false;
  if (tx.amount > UINT64_MAX / tx.receivers.size()) return false;
  return true;
}

void canonical_sort(std::vector<Transaction>& txs) {
  std::vector<std::pair<TxId, Transaction>> keyed;
  keyed.reserve(txs.size());
  for (auto& tx : txs) keyed.emplace_back(tx_id(tx), std::move(tx));
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    if (a.second.timestamp != b.second.timestamp) return a.second.timestamp < b.second.timestamp;
    return a.first < b.first;
  });
  txs.clear();
  for (auto& [id, tx] : keyed) txs.push_back(std::move(tx));
}

namespace encoding {

namespace {
constexpr double kSentinelFloor = 1e-9;
constexpr double kRoundSlack = 0.25;
}  // namespace

StateVector encode_bytes(std::span<const std::uint8_t> bytes, Index n) {
  if (n < 1) throw Error(Errc::InvalidParams, "base dimension must be positive");
  if (static_cast<Index>(bytes.size()) > n - 1)
    throw Error(Errc::PayloadTooLarge, std::to_string(bytes.size()) + " bytes do not fit in " +
                                           std::to_string(n - 1) + " amplitude slots");
  StateVector v = StateVector::Zero(n);
  v(0) = 1.0;
  for (std::size_t i = 0; i < bytes.size(); ++i) v(static_cast<Index>(i) + 1) = (bytes[i] + 1.0) / 257.0;
  return v / v.norm();
}

Bytes decode_bytes(const StateVector& v) {
  if (v.size() < 1 || !v.allFinite()) throw Error(Errc::MalformedEncoding, "empty or non-finite vector");
  const double sentinel = v(0).real();
  if (!(sentinel > kSentinelFloor) || std::abs(v(0).imag()) > kSentinelFloor)
    throw Error(Errc::MalformedEncoding, "sentinel amplitude missing");

  Bytes out;
  bool ended = false;
  for (Index i = 1; i < v.size(); ++i) {
    const cd a = v(i) / sentinel;
    const double x = 257.0 * a.real() - 1.0;
    const double rounded = std::round(x);
    if (std::abs(x - rounded) > kRoundSlack || std::abs(257.0 * a.imag()) > kRoundSlack)
      throw Error(Errc::MalformedEncoding, "amplitude " + std::to_string(i) + " is not on the byte lattice");
    if (rounded == -1.0) {
      ended = true;
      continue;
    }
    if (ended) throw Error(Errc::MalformedEncoding, "payload resumes after terminator at slot " + std::to_string(i));
    if (rounded < 0.0 || rounded > 255.0)
      throw Error(Errc::MalformedEncoding, "recovered byte out of range at slot " + std::to_string(i));
    out.push_back(static_cast<std::uint8_t>(rounded));
  }
  return out;
}

StateVector encode_transaction(const Transaction& tx, Index n) { return encode_bytes(serialize(tx), n); }

Transaction decode_transaction(const StateVector& v) {
  const Bytes b = decode_bytes(v);
  std::size_t off = 0;
  Transaction tx = deserialize(b, off);
  if (off != b.size()) throw Error(Errc::MalformedEncoding, "trailing bytes after transaction");
  return tx;
}

StateVector encode_preliminary_block(std::vector<Transaction> txs, Index n) {
  if (txs.empty()) throw Error(Errc::EmptyBlock, "a preliminary block needs at least one transaction");
  canonical_sort(txs);
  Bytes payload;
  put_u16(payload, checked_u16(txs.size(), "transaction"));
  for (const auto& tx : txs) {
    const Bytes b = serialize(tx);
    payload.insert(payload.end(), b.begin(), b.end());
  }
  return encode_bytes(payload, n);
}

std::vector<Transaction> decode_preliminary_block(const StateVector& v) {
  const Bytes b = decode_bytes(v);
  std::size_t off = 0;
  Reader rd(b, off);
  const auto count = rd.uint(2);
  if (count == 0) throw Error(Errc::MalformedEncoding, "block declares zero transactions");
  std::vector<Transaction> txs;
  for (std::uint64_t i = 0; i < count; ++i) txs.push_back(deserialize(b, off));
  if (off != b.size()) throw Error(Errc::MalformedEncoding, "trailing bytes after block payload");
  return txs;
}

std::uint64_t BasisLabel::index() const { return label_to_index(*this); }

BasisLabel index_to_basis_label(std::uint64_t i, int n) {
  if (n < 1 || n > 63) throw Error(Errc::InvalidParams, "qubit count must be in 1..63");
  if (i >= (std::uint64_t{1} << n))
    throw Error(Errc::IndexOutOfRange, std::to_string(i) + " needs more than " + std::to_string(n) + " qubits");
  BasisLabel label{std::string(static_cast<std::size_t>(n), '0'), n};
  for (int k = 0; k < n; ++k)
    if ((i >> (n - 1 - k)) & 1u) label.bits[static_cast<std::size_t>(k)] = '1';
  return label;
}

std::uint64_t label_to_index(const BasisLabel& label) {
  if (static_cast<int>(label.bits.size()) != label.n || label.n < 1 || label.n > 63)
    throw Error(Errc::InvalidParams, "label length does not match qubit count");
  std::uint64_t i = 0;
  for (char c : label.bits) {
    if (c != '0' && c != '1') throw Error(Errc::InvalidParams, "label must be binary");
    i = (i << 1) | static_cast<std::uint64_t>(c == '1');
  }
  return i;
}

namespace {
int qubit_count(Index dim) {
  if (dim < 2 || (dim & (dim - 1)) != 0)
    throw Error(Errc::NotPowerOfTwoDim, "dimension " + std::to_string(dim) + " is not 2^n with n >= 1");
  int n = 0;
  while ((Index{1} << n) < dim) ++n;
  return n;
}
}  // namespace

std::vector<KetTerm> vector_to_ket_expansion(const StateVector& x) {
  const int n = qubit_count(x.size());
  std::vector<KetTerm> terms;
  for (Index i = 0; i < x.size(); ++i)
    if (std::abs(x(i)) > 1e-15) terms.push_back({index_to_basis_label(static_cast<std::uint64_t>(i), n), x(i)});
  return terms;
}

StateVector ket_expansion_to_vector(const std::vector<KetTerm>& terms, int n) {
  if (n < 1 || n > 30) throw Error(Errc::InvalidParams, "qubit count must be in 1..30");
  StateVector x = StateVector::Zero(Index{1} << n);
  for (const auto& t : terms) {
    if (t.label.n != n) throw Error(Errc::DimensionMismatch, "label qubit count differs");
    x(static_cast<Index>(label_to_index(t.label))) = t.amplitude;
  }
  return x;
}

}  // namespace encoding
}  // namespace qbc
