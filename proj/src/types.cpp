#include "qbc/types.hpp"

#include "qbc/error.hpp"

namespace qbc {

std::string to_hex(const std::uint8_t* data, std::size_t size) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(size * 2);
  for (std::size_t i = 0; i < size; ++i) {
    s.push_back(kDigits[data[i] >> 4]);
    s.push_back(kDigits[data[i] & 0xF]);
  }
  return s;
}

Bytes from_hex(const std::string& s) {
  auto nibble = [&](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw Error(Errc::MalformedEncoding, "bad hex digit in '" + s + "'");
  };
  if (s.size() % 2 != 0) throw Error(Errc::MalformedEncoding, "odd-length hex string");
  Bytes out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
  return out;
}

std::string TxId::hex() const { return to_hex(bytes.data(), bytes.size()); }

TxId TxId::from_hex(const std::string& s) {
  const Bytes b = qbc::from_hex(s);
  if (b.size() != 8) throw Error(Errc::MalformedEncoding, "transaction id must be 8 bytes");
  TxId id;
  std::copy(b.begin(), b.end(), id.bytes.begin());
  return id;
}

}  // namespace qbc
