#pragma once

#include <Eigen/Dense>

#include <array>
#include <compare>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace qbc {

using cd = std::complex<double>;
using StateVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Index = Eigen::Index;

using Bytes = std::vector<std::uint8_t>;
using Amount = std::uint64_t;
using Tick = std::uint64_t;

enum class NodeId : std::uint32_t {};

/// Sender of coinbase grants in the genesis block.
inline constexpr NodeId kMintId{0xFFFFFFFFu};

inline std::uint32_t raw(NodeId id) { return static_cast<std::uint32_t>(id); }

struct TxId {
  std::array<std::uint8_t, 8> bytes{};

  std::string hex() const;
  static TxId from_hex(const std::string& s);
  auto operator<=>(const TxId&) const = default;
};

std::string to_hex(const std::uint8_t* data, std::size_t size);
inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }
Bytes from_hex(const std::string& s);

}  // namespace qbc
