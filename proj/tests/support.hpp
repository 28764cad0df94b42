#pragma once

// Shared helpers for the test binaries: seeded random data and independent
// reference implementations used as oracles.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "qbc/encoding.hpp"
#include "qbc/liftgs.hpp"
#include "qbc/signing.hpp"
#include "qbc/types.hpp"

namespace qbc::test {

using Rng = std::mt19937_64;

inline double unit_real(Rng& rng) { return std::uniform_real_distribution<double>(-1.0, 1.0)(rng); }

inline StateVector random_vector(Rng& rng, Index dim) {
  StateVector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = cd(unit_real(rng), unit_real(rng));
  return v;
}

inline StateVector random_unit(Rng& rng, Index dim) {
  StateVector v = random_vector(rng, dim);
  return v / v.norm();
}

inline CMatrix random_matrix(Rng& rng, Index rows, Index cols) {
  CMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) m.col(j) = random_vector(rng, rows);
  return m;
}

/// Entrywise <v_i, v_j> by explicit summation.
inline CMatrix oracle_gram(const std::vector<StateVector>& vs) {
  const std::size_t m = vs.size();
  CMatrix g(static_cast<Index>(m), static_cast<Index>(m));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      cd s = 0;
      for (Index k = 0; k < vs[i].size(); ++k) s += std::conj(vs[i](k)) * vs[j](k);
      g(static_cast<Index>(i), static_cast<Index>(j)) = s;
    }
  return g;
}

/// Largest singular value by power iteration on M^H M, run until the
/// Rayleigh quotient settles.
inline double oracle_spectral_norm(const CMatrix& m, Rng& rng) {
  const CMatrix h = m.adjoint() * m;
  StateVector x = random_unit(rng, h.cols());
  double lambda = 0.0;
  for (int it = 0; it < 100000; ++it) {
    StateVector y = h * x;
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    y /= ny;
    const double next = std::real(y.dot(h * y));
    x = y;
    if (std::abs(next - lambda) <= 1e-15 * std::max(1.0, next) && it > 10) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

/// Principal square root of a Hermitian positive definite matrix by the
/// Denman-Beavers iteration.
inline CMatrix oracle_sqrt(const CMatrix& a) {
  CMatrix y = a;
  CMatrix z = CMatrix::Identity(a.rows(), a.cols());
  for (int it = 0; it < 100; ++it) {
    const CMatrix y_next = 0.5 * (y + z.inverse());
    const CMatrix z_next = 0.5 * (z + y.inverse());
    const double change = (y_next - y).cwiseAbs().maxCoeff();
    y = y_next;
    z = z_next;
    if (change < 1e-15) break;
  }
  return 0.5 * (y + y.adjoint());
}

inline TxId fake_id(std::uint8_t seed) {
  TxId id;
  for (std::size_t i = 0; i < id.bytes.size(); ++i) id.bytes[i] = static_cast<std::uint8_t>(seed + 17 * i);
  return id;
}

/// A well-formed transaction with random fields; not signed by any registry key.
inline Transaction random_transaction(Rng& rng, std::uint32_t nodes = 8) {
  std::uniform_int_distribution<std::uint32_t> node(0, nodes - 1);
  Transaction tx;
  tx.sender = static_cast<NodeId>(node(rng));
  tx.receivers.push_back(static_cast<NodeId>(node(rng)));
  tx.amount = 1 + rng() % 100;
  const int nsrc = 1 + static_cast<int>(rng() % 2);
  for (int s = 0; s < nsrc; ++s) {
    TxId id;
    for (auto& b : id.bytes) b = static_cast<std::uint8_t>(rng());
    tx.sources.push_back(id);
  }
  tx.timestamp = rng() % 1000;
  tx.signature = Bytes(kTagSize, 0xAB);
  return tx;
}

inline StateVector random_preliminary(Rng& rng, Index n, int txs = 2) {
  std::vector<Transaction> block;
  for (int i = 0; i < txs; ++i) block.push_back(random_transaction(rng));
  return encoding::encode_preliminary_block(block, n);
}

}  // namespace qbc::test
