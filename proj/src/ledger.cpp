#include "qbc/ledger.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "qbc/error.hpp"

namespace qbc::ledger {

ChainParams ChainParams::make(Index n, Index m_max) {
  ChainParams p;
  p.n = n;
  p.m_max = m_max;
  p.q = 0;
  while (m_max > 0 && (Index{1} << p.q) < m_max) ++p.q;
  p.r = liftgs::LiftingParams::default_radius(m_max);
  p.validate();
  return p;
}

void ChainParams::validate() const {
  lifting().validate();
  if (q < 1 || (Index{1} << q) != m_max)
    throw Error(Errc::InvalidParams, "m_max must equal 2^q with q >= 1, got " + std::to_string(m_max));
  if (r < liftgs::LiftingParams::default_radius(m_max) * (1.0 - 1e-15))
    throw Error(Errc::InvalidParams, "chain radius must be at least 2 * sqrt(m_max)");
}

EncryptionKey::EncryptionKey(double theta) : theta_(theta) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw Error(Errc::InvalidParams, "theta must lie in [0, pi]");
}

CMatrix make_encryption_unitary(const EncryptionKey& key, int q) {
  if (q < 1) throw Error(Errc::InvalidParams, "encryption needs at least one lifted qubit");
  const double s = 1.0 / std::sqrt(2.0);
  const cd phase = std::polar(1.0, key.theta());
  Eigen::Matrix2cd u;
  u << s, s, s * phase, -s * phase;

  CMatrix out = u;
  for (int k = 1; k < q; ++k) {
    CMatrix next(out.rows() * 2, out.cols() * 2);
    for (Index i = 0; i < out.rows(); ++i)
      for (Index j = 0; j < out.cols(); ++j) next.block(2 * i, 2 * j, 2, 2) = out(i, j) * u;
    out = std::move(next);
  }
  return out;
}

namespace {

void require_block_dim(const StateVector& w, const ChainParams& params) {
  if (w.size() != params.dim())
    throw Error(Errc::DimensionMismatch,
                "block dimension " + std::to_string(w.size()) + " != " + std::to_string(params.dim()));
}

}  // namespace

StateVector encrypt_block(const StateVector& w, const EncryptionKey& key, const ChainParams& params) {
  require_block_dim(w, params);
  StateVector out = w;
  out.tail(params.m_max) = make_encryption_unitary(key, params.q) * w.tail(params.m_max);
  return out;
}

StateVector decrypt_block(const StateVector& enc, const EncryptionKey& key, const ChainParams& params) {
  require_block_dim(enc, params);
  StateVector out = enc;
  out.tail(params.m_max) = make_encryption_unitary(key, params.q).adjoint() * enc.tail(params.m_max);
  return out;
}

double fidelity(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size()) throw Error(Errc::DimensionMismatch, "fidelity of vectors with different dimensions");
  const double na = a.squaredNorm();
  const double nb = b.squaredNorm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::norm(a.dot(b)) / (na * nb);
}

Chain::Chain(const ChainParams& params) : params_(params), workspace_(params.lifting()) { params.validate(); }

void Chain::tamper_block(Index block, Index coord, cd delta) {
  if (block < 1 || block > length()) throw Error(Errc::IndexOutOfRange, "no block " + std::to_string(block));
  auto& b = blocks_[static_cast<std::size_t>(block - 1)];
  if (coord < 0 || coord >= b.size()) throw Error(Errc::IndexOutOfRange, "no coordinate " + std::to_string(coord));
  b(coord) += delta;
}

void Chain::tamper_preliminary(Index block, Index coord, cd delta) {
  if (block < 1 || block > length()) throw Error(Errc::IndexOutOfRange, "no block " + std::to_string(block));
  auto& p = preliminaries_[static_cast<std::size_t>(block - 1)];
  if (coord < 0 || coord >= p.size()) throw Error(Errc::IndexOutOfRange, "no coordinate " + std::to_string(coord));
  p(coord) += delta;
}

void Chain::replace_contents(std::vector<StateVector> preliminaries, std::vector<StateVector> encrypted_blocks,
                             Workspace workspace) {
  if (preliminaries.size() != encrypted_blocks.size() ||
      workspace.count() != static_cast<Index>(preliminaries.size()))
    throw Error(Errc::ChainMismatch, "replacement record is inconsistent");
  preliminaries_ = std::move(preliminaries);
  blocks_ = std::move(encrypted_blocks);
  workspace_ = std::move(workspace);
}

Chain& chain_append(Chain& chain, const StateVector& preliminary, const EncryptionKey& key) {
  const ChainParams& p = chain.params_;
  if (preliminary.size() != p.n) throw Error(Errc::DimensionMismatch, "preliminary must live in C^n");
  if (std::abs(preliminary.norm() - 1.0) > kDisclosedTol) throw Error(Errc::NotUnitNorm, "preliminary is not unit norm");
  if (chain.length() >= p.m_max)
    throw Error(Errc::CapacityExceeded, "chain is full at " + std::to_string(p.m_max) + " blocks");

  const auto block = liftgs::lift_append(chain.workspace_, preliminary);
  chain.blocks_.push_back(encrypt_block(block.full, key, p));
  chain.preliminaries_.push_back(preliminary);
  return chain;
}

std::vector<Transaction> read_block(const Chain& chain, Index i) {
  if (i < 1 || i > chain.length())
    throw Error(Errc::IndexOutOfRange, "block " + std::to_string(i) + " of " + std::to_string(chain.length()));
  const StateVector disclosed =
      liftgs::project(chain.blocks()[static_cast<std::size_t>(i - 1)], chain.params().lifting());
  return encoding::decode_preliminary_block(disclosed);
}

Tick block_timestamp(const Chain& chain, Index i) {
  Tick t = 0;
  for (const auto& tx : read_block(chain, i)) t = std::max(t, tx.timestamp);
  return t;
}

std::vector<StateVector> decrypt_all(const Chain& chain, const EncryptionKey& key) {
  std::vector<StateVector> out;
  out.reserve(chain.blocks().size());
  for (const auto& b : chain.blocks()) out.push_back(decrypt_block(b, key, chain.params()));
  return out;
}

Relift relift(const std::vector<StateVector>& preliminaries, const ChainParams& params) {
  Relift out{Workspace(params.lifting()), {}};
  for (const auto& p : preliminaries) out.blocks.push_back(liftgs::lift_append(out.workspace, p).full);
  return out;
}

ValidationReport validate_chain(const Chain& chain, const EncryptionKey* key) {
  const ChainParams& p = chain.params();
  const Index len = chain.length();
  ValidationReport report;

  auto fail = [&](Index i, std::string reason) {
    report.first_invalid_index = i;
    report.reason = std::move(reason);
    for (Index j = i; j <= len; ++j) report.invalid.push_back(j);
    return report;
  };

  std::vector<StateVector> decrypted;
  std::optional<Workspace> fresh;
  if (key) fresh.emplace(p.lifting());

  std::set<TxId> seen;
  for (Index i = 1; i <= len; ++i) {
    const auto& block = chain.blocks()[static_cast<std::size_t>(i - 1)];
    const auto& prelim = chain.preliminaries()[static_cast<std::size_t>(i - 1)];
    if (block.size() != p.dim() || prelim.size() != p.n) return fail(i, "stored vector has the wrong dimension");
    if (!block.allFinite() || !prelim.allFinite()) return fail(i, "stored vector has non-finite entries");

    if ((block.head(p.n) - prelim).cwiseAbs().maxCoeff() > kDisclosedTol)
      return fail(i, "disclosed part does not match the published preliminary");

    std::vector<Transaction> txs;
    try {
      txs = read_block(chain, i);
    } catch (const Error& e) {
      return fail(i, std::string("disclosed part does not decode: ") + e.what());
    }
    for (const auto& tx : txs) {
      if (!is_well_formed(tx)) return fail(i, "malformed transaction " + tx_id(tx).hex());
      if (tx.is_coinbase() && i != 1) return fail(i, "grant outside the genesis block");
      if (!seen.insert(tx_id(tx)).second) return fail(i, "transaction " + tx_id(tx).hex() + " confirmed twice");
    }

    if (!key) continue;
    const StateVector w = decrypt_block(block, *key, p);
    if (std::abs(w.norm() - p.r) > liftgs::kOrthoTol * p.r) return fail(i, "decrypted block does not have norm r");
    for (const auto& prev : decrypted)
      if (std::abs(prev.dot(w)) > liftgs::kOrthoTol * p.r * p.r)
        return fail(i, "decrypted block is not orthogonal to its predecessors");
    try {
      const auto expected = liftgs::lift_append(*fresh, prelim);
      if ((expected.full - w).norm() > liftgs::kOrthoTol * p.r)
        return fail(i, "block differs from the lifting of the published preliminaries");
    } catch (const Error& e) {
      return fail(i, std::string("re-lifting failed: ") + e.what());
    }
    decrypted.push_back(w);
  }
  return report;
}

}  // namespace qbc::ledger
