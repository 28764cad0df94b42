#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qbc/encoding.hpp"
#include "qbc/liftgs.hpp"
#include "qbc/types.hpp"

namespace qbc::ledger {

using Workspace = liftgs::LiftingWorkspace<cd>;

struct ChainParams {
  Index n = 0;
  Index m_max = 0;
  int q = 0;  // log2(m_max)
  double r = 0.0;

  /// Radius fixed at 2 * sqrt(m_max), which dominates ||M||_2 for any
  /// m_max unit-norm preliminaries.
  static ChainParams make(Index n, Index m_max);
  void validate() const;
  liftgs::LiftingParams lifting() const { return {n, m_max, r}; }
  Index dim() const { return n + m_max; }
};

/// Per-node secret angle in [0, pi]. Never part of any serialized artifact.
class EncryptionKey {
 public:
  explicit EncryptionKey(double theta);
  double theta() const { return theta_; }

 private:
  double theta_;
};

/// U_theta^{(x)q}, where U_theta has columns (1, e^{i theta}) / sqrt2 and
/// (1, -e^{i theta}) / sqrt2.
CMatrix make_encryption_unitary(const EncryptionKey& key, int q);

/// Identity on the first n coordinates, make_encryption_unitary on the rest.
StateVector encrypt_block(const StateVector& w, const EncryptionKey& key, const ChainParams& params);
StateVector decrypt_block(const StateVector& enc, const EncryptionKey& key, const ChainParams& params);

/// |<a, b>|^2 / (||a||^2 ||b||^2).
double fidelity(const StateVector& a, const StateVector& b);

class Chain {
 public:
  explicit Chain(const ChainParams& params);

  const ChainParams& params() const { return params_; }
  Index length() const { return static_cast<Index>(blocks_.size()); }
  bool empty() const { return blocks_.empty(); }

  /// Encrypted blocks, dimension n + m_max, in chain order.
  const std::vector<StateVector>& blocks() const { return blocks_; }
  /// Disclosed preliminary vectors (public record), dimension n.
  const std::vector<StateVector>& preliminaries() const { return preliminaries_; }
  const Workspace& workspace() const { return workspace_; }

  /// Adds delta to one stored coordinate. Used by fault injection only.
  void tamper_block(Index block, Index coord, cd delta);
  void tamper_preliminary(Index block, Index coord, cd delta);

  /// Replaces the whole record. The caller guarantees consistency; used by
  /// fork reconciliation after it has transformed the blocks.
  void replace_contents(std::vector<StateVector> preliminaries, std::vector<StateVector> encrypted_blocks,
                        Workspace workspace);

  friend Chain& chain_append(Chain& chain, const StateVector& preliminary, const EncryptionKey& key);

 private:
  ChainParams params_;
  Workspace workspace_;
  std::vector<StateVector> blocks_;
  std::vector<StateVector> preliminaries_;
};

/// Lifts the unit-norm preliminary, encrypts it under `key` and appends both
/// the encrypted block and the preliminary.
Chain& chain_append(Chain& chain, const StateVector& preliminary, const EncryptionKey& key);

/// Transactions of block i (1-based), read from the disclosed part only.
std::vector<Transaction> read_block(const Chain& chain, Index i);

/// Latest transaction timestamp in block i (1-based).
Tick block_timestamp(const Chain& chain, Index i);

std::vector<StateVector> decrypt_all(const Chain& chain, const EncryptionKey& key);

struct Relift {
  Workspace workspace;
  std::vector<StateVector> blocks;  // unencrypted
};

/// Runs the incremental lifting from scratch over a preliminary sequence.
Relift relift(const std::vector<StateVector>& preliminaries, const ChainParams& params);

struct ValidationReport {
  std::optional<Index> first_invalid_index;  // 1-based
  std::vector<Index> invalid;                // every index >= first failure
  std::string reason;

  bool ok() const { return !first_invalid_index.has_value(); }
};

inline constexpr double kDisclosedTol = 1e-9;

/// Checks, per block in order: the disclosed part matches the stored
/// preliminary, the block decodes to well-formed transactions, and (when a
/// key is supplied) the decrypted blocks have norm r, are pairwise
/// orthogonal, and coincide with a fresh lifting of the preliminaries.
ValidationReport validate_chain(const Chain& chain, const EncryptionKey* key = nullptr);

}  // namespace qbc::ledger
