#pragma once

// Fork reconciliation. Two honest chains holding the same transactions in a
// different block order are related by a unitary that fixes the shared
// prefix and maps each local block onto the majority block at the same
// height. Naming: W = majority blocks, X = local blocks.

#include <set>
#include <vector>

#include "qbc/ledger.hpp"
#include "qbc/network.hpp"

namespace qbc::fork {

inline constexpr double kForkTol = 1e-9;

/// Unit vectors completing the (pairwise orthogonal) inputs to an
/// orthonormal basis of C^k. Throws NotOrthogonal.
std::vector<StateVector> extend_orthobasis(const std::vector<StateVector>& blocks, Index k);

/// O = sum_{j<=i} W_j W_j^H + sum_{i<j} W_j X_j^H + sum_l q_l p_l^H, with p
/// completing {W_1..W_i, X_{i+1}..} and q completing {W_j}. Inputs are unit
/// length. Throws ChainMismatch.
CMatrix build_fork_operator(const std::vector<StateVector>& majority, const std::vector<StateVector>& local, Index i,
                            Index k);

/// max |(O^H O - I)_{ab}|.
double unitarity_residual(const CMatrix& op);

/// Number of leading blocks whose disclosed records agree within kForkTol.
Index common_prefix(const std::vector<StateVector>& a, const std::vector<StateVector>& b);

struct ReconcileReport {
  Index prefix = 0;
  bool changed = false;
  double unitarity = 0.0;    // residual of the operator used
  double mapping_error = 0.0;  // max ||O x_j - w_j|| / r
};

/// Rewrites `node`'s chain onto the majority chain. `majority_blocks` are the
/// unencrypted lifted blocks of the majority preliminaries (norm r). Throws
/// ChainMismatch or TransactionSetMismatch; the node is untouched on error.
ReconcileReport reconcile_fork(net::NodeState& node, const std::vector<StateVector>& majority_preliminaries,
                               const std::vector<StateVector>& majority_blocks);

struct ForkCheckReport {
  std::vector<NodeId> majority;     // nodes already on the majority record
  std::vector<NodeId> reconciled;
  std::vector<NodeId> failed;       // reconciliation refused
  std::vector<NodeId> lagging;      // different length, left alone
};

/// Picks the most common disclosed record among nodes not in `exclude`
/// (ties go to the group holding the lowest node id) and reconciles every
/// other node of the same length onto it.
ForkCheckReport fork_check(net::SimNetwork& net, const std::set<NodeId>& exclude = {});

}  // namespace qbc::fork
