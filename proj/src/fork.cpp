#include "qbc/fork.hpp"

#include <algorithm>
#include <map>

#include "qbc/error.hpp"

namespace qbc::fork {

namespace {

std::vector<TxId> tx_ids_after(const std::vector<StateVector>& prelims, Index prefix) {
  std::vector<TxId> ids;
  for (std::size_t j = static_cast<std::size_t>(prefix); j < prelims.size(); ++j) {
    try {
      for (const auto& tx : encoding::decode_preliminary_block(prelims[j])) ids.push_back(tx_id(tx));
    } catch (const Error& e) {
      throw Error(Errc::ChainMismatch, std::string("undecodable block during reconciliation: ") + e.what());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

std::vector<StateVector> extend_orthobasis(const std::vector<StateVector>& blocks, Index k) {
  std::vector<StateVector> unit;
  for (const auto& b : blocks) {
    if (b.size() != k) throw Error(Errc::NotOrthogonal, "block dimension differs from k");
    const double nrm = b.norm();
    if (!(nrm > 0.0)) throw Error(Errc::NotOrthogonal, "zero block");
    unit.push_back(b / nrm);
  }
  for (std::size_t a = 0; a < unit.size(); ++a)
    for (std::size_t b = a + 1; b < unit.size(); ++b)
      if (std::abs(unit[a].dot(unit[b])) > kForkTol) throw Error(Errc::NotOrthogonal, "blocks are not orthogonal");
  if (static_cast<Index>(unit.size()) > k) throw Error(Errc::NotOrthogonal, "more blocks than dimensions");
  if (unit.empty()) {
    std::vector<StateVector> out;
    for (Index c = 0; c < k; ++c) out.push_back(StateVector::Unit(k, c));
    return out;
  }
  CMatrix full;
  try {
    full = liftgs::complete_to_orthogonal(unit);
  } catch (const Error& e) {
    throw Error(Errc::NotOrthogonal, e.what());
  }
  std::vector<StateVector> out;
  for (Index c = static_cast<Index>(unit.size()); c < k; ++c) out.push_back(full.col(c));
  return out;
}

CMatrix build_fork_operator(const std::vector<StateVector>& majority, const std::vector<StateVector>& local, Index i,
                            Index k) {
  if (majority.size() != local.size()) throw Error(Errc::ChainMismatch, "chains differ in length");
  const Index nc = static_cast<Index>(majority.size());
  if (i < 0 || i > nc) throw Error(Errc::ChainMismatch, "prefix length out of range");
  for (Index j = 0; j < nc; ++j) {
    const auto& w = majority[static_cast<std::size_t>(j)];
    const auto& x = local[static_cast<std::size_t>(j)];
    if (w.size() != k || x.size() != k) throw Error(Errc::ChainMismatch, "block dimension differs from k");
    if (std::abs(w.norm() - 1.0) > kForkTol || std::abs(x.norm() - 1.0) > kForkTol)
      throw Error(Errc::ChainMismatch, "blocks must be unit length");
    if (j < i && (w - x).norm() > kForkTol) throw Error(Errc::ChainMismatch, "chains disagree inside the prefix");
  }

  std::vector<StateVector> source;
  for (Index j = 0; j < nc; ++j) source.push_back(j < i ? majority[static_cast<std::size_t>(j)] : local[static_cast<std::size_t>(j)]);

  std::vector<StateVector> p, q;
  try {
    p = extend_orthobasis(source, k);
    q = extend_orthobasis(majority, k);
  } catch (const Error& e) {
    throw Error(Errc::ChainMismatch, e.what());
  }

  CMatrix op = CMatrix::Zero(k, k);
  for (Index j = 0; j < nc; ++j) {
    const auto& w = majority[static_cast<std::size_t>(j)];
    op.noalias() += w * source[static_cast<std::size_t>(j)].adjoint();
  }
  for (std::size_t l = 0; l < p.size(); ++l) op.noalias() += q[l] * p[l].adjoint();

  if (unitarity_residual(op) > kForkTol) throw Error(Errc::ChainMismatch, "fork operator is not unitary");
  return op;
}

double unitarity_residual(const CMatrix& op) {
  return (op.adjoint() * op - CMatrix::Identity(op.cols(), op.cols())).cwiseAbs().maxCoeff();
}

Index common_prefix(const std::vector<StateVector>& a, const std::vector<StateVector>& b) {
  const std::size_t len = std::min(a.size(), b.size());
  std::size_t i = 0;
  while (i < len && a[i].size() == b[i].size() && (a[i] - b[i]).norm() <= kForkTol) ++i;
  return static_cast<Index>(i);
}

ReconcileReport reconcile_fork(net::NodeState& node, const std::vector<StateVector>& majority_preliminaries,
                               const std::vector<StateVector>& majority_blocks) {
  const ledger::Chain& chain = node.chain;
  const ledger::ChainParams& params = chain.params();
  const auto& local_prelims = chain.preliminaries();
  if (majority_preliminaries.size() != local_prelims.size() || majority_blocks.size() != local_prelims.size())
    throw Error(Errc::ChainMismatch, "chains differ in length");

  ReconcileReport report;
  report.prefix = common_prefix(local_prelims, majority_preliminaries);
  if (report.prefix == chain.length()) return report;

  if (tx_ids_after(local_prelims, report.prefix) != tx_ids_after(majority_preliminaries, report.prefix))
    throw Error(Errc::TransactionSetMismatch, "chains hold different transactions beyond the shared prefix");

  const double r = params.r;
  const auto decrypted = ledger::decrypt_all(chain, node.key);
  std::vector<StateVector> x, w;
  for (const auto& b : decrypted) x.push_back(b / r);
  for (const auto& b : majority_blocks) w.push_back(b / r);
  const CMatrix op = build_fork_operator(w, x, report.prefix, params.dim());
  report.unitarity = unitarity_residual(op);

  std::vector<StateVector> encrypted;
  for (std::size_t j = 0; j < decrypted.size(); ++j) {
    StateVector moved = op * decrypted[j];
    report.mapping_error = std::max(report.mapping_error, (moved - majority_blocks[j]).norm() / r);
    const StateVector& prelim = majority_preliminaries[j];
    if ((moved.head(params.n) - prelim).norm() > kForkTol * r)
      throw Error(Errc::ChainMismatch, "transformed block does not disclose the majority record");
    moved.head(params.n) = prelim;
    encrypted.push_back(ledger::encrypt_block(moved, node.key, params));
  }
  if (report.mapping_error > kForkTol) throw Error(Errc::ChainMismatch, "fork operator misses the majority blocks");

  ledger::Chain updated = chain;
  updated.replace_contents(majority_preliminaries, std::move(encrypted),
                           ledger::relift(majority_preliminaries, params).workspace);
  const auto check = ledger::validate_chain(updated, &node.key);
  if (!check.ok()) throw Error(Errc::ChainMismatch, "reconciled chain fails validation: " + check.reason);

  node.chain = std::move(updated);
  node.utxo_view = UtxoView::from_chain(node.chain);
  report.changed = true;
  return report;
}

ForkCheckReport fork_check(net::SimNetwork& net, const std::set<NodeId>& exclude) {
  ForkCheckReport report;
  // Group by exact disclosed record.
  std::vector<std::pair<std::vector<StateVector>, std::vector<NodeId>>> groups;
  for (const auto& nd : net.nodes()) {
    if (exclude.contains(nd.id)) continue;
    const auto& prelims = nd.chain.preliminaries();
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
      if (g.first.size() != prelims.size()) return false;
      for (std::size_t j = 0; j < prelims.size(); ++j)
        if (g.first[j] != prelims[j]) return false;
      return true;
    });
    if (it == groups.end())
      groups.push_back({prelims, {nd.id}});
    else
      it->second.push_back(nd.id);
  }
  if (groups.empty()) return report;

  // Groups are created in node-id order, so the first largest group holds the lowest id among ties.
  std::size_t best = 0;
  for (std::size_t g = 1; g < groups.size(); ++g)
    if (groups[g].second.size() > groups[best].second.size()) best = g;
  const auto& majority_prelims = groups[best].first;
  report.majority = groups[best].second;
  const auto majority_blocks = ledger::relift(majority_prelims, net.chain_params()).blocks;

  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (g == best) continue;
    for (NodeId id : groups[g].second) {
      net::NodeState& nd = net.node(id);
      if (nd.chain.length() != static_cast<Index>(majority_prelims.size())) {
        report.lagging.push_back(id);
        continue;
      }
      try {
        reconcile_fork(nd, majority_prelims, majority_blocks);
        report.reconciled.push_back(id);
        net.events().add(net.clock(), id, "fork_reconciled", net::digest_hex(std::to_string(report.majority.size())));
      } catch (const Error& e) {
        report.failed.push_back(id);
        net.events().add(net.clock(), id, "fork_unresolved", net::digest_hex(std::string(to_string(e.code()))));
      }
    }
  }
  std::sort(report.reconciled.begin(), report.reconciled.end());
  std::sort(report.failed.begin(), report.failed.end());
  std::sort(report.lagging.begin(), report.lagging.end());
  return report;
}

}  // namespace qbc::fork
