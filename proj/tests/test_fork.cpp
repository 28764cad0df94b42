#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>

#include "qbc/error.hpp"
#include "qbc/fork.hpp"
#include "support.hpp"

using namespace qbc;
using namespace qbc::fork;
using qbc::test::Rng;

namespace {

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return Errc::InvalidParams;
}

CMatrix random_unitary(Rng& rng, Index k) {
  Eigen::HouseholderQR<CMatrix> qr(qbc::test::random_matrix(rng, k, k));
  return qr.householderQ() * CMatrix::Identity(k, k);
}

std::vector<StateVector> columns(const CMatrix& m, std::initializer_list<Index> idx) {
  std::vector<StateVector> out;
  for (Index c : idx) out.push_back(m.col(c));
  return out;
}

net::NodeState make_node(const ledger::ChainParams& p, double theta) {
  return net::NodeState{NodeId{0}, ledger::Chain(p), ledger::EncryptionKey(theta), {}, {}, {}, {}, {}, {}};
}

struct Blocks {
  StateVector g, a, b, c;
};

net::NetworkConfig small_config(std::uint64_t seed) {
  net::NetworkConfig c;
  c.seed = seed;
  c.nodes = 5;
  c.m_max = 8;
  c.consensus.sample_size = 2;
  c.genesis_grants = {{NodeId{0}, 20}, {NodeId{1}, 20}};
  return c;
}

/// Genesis plus three spends: a (0 -> 2), b (1 -> 3), c (0 -> 4, conflicts with a).
Blocks sample_blocks(std::uint64_t seed) {
  net::SimNetwork net(small_config(seed));
  const Index n = net.config().n;
  const auto& n0 = net.node(NodeId{0});
  const auto& n1 = net.node(NodeId{1});
  return {n0.chain.preliminaries().front(),
          encoding::encode_preliminary_block(net::create_transaction(n0, NodeId{2}, 20, 1), n),
          encoding::encode_preliminary_block(net::create_transaction(n1, NodeId{3}, 20, 1), n),
          encoding::encode_preliminary_block(net::create_transaction(n0, NodeId{4}, 20, 1), n)};
}

void fill(net::NodeState& node, const std::vector<StateVector>& prelims) {
  for (const auto& p : prelims) ledger::chain_append(node.chain, p, node.key);
  node.utxo_view = UtxoView::from_chain(node.chain);
}

}  // namespace

TEST_CASE("extend_orthobasis") {
  const auto id = extend_orthobasis({}, 3);
  REQUIRE(id.size() == 3);
  for (Index c = 0; c < 3; ++c) CHECK(id[static_cast<std::size_t>(c)] == StateVector::Unit(3, c));

  const auto rest = extend_orthobasis({StateVector::Unit(3, 0)}, 3);
  REQUIRE(rest.size() == 2);
  for (const auto& v : rest) {
    CHECK(std::abs(v.norm() - 1.0) < 1e-12);
    CHECK(std::abs(v(0)) < 1e-12);
  }
  CHECK(std::abs(rest[0].dot(rest[1])) < 1e-12);

  Rng rng(31);
  const CMatrix u = random_unitary(rng, 6);
  const auto given = columns(u, {0, 1, 2});
  const auto more = extend_orthobasis({2.0 * given[0], given[1], 0.5 * given[2]}, 6);
  REQUIRE(more.size() == 3);
  CMatrix full(6, 6);
  for (Index c = 0; c < 3; ++c) full.col(c) = given[static_cast<std::size_t>(c)];
  for (Index c = 0; c < 3; ++c) full.col(3 + c) = more[static_cast<std::size_t>(c)];
  CHECK(unitarity_residual(full) < 1e-12);

  StateVector skew = given[0] + 1e-3 * given[1];
  CHECK(error_of([&] { extend_orthobasis({given[0], skew}, 6); }) == Errc::NotOrthogonal);
  CHECK(error_of([&] { extend_orthobasis({StateVector::Zero(6)}, 6); }) == Errc::NotOrthogonal);
  CHECK(error_of([&] { extend_orthobasis({given[0]}, 5); }) == Errc::NotOrthogonal);
}

TEST_CASE("fork operator contract") {
  Rng rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Index k = 8;
    const CMatrix u = random_unitary(rng, k);
    const auto w = columns(u, {0, 1, 2, 3});
    // Shared prefix of two blocks, then a different orthonormal tail.
    const auto x = columns(u, {0, 1, 4, 5});
    const CMatrix op = build_fork_operator(w, x, 2, k);
    CHECK(unitarity_residual(op) <= 1e-9);
    for (std::size_t j = 0; j < 4; ++j) CHECK((op * x[j] - w[j]).norm() <= 1e-9);
    for (int probe = 0; probe < 10; ++probe) {
      const StateVector v = qbc::test::random_vector(rng, k);
      CHECK(std::abs((op * v).norm() - v.norm()) <= 1e-9 * v.norm());
    }
  }

  Rng r2(33);
  const CMatrix u = random_unitary(r2, 6);
  const auto w = columns(u, {0, 1, 2});
  const auto x = columns(u, {0, 3, 4});
  CHECK_NOTHROW(build_fork_operator(w, x, 1, 6));
  CHECK(unitarity_residual(build_fork_operator(w, w, 3, 6)) <= 1e-12);
  CHECK(error_of([&] { build_fork_operator(w, columns(u, {0, 1}), 1, 6); }) == Errc::ChainMismatch);
  CHECK(error_of([&] { build_fork_operator(w, x, 2, 6); }) == Errc::ChainMismatch);
  CHECK(error_of([&] { build_fork_operator(w, x, 4, 6); }) == Errc::ChainMismatch);
  CHECK(error_of([&] { build_fork_operator(w, {x[0], 2.0 * x[1], x[2]}, 1, 6); }) == Errc::ChainMismatch);
  const StateVector bent = (x[1] + 0.1 * x[2]).normalized();
  CHECK(error_of([&] { build_fork_operator(w, {x[0], bent, x[2]}, 1, 6); }) == Errc::ChainMismatch);
}

TEST_CASE("common prefix") {
  const auto s = sample_blocks(34);
  CHECK(common_prefix({s.g, s.a, s.b}, {s.g, s.b, s.a}) == 1);
  CHECK(common_prefix({s.g, s.a}, {s.g, s.a, s.b}) == 2);
  CHECK(common_prefix({s.a}, {s.b}) == 0);
}

TEST_CASE("reconciling a reordered chain") {
  const auto p = ledger::ChainParams::make(256, 8);
  const auto s = sample_blocks(35);
  const std::vector<StateVector> majority{s.g, s.b, s.a};
  const auto majority_blocks = ledger::relift(majority, p).blocks;

  SUBCASE("identical chains are left alone") {
    auto node = make_node(p, 0.9);
    fill(node, majority);
    const auto before = node.chain.blocks();
    const auto rep = reconcile_fork(node, majority, majority_blocks);
    CHECK_FALSE(rep.changed);
    CHECK(rep.prefix == 3);
    CHECK(node.chain.blocks() == before);
  }
  SUBCASE("swapped blocks") {
    auto node = make_node(p, 2.2);
    fill(node, {s.g, s.a, s.b});
    const auto rep = reconcile_fork(node, majority, majority_blocks);
    CHECK(rep.changed);
    CHECK(rep.prefix == 1);
    CHECK(rep.unitarity <= 1e-9);
    CHECK(rep.mapping_error <= 1e-9);
    CHECK(node.chain.preliminaries() == majority);
    CHECK(ledger::validate_chain(node.chain, &node.key).ok());
    const auto plain = ledger::decrypt_all(node.chain, node.key);
    for (std::size_t j = 0; j < 3; ++j) CHECK((plain[j] - majority_blocks[j]).norm() <= 1e-9 * p.r);
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(ledger::read_block(node.chain, static_cast<Index>(j + 1)) == encoding::decode_preliminary_block(majority[j]));
    CHECK(node.utxo_view == UtxoView::from_chain(node.chain));
  }
  SUBCASE("different transactions are refused") {
    auto node = make_node(p, 1.3);
    fill(node, {s.g, s.c, s.b});
    const auto before = node.chain.blocks();
    CHECK(error_of([&] { reconcile_fork(node, majority, majority_blocks); }) == Errc::TransactionSetMismatch);
    CHECK(node.chain.blocks() == before);
  }
  SUBCASE("length mismatch") {
    auto node = make_node(p, 1.3);
    fill(node, {s.g, s.a});
    CHECK(error_of([&] { reconcile_fork(node, majority, majority_blocks); }) == Errc::ChainMismatch);
  }
}

TEST_CASE("fork_check over a network") {
  const auto c = small_config(36);
  net::SimNetwork net(c);
  const auto a = net::create_transaction(net.node(NodeId{0}), NodeId{2}, 20, 1);
  const auto b = net::create_transaction(net.node(NodeId{1}), NodeId{3}, 20, 1);
  const StateVector pa = encoding::encode_preliminary_block(a, c.n);
  const StateVector pb = encoding::encode_preliminary_block(b, c.n);
  auto append = [&](NodeId id, std::vector<StateVector> blocks) {
    auto& nd = net.node(id);
    for (const auto& pr : blocks) ledger::chain_append(nd.chain, pr, nd.key);
    nd.utxo_view = UtxoView::from_chain(nd.chain);
  };
  append(NodeId{0}, {pa, pb});
  append(NodeId{1}, {pb, pa});
  append(NodeId{2}, {pa, pb});
  append(NodeId{3}, {pa, pb});
  append(NodeId{4}, {pb});

  const auto rep = fork_check(net);
  CHECK(rep.majority == std::vector<NodeId>{NodeId{0}, NodeId{2}, NodeId{3}});
  CHECK(rep.reconciled == std::vector<NodeId>{NodeId{1}});
  CHECK(rep.lagging == std::vector<NodeId>{NodeId{4}});
  CHECK(rep.failed.empty());
  CHECK(net.node(NodeId{1}).chain.preliminaries() == net.node(NodeId{0}).chain.preliminaries());
  CHECK(net.node(NodeId{1}).utxo_view == net.node(NodeId{0}).utxo_view);
  CHECK(net.events().count("fork_reconciled") == 1);

  // Excluding the majority flips the outcome toward node 1's record.
  net::SimNetwork net2(c);
  auto append2 = [&](NodeId id, std::vector<StateVector> blocks) {
    auto& nd = net2.node(id);
    for (const auto& pr : blocks) ledger::chain_append(nd.chain, pr, nd.key);
  };
  append2(NodeId{0}, {pa, pb});
  append2(NodeId{1}, {pb, pa});
  append2(NodeId{2}, {pb, pa});
  append2(NodeId{3}, {pa, pb});
  append2(NodeId{4}, {pa, pb});
  const auto rep2 = fork_check(net2, {NodeId{0}, NodeId{3}});
  CHECK(rep2.majority == std::vector<NodeId>{NodeId{1}, NodeId{2}});
  CHECK(rep2.reconciled == std::vector<NodeId>{NodeId{4}});
  CHECK(net2.node(NodeId{0}).chain.preliminaries() != net2.node(NodeId{1}).chain.preliminaries());
}
