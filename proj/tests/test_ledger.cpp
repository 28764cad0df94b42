#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>


#include "qbc/dump.hpp"
#include "qbc/ledger.hpp"
#include "support.hpp"

using namespace qbc;
using namespace qbc::ledger;
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

struct Fixture {
  ChainParams params = ChainParams::make(128, 8);
  EncryptionKey key{1.0987654321};
  Chain chain{params};
  std::vector<std::vector<Transaction>> contents;

  explicit Fixture(int blocks, std::uint64_t seed = 21) {
    Rng rng(seed);
    for (int b = 0; b < blocks; ++b) {
      std::vector<Transaction> txs{qbc::test::random_transaction(rng)};
      canonical_sort(txs);
      contents.push_back(txs);
      chain_append(chain, encoding::encode_preliminary_block(txs, params.n), key);
    }
  }
};

}  // namespace

TEST_CASE("chain parameters") {
  const auto p = ChainParams::make(256, 16);
  CHECK(p.q == 4);
  CHECK(p.r == 8.0);
  CHECK(p.dim() == 272);
  CHECK(error_of([] { ChainParams::make(16, 1); }) == Errc::InvalidParams);
  CHECK(error_of([] { ChainParams::make(16, 6); }) == Errc::InvalidParams);
  CHECK(error_of([] { EncryptionKey(-0.1); }) == Errc::InvalidParams);
  CHECK(error_of([] { EncryptionKey(4.0); }) == Errc::InvalidParams);
}

TEST_CASE("encryption unitary") {
  const CMatrix u0 = make_encryption_unitary(EncryptionKey(0.0), 1);
  const double h = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(u0(0, 0) - h) < 1e-15);
  CHECK(std::abs(u0(0, 1) - h) < 1e-15);
  CHECK(std::abs(u0(1, 0) - h) < 1e-15);
  CHECK(std::abs(u0(1, 1) + h) < 1e-15);

  const double theta = 0.7;
  const CMatrix u1 = make_encryption_unitary(EncryptionKey(theta), 1);
  const cd phase = std::polar(1.0, theta);
  CHECK(std::abs(u1(0, 0) - h) < 1e-15);
  CHECK(std::abs(u1(1, 0) - h * phase) < 1e-15);
  CHECK(std::abs(u1(0, 1) - h) < 1e-15);
  CHECK(std::abs(u1(1, 1) + h * phase) < 1e-15);

  for (int q = 1; q <= 4; ++q) {
    const CMatrix u = make_encryption_unitary(EncryptionKey(2.3), q);
    CHECK(u.rows() == (1 << q));
    CHECK((u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Kronecker structure: U^{(x)2}(a b, c d) = U(a, c) U(b, d).
  const CMatrix u2 = make_encryption_unitary(EncryptionKey(theta), 2);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) CHECK(std::abs(u2(2 * a + b, 2 * c + d) - u1(a, c) * u1(b, d)) < 1e-15);
}

TEST_CASE("block encryption") {
  Rng rng(22);
  const auto p = ChainParams::make(16, 8);
  const StateVector w = qbc::test::random_vector(rng, p.dim());
  const EncryptionKey key(0.4);
  const StateVector enc = encrypt_block(w, key, p);
  CHECK(enc.head(p.n) == w.head(p.n));
  CHECK(std::abs(enc.norm() - w.norm()) < 1e-12);
  CHECK((decrypt_block(enc, key, p) - w).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(liftgs::project(enc, p.lifting()) == liftgs::project(w, p.lifting()));
  CHECK(error_of([&] { decrypt_block(StateVector::Zero(5), key, p); }) == Errc::DimensionMismatch);
  CHECK(error_of([&] { encrypt_block(StateVector::Zero(5), key, p); }) == Errc::DimensionMismatch);
}

TEST_CASE("fidelity") {
  StateVector a(2), b(2);
  a << 1, 0;
  b << 1, 1;
  CHECK(std::abs(fidelity(a, a) - 1.0) < 1e-15);
  CHECK(std::abs(fidelity(a, 3.0 * a) - 1.0) < 1e-15);
  CHECK(std::abs(fidelity(a, b) - 0.5) < 1e-15);
}

TEST_CASE("chain append and read") {
  Fixture f(3);
  CHECK(f.chain.length() == 3);
  for (Index i = 1; i <= 3; ++i) {
    CHECK(read_block(f.chain, i) == f.contents[static_cast<std::size_t>(i - 1)]);
    const auto& enc = f.chain.blocks()[static_cast<std::size_t>(i - 1)];
    CHECK(enc.head(f.params.n) == f.chain.preliminaries()[static_cast<std::size_t>(i - 1)]);
  }
  // Reading needs no key: a copy carries only public data.
  const Chain copy = f.chain;
  CHECK(read_block(copy, 2) == f.contents[1]);

  const auto plain = decrypt_all(f.chain, f.key);
  for (std::size_t a = 0; a < plain.size(); ++a) {
    CHECK(std::abs(plain[a].norm() - f.params.r) <= 1e-9 * f.params.r);
    for (std::size_t b = a + 1; b < plain.size(); ++b)
      CHECK(std::abs(plain[a].dot(plain[b])) <= 1e-9 * f.params.r * f.params.r);
  }

  CHECK(error_of([&] { read_block(f.chain, 0); }) == Errc::IndexOutOfRange);
  CHECK(error_of([&] { read_block(f.chain, 4); }) == Errc::IndexOutOfRange);
  CHECK(error_of([&] { chain_append(f.chain, StateVector::Ones(f.params.n), f.key); }) == Errc::NotUnitNorm);
  CHECK(error_of([&] { chain_append(f.chain, StateVector::Ones(3), f.key); }) == Errc::DimensionMismatch);
}

TEST_CASE("capacity") {
  Fixture f(8);
  Rng rng(23);
  CHECK(error_of([&] { chain_append(f.chain, qbc::test::random_preliminary(rng, f.params.n, 1), f.key); }) ==
        Errc::CapacityExceeded);
}

TEST_CASE("construction is reproducible and yields the computational basis") {
  Fixture f(6);
  const auto again = relift(f.chain.preliminaries(), f.params);
  const auto plain = decrypt_all(f.chain, f.key);
  std::vector<StateVector> lifted;
  for (std::size_t j = 0; j < plain.size(); ++j) {
    CHECK((again.blocks[j] - plain[j]).cwiseAbs().maxCoeff() < 1e-12);
    lifted.push_back(plain[j].tail(f.params.m_max));
  }
  // Bit-identical across independent constructions.
  const auto twice = relift(f.chain.preliminaries(), f.params);
  for (std::size_t j = 0; j < plain.size(); ++j) CHECK(twice.blocks[j] == again.blocks[j]);

  const auto basis = liftgs::classic_gram_schmidt(lifted);
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const StateVector e = StateVector::Unit(f.params.m_max, static_cast<Index>(j));
    CHECK((basis[j] - e).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("validation") {
  SUBCASE("untampered and empty chains") {
    Fixture f(5);
    CHECK(validate_chain(f.chain).ok());
    CHECK(validate_chain(f.chain, &f.key).ok());
    Chain empty(f.params);
    CHECK(validate_chain(empty).ok());
  }
  SUBCASE("disclosed amplitude of block 2") {
    Fixture f(5);
    f.chain.tamper_block(2, 10, cd(1e-3, 0));
    for (const EncryptionKey* key : std::vector<const EncryptionKey*>{nullptr, &f.key}) {
      const auto rep = validate_chain(f.chain, key);
      REQUIRE_FALSE(rep.ok());
      CHECK(*rep.first_invalid_index == 2);
      CHECK(rep.invalid == std::vector<Index>{2, 3, 4, 5});
    }
  }
  SUBCASE("lifted amplitude needs the key") {
    Fixture f(5);
    f.chain.tamper_block(3, f.params.n + 2, cd(0, 1e-3));
    CHECK(validate_chain(f.chain).ok());
    const auto rep = validate_chain(f.chain, &f.key);
    REQUIRE_FALSE(rep.ok());
    CHECK(*rep.first_invalid_index == 3);
  }
  SUBCASE("stored preliminary") {
    Fixture f(4);
    f.chain.tamper_preliminary(1, 0, cd(1e-6, 0));
    const auto rep = validate_chain(f.chain);
    REQUIRE_FALSE(rep.ok());
    CHECK(*rep.first_invalid_index == 1);
  }
  SUBCASE("wrong key") {
    Fixture f(3);
    const EncryptionKey other(2.0);
    CHECK_FALSE(validate_chain(f.chain, &other).ok());
  }
}

TEST_CASE("ledger dumps") {
  Fixture f(3);
  const std::string text = dump::write_ledger(f.chain, NodeId{4});
  const auto d = dump::parse_ledger(text);
  CHECK(d.node == 4u);
  CHECK(d.blocks.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(d.blocks[i].txs == f.contents[i]);
    CHECK(d.blocks[i].disclosed == f.chain.preliminaries()[i]);
    CHECK(d.blocks[i].encrypted == f.chain.blocks()[i].tail(f.params.m_max));
  }
  CHECK(dump::diff(d, d).identical());

  // No key material in the dump.
  CHECK(text.find("theta") == std::string::npos);
  char repr[64];
  std::snprintf(repr, sizeof repr, "%.17g", f.key.theta());
  CHECK(text.find(repr) == std::string::npos);
  std::snprintf(repr, sizeof repr, "%.10g", f.key.theta());
  CHECK(text.find(repr) == std::string::npos);

  Fixture g(3, 99);
  CHECK_FALSE(dump::diff(d, dump::parse_ledger(dump::write_ledger(g.chain))).identical());
  CHECK(error_of([&] { dump::parse_ledger(text.substr(0, text.size() / 2)); }) == Errc::MalformedDump);
  CHECK(error_of([] { dump::parse_ledger("{\"format\": \"other\"}"); }) == Errc::MalformedDump);
}
