#include "prethermal/local_operator.hpp"
#include "prethermal/operator_basis.hpp"
#include "prethermal/site_graph.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace prethermal;

TEST_CASE("embedding matches Kronecker products") {
  const auto g2 = SiteGraph::chain(2);
  const Matrix x0 = embed_operator(LocalOperator({0}, pauli('X')), g2);
  CHECK(testutil::max_abs(x0 - kron(pauli('X'), pauli('I'))) == 0.0);

  const auto g3 = SiteGraph::chain(3);
  const Matrix zz = embed_operator(pauli_string({1, 2}, "ZZ"), g3);
  CHECK(testutil::max_abs(zz - kron(pauli('I'), kron(pauli('Z'), pauli('Z')))) == 0.0);

  const Matrix id = embed_operator(LocalOperator::identity({0, 2}), g3);
  CHECK(testutil::max_abs(id - Matrix::Identity(8, 8)) == 0.0);

  // Non-adjacent support: X on 0, Y on 2.
  const Matrix xy = embed_operator(pauli_string({0, 2}, "XY"), g3);
  CHECK(testutil::max_abs(xy - kron(pauli('X'), kron(pauli('I'), pauli('Y')))) < 1e-15);
}

TEST_CASE("embedding errors") {
  const auto g2 = SiteGraph::chain(2);
  CHECK_THROWS_AS(embed_operator(LocalOperator({3}, pauli('X')), g2), ValidationError);
  const auto big = SiteGraph::chain(13);
  CHECK_THROWS_AS(embed_operator(LocalOperator({0}, pauli('X')), big), DimensionCapError);
}

TEST_CASE("commutator") {
  const LocalOperator z({0}, pauli('Z')), y({0}, pauli('Y'));
  const auto c = commutator(z, y);
  CHECK(testutil::max_abs(c.matrix() - Complex(0, -2) * pauli('X')) < 1e-15);

  const auto disjoint = commutator(LocalOperator({0}, pauli('X')), LocalOperator({2}, pauli('Z')));
  CHECK(disjoint.support() == std::vector<int>{0, 2});
  CHECK(testutil::max_abs(disjoint.matrix()) == 0.0);

  std::mt19937_64 rng(7);
  const auto g = SiteGraph::chain(3);
  for (int trial = 0; trial < 20; ++trial) {
    LocalOperator a({0, 1}, testutil::random_matrix(4, rng));
    LocalOperator b({1, 2}, testutil::random_matrix(4, rng));
    const Matrix ea = embed_operator(a, g), eb = embed_operator(b, g);
    const Matrix expect = ea * eb - eb * ea;
    CHECK(testutil::max_abs(embed_operator(commutator(a, b), g) - expect) <= 1e-12 * expect.norm());
  }
}

TEST_CASE("operator norm") {
  CHECK(op_norm(LocalOperator({0}, pauli('X'))) == doctest::Approx(1.0));
  CHECK(op_norm(LocalOperator({0}, 3.0 * pauli('u'))) == doctest::Approx(3.0));
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix h = testutil::random_hermitian(4, rng);
    CHECK(std::abs(op_norm(LocalOperator({0, 1}, h)) - testutil::power_iteration_norm(h)) < 1e-10);
  }
  const Matrix big = testutil::random_matrix(64, rng);
  CHECK(std::abs(spectral_norm(big) - testutil::power_iteration_norm(big, 20000)) < 1e-8 * spectral_norm(big));
}

TEST_CASE("partial-trace reduction inverts extension") {
  std::mt19937_64 rng(11);
  LocalOperator a({1, 3}, testutil::random_matrix(4, rng));
  double residual = 1.0;
  const auto back = reduce_to(a.extended_to(0b11110), a.mask(), &residual);
  CHECK(residual < 1e-14);
  CHECK(testutil::max_abs(back.matrix() - a.matrix()) < 1e-14);
}

TEST_CASE("graph queries") {
  const auto g = SiteGraph::chain(5);
  CHECK(g.distance(0, 4) == 4);
  CHECK(g.is_connected(0b00111));
  CHECK_FALSE(g.is_connected(0b00101));
  CHECK(g.connected_superset(0b10001) == 0b11111);
  CHECK(g.connected_superset(0b00101) == 0b00111);
  CHECK(g.diameter(0b00110) == 1);
  CHECK_THROWS_AS(SiteGraph(3, {{0, 1}}, 1), ValidationError);
}

TEST_CASE("clock-and-shift basis round trip") {
  std::mt19937_64 rng(5);
  for (int d : {2, 3}) {
    const OperatorBasis basis(d);
    const int sites = 2;
    const Matrix m = testutil::random_matrix(d * d, rng);
    const auto coeffs = basis.forward(m, sites);
    CHECK(testutil::max_abs(basis.inverse(coeffs, sites) - m) < 1e-13);
  }
  // Z ⊗ I has a single coefficient: digit (a=0,b=1) = 1 on site 0.
  const OperatorBasis q(2);
  const auto c = q.forward(kron(pauli('Z'), pauli('I')), 2);
  CHECK(std::abs(c[1 * 4 + 0] - 1.0) < 1e-15);
  double rest = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (i != 4) rest += std::abs(c[i]);
  CHECK(rest < 1e-15);
}
