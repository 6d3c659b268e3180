#include "prethermal/charge.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace prethermal;

namespace {
GraphPtr chain(int n) { return std::make_shared<SiteGraph>(SiteGraph::chain(n)); }
} // namespace

TEST_CASE("charge validation") {
  const auto number = charge_preset("number", chain(4));
  CHECK(number.range() == 1);
  CHECK(number.term_bound() == doctest::Approx(1.0));
  CHECK(number.spectrum_offset() == 0.0);
  CHECK(number.integer_spectrum());

  const auto dw = charge_preset("domain-wall", chain(4));
  CHECK(dw.range() == 2);
  CHECK(dw.term_bound() == doctest::Approx(1.0));
  CHECK(dw.terms().size() == 3);

  const auto ryd = charge_preset("rydberg-bond", chain(3));
  CHECK(ryd.range() == 2);

  try {
    validate_charge({LocalOperator({0}, pauli('X')), LocalOperator({0}, pauli('Z'))}, chain(1));
    FAIL("expected a commutation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("residual 2") != std::string::npos);
  }

  // Spectrum {−1/2, 1/2} is integer only after a shift.
  const auto half = validate_charge({LocalOperator({0}, 0.5 * pauli('Z'))}, chain(1));
  CHECK_FALSE(half.integer_spectrum());
  CHECK(half.integer_spacings());
  CHECK(std::abs(std::abs(half.spectrum_offset()) - 0.5) < 1e-12);

  CHECK_THROWS_AS(validate_charge({LocalOperator({0}, 0.3 * pauli('Z'))}, chain(1)), ValidationError);
}

TEST_CASE("ad_N decomposition") {
  const auto n1 = charge_preset("number", chain(1));
  auto dec = ad_charge_decompose(LocalOperator({0}, pauli('X')), n1);
  REQUIRE(dec.components.size() == 2);
  CHECK(testutil::max_abs(dec.components.at(1).matrix() - pauli('+')) < 1e-14);
  CHECK(testutil::max_abs(dec.components.at(-1).matrix() - pauli('-')) < 1e-14);

  dec = ad_charge_decompose(LocalOperator({0}, pauli('Z')), n1);
  REQUIRE(dec.components.size() == 1);
  CHECK(dec.components.count(0) == 1);

  // Random 2-site operator with the bond charge, projector-sandwich oracle.
  const auto graph = chain(2);
  const auto dw = charge_preset("domain-wall", graph);
  std::mt19937_64 rng(1);
  const Matrix h = testutil::random_hermitian(4, rng);
  dec = ad_charge_decompose(LocalOperator({0, 1}, h), dw);
  const Matrix n = dw.full_matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> es(n);
  Matrix sum = Matrix::Zero(4, 4);
  for (const auto& [m, op] : dec.components) {
    Matrix oracle = Matrix::Zero(4, 4);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (std::lround(es.eigenvalues()(a) - es.eigenvalues()(b)) == m)
          oracle += es.eigenvectors().col(a) * (es.eigenvectors().col(a).adjoint() * h * es.eigenvectors().col(b)) *
                    es.eigenvectors().col(b).adjoint();
    CHECK(testutil::max_abs(op.matrix() - oracle) < 1e-12);
    CHECK(testutil::max_abs(n * op.matrix() - op.matrix() * n - double(m) * op.matrix()) < 1e-10);
    CHECK(testutil::max_abs(op.matrix().adjoint() - dec.components.at(-m).matrix()) < 1e-12);
    sum += op.matrix();
  }
  CHECK(testutil::max_abs(sum - h) < 1e-12);
}

TEST_CASE("symmetrization equals the U(1) average") {
  const auto graph = chain(3);
  const auto dw = charge_preset("domain-wall", graph);
  const ChargeBasis basis(dw);
  std::mt19937_64 rng(2);
  const Matrix o = testutil::random_hermitian(8, rng);
  Matrix avg = Matrix::Zero(8, 8);
  const int points = 256;
  for (int k = 0; k < points; ++k) {
    const Matrix u = exp_hermitian(dw.full_matrix(), -kTwoPi * k / points);
    avg += u * o * u.adjoint();
  }
  avg /= points;
  const Matrix sym = basis.symmetrize(o);
  CHECK(testutil::max_abs(sym - avg) < 1e-10);
  CHECK(testutil::max_abs(basis.symmetrize(sym) - sym) < 1e-14);
  CHECK(testutil::max_abs(sym * dw.full_matrix() - dw.full_matrix() * sym) < 1e-12);
}

TEST_CASE("strong support") {
  const auto graph = chain(3);
  const auto number = charge_preset("number", graph);
  CHECK(validate_strong_support(LocalOperator({1}, pauli('Z')), number).valid);
  const auto cx = validate_strong_support(LocalOperator({1}, pauli('X')), number);
  CHECK(cx.valid);
  CHECK(cx.residuals.size() == 2);

  const auto dw = charge_preset("domain-wall", graph);
  const LocalOperator x1({1}, pauli('X'));
  const auto cert = validate_strong_support(x1, dw);
  CHECK_FALSE(cert.valid);
  for (auto [idx, r] : cert.residuals) {
    const Matrix ex = embed_operator(x1, *graph), en = embed_operator(dw.terms()[idx], *graph);
    CHECK(std::abs(r - spectral_norm(ex * en - en * ex)) < 1e-12);
    CHECK(r > 0.5);
  }
  CHECK(strong_support_zone(x1, dw, 1e-12) == 0b111);
  const auto widened = validate_strong_support(x1.extended_to(0b111), dw);
  CHECK(widened.valid);

  // Closure: [A, B] of strongly supported operators is strongly supported on the union.
  // With the domain-wall charge, an operator on an interval is strongly
  // supported iff it commutes with σz on the interval's end sites.
  std::mt19937_64 rng(4);
  const auto g5 = chain(5);
  const auto dw5 = charge_preset("domain-wall", g5);
  auto pinned = [&](std::vector<int> sites, std::vector<int> ends) {
    LocalOperator op(sites, testutil::random_hermitian(1 << sites.size(), rng));
    for (int e : ends) {
      const LocalOperator z = LocalOperator({e}, pauli('Z')).extended_to(op.mask());
      op = LocalOperator(sites, 0.5 * (op.matrix() + z.matrix() * op.matrix() * z.matrix()));
    }
    return op;
  };
  const auto sa = pinned({0, 1, 2}, {2});
  const auto sb = pinned({2, 3}, {2, 3});
  CHECK(validate_strong_support(sa, dw5).valid);
  CHECK(validate_strong_support(sb, dw5).valid);
  CHECK(validate_strong_support(commutator(sa, sb), dw5, 1e-11).valid);
}

TEST_CASE("group generator") {
  const auto n1 = charge_preset("number", chain(1));
  const Matrix g1 = group_generator(n1, 1);
  CHECK(testutil::max_abs(g1 - Matrix::Identity(2, 2)) < 1e-12);

  const Matrix g2 = group_generator(n1, 2);
  // N = diag(1, 0) for (1+σz)/2: g = diag(−1, 1) = −diag(1, −1).
  CHECK(std::abs(g2(0, 0) + 1.0) < 1e-12);
  CHECK(std::abs(g2(1, 1) - 1.0) < 1e-12);

  Matrix n3 = Matrix::Zero(3, 3);
  n3.diagonal() << 0, 1, 2;
  const auto qutrit = std::make_shared<SiteGraph>(SiteGraph::chain(1, 3));
  const auto c3 = validate_charge({LocalOperator({0}, n3, 3)}, qutrit);
  const Matrix g3 = group_generator(c3, 3);
  const Complex w = std::polar(1.0, kTwoPi / 3);
  CHECK(std::abs(g3(1, 1) - w) < 1e-12);
  CHECK(std::abs(g3(2, 2) - w * w) < 1e-12);
}

TEST_CASE("dressed charge") {
  const auto graph = chain(2);
  const auto number = charge_preset("number", graph);
  CHECK(testutil::max_abs(dress_charge(number, Matrix::Zero(4, 4)) - number.full_matrix()) < 1e-15);

  std::mt19937_64 rng(9);
  Matrix a = Complex(0, 1) * testutil::random_hermitian(4, rng);
  a *= 0.01 / spectral_norm(a);
  const Matrix nt = dress_charge(number, a);
  const Matrix& n = number.full_matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> e1(n), e2(nt);
  CHECK((e1.eigenvalues() - e2.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
  // Series oracle: N + [A, N] + ½[A, [A, N]] + O(‖A‖³).
  const Matrix c1 = a * n - n * a;
  const Matrix c2 = a * c1 - c1 * a;
  CHECK(spectral_norm(nt - n - c1 - 0.5 * c2) < 8.0 * std::pow(0.01, 3) * spectral_norm(n));
  CHECK(spectral_norm(nt - n) <= 2 * 0.01 * spectral_norm(n) + 1e-4);
  CHECK_THROWS_AS(dress_charge(number, Matrix::Identity(4, 4)), ValidationError);
}
