#include "prethermal/colored_potential.hpp"
#include "prethermal/operator_family.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <sstream>

using namespace prethermal;

namespace {
GraphPtr chain(int n) { return std::make_shared<SiteGraph>(SiteGraph::chain(n)); }

ColoredPotential random_potential(GraphPtr g, std::mt19937_64& rng, int terms, int max_mode) {
  ColoredPotential phi(g, 1);
  std::uniform_int_distribution<int> site(0, g->num_sites() - 1), len(1, 2), mode(0, max_mode);
  for (int t = 0; t < terms; ++t) {
    const int a = site(rng);
    const int b = std::min(a + len(rng) - 1, g->num_sites() - 1);
    std::vector<int> sites;
    for (int s = a; s <= b; ++s) sites.push_back(s);
    const Matrix m = testutil::random_matrix(1 << sites.size(), rng);
    const int k = mode(rng);
    const LocalOperator op(sites, m);
    phi.add(SiteGraph::mask_of(sites), {k, 0}, op);
    if (k == 0)
      phi.add(SiteGraph::mask_of(sites), {0, 0}, op.adjoint());
    else
      phi.add(SiteGraph::mask_of(sites), {-k, 0}, op.adjoint());
  }
  return phi;
}
} // namespace

TEST_CASE("kappa norm") {
  const auto g = chain(3);
  ColoredPotential empty(g, 1);
  CHECK(empty.kappa_norm(0.5) == 0.0);

  ColoredPotential one(g, 1);
  one.add(0b011, {1, 0}, LocalOperator({0, 1}, 0.5 * Matrix::Identity(4, 4)));
  CHECK(one.kappa_norm(0.25) == doctest::Approx(0.5 * std::exp(0.75)).epsilon(1e-12));
  CHECK(std::abs(one.kappa_norm(0.25) - 1.05850) < 1e-5);

  ColoredPotential two(g, 1);
  two.add(0b001, {0, 0}, LocalOperator({0}, 0.3 * pauli('X')));
  two.add(0b100, {0, 0}, LocalOperator({2}, 0.7 * pauli('Z')));
  CHECK(two.kappa_norm(0.5) == doctest::Approx(0.7 * std::exp(0.5)));

  CHECK_THROWS_AS(one.add(0b101, {0, 0}, LocalOperator({0}, pauli('X'))), ValidationError);
  CHECK_THROWS_AS(one.kappa_norm(0.0), ValidationError);
}

TEST_CASE("kappa norm properties") {
  std::mt19937_64 rng(12);
  const auto g = chain(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_potential(g, rng, 4, 3);
    const auto b = random_potential(g, rng, 4, 3);
    CHECK(a.kappa_norm(0.3) <= a.kappa_norm(0.7) + 1e-12);
    CHECK((a + b).kappa_norm(0.5) <= a.kappa_norm(0.5) + b.kappa_norm(0.5) + 1e-12);
    CHECK(a.is_hermitian());
  }
}

TEST_CASE("theta derivative") {
  const auto g = chain(2);
  ColoredPotential constant(g, 1);
  constant.add(0b01, {0, 0}, LocalOperator({0}, pauli('X')));
  CHECK(constant.theta_derivative(0).empty());

  ColoredPotential single(g, 1);
  single.add(0b01, {1, 0}, LocalOperator({0}, pauli('X')));
  const auto d = single.theta_derivative(0);
  CHECK(testutil::max_abs(d.terms().begin()->second.op.matrix() - Complex(0, 1) * pauli('X')) == 0.0);
  CHECK_THROWS_AS(single.theta_derivative(1), ValidationError);

  // Unit single-site single-mode term: LHS e^{0.5·2} = e, RHS e²/(0.5 e) = 2e.
  ColoredPotential unit(g, 1);
  unit.add(0b01, {1, 0}, LocalOperator({0}, pauli('Z')));
  const double lhs = unit.theta_derivative(0).kappa_norm(0.5);
  const double rhs = unit.kappa_norm(1.0) / (0.5 * std::exp(1.0));
  CHECK(lhs == doctest::Approx(std::exp(1.0)));
  CHECK(rhs == doctest::Approx(2.0 * std::exp(1.0)));
}

TEST_CASE("grid round trip and decomposition") {
  const auto g = chain(2);
  // Constant σx on site 1.
  const Matrix x1 = embed_operator(LocalOperator({1}, pauli('X')), *g);
  auto phi = decompose_modes(ModeFamily::constant(x1, 1), g);
  REQUIRE(phi.terms().size() == 1);
  CHECK(phi.terms().begin()->first.zone == 0b10);
  CHECK(phi.terms().begin()->first.fourier == Fourier{0, 0});
  CHECK(testutil::max_abs(phi.terms().begin()->second.op.matrix() - pauli('X')) < 1e-14);

  // σx cos θ → σx/2 at n = ±1.
  GridFamily grid(1, {8, 1}, 4);
  for (std::size_t i = 0; i < grid.count(); ++i) grid[i] = std::cos(grid.angle(i)[0]) * x1;
  phi = decompose_to_potential(grid, g);
  REQUIRE(phi.terms().size() == 2);
  for (const auto& [key, term] : phi.terms()) {
    CHECK(std::abs(key.fourier[0]) == 1);
    CHECK(testutil::max_abs(term.op.matrix() - 0.5 * pauli('X')) < 1e-14);
  }

  // Random 2-site, 3-mode family.
  std::mt19937_64 rng(21);
  ModeFamily fam(4, 1);
  for (int k = 0; k <= 3; ++k) {
    const Matrix m = testutil::random_matrix(4, rng);
    if (k == 0) {
      fam.add({0, 0}, m + m.adjoint());
    } else {
      fam.add({k, 0}, m);
      fam.add({-k, 0}, m.adjoint());
    }
  }
  const GridFamily samples = sample_grid(fam, {16, 1});
  phi = decompose_to_potential(samples, g, {}, 1.0, 1e-9);
  CHECK(phi.is_hermitian(1e-12));
  const GridFamily back = assemble_grid(phi, {16, 1});
  double err = 0.0;
  for (std::size_t i = 0; i < back.count(); ++i) err = std::max(err, testutil::max_abs(back[i] - samples[i]));
  CHECK(err < 1e-10);
  for (std::size_t i = 0; i < back.count(); ++i)
    CHECK(testutil::max_abs(phi.assemble(back.angle(i)) - fam.at(back.angle(i))) < 1e-12);

  CHECK_THROWS_AS(assemble_grid(phi, {6, 1}), ValidationError);
}

TEST_CASE("aliasing check") {
  const auto g = chain(1);
  ModeFamily fam(2, 1);
  fam.add({3, 0}, pauli('X'));
  fam.add({-3, 0}, pauli('X'));
  const GridFamily coarse = sample_grid(fam, {8, 1});
  CHECK_THROWS_AS(decompose_to_potential(coarse, g), NumericalError);
  CHECK_NOTHROW(decompose_to_potential(sample_grid(fam, {16, 1}), g));
}

TEST_CASE("disconnected strings go to the connecting interval") {
  const auto g = chain(3);
  const Matrix xz = embed_operator(pauli_string({0, 2}, "XZ"), *g);
  const auto phi = decompose_modes(ModeFamily::constant(xz, 1), g);
  REQUIRE(phi.terms().size() == 1);
  CHECK(phi.terms().begin()->first.zone == 0b111);
}

TEST_CASE("strong-support zones with the domain-wall charge") {
  const auto g = chain(4);
  const auto dw = charge_preset("domain-wall", g);
  const Matrix x1 = embed_operator(LocalOperator({1}, pauli('X')), *g);
  DecomposeOptions opt;
  opt.charge = &dw;
  const auto phi = decompose_modes(ModeFamily::constant(x1, 1), g, opt);
  REQUIRE(phi.terms().size() == 1);
  CHECK(phi.terms().begin()->first.zone == 0b0111);
}

TEST_CASE("two-angle grids") {
  const auto g = chain(1);
  ModeFamily fam(2, 2);
  fam.add({1, -2}, pauli('+'));
  fam.add({-1, 2}, pauli('-'));
  fam.add({0, 1}, 0.5 * pauli('Z'));
  fam.add({0, -1}, 0.5 * pauli('Z'));
  const GridFamily grid = sample_grid(fam, {8, 8});
  for (std::size_t i = 0; i < grid.count(); i += 7) CHECK(testutil::max_abs(grid[i] - fam.at(grid.angle(i))) < 1e-13);
  const ModeFamily back = grid_to_modes(grid);
  CHECK(testutil::max_abs(back.mode({1, -2}) - pauli('+')) < 1e-14);
  CHECK(testutil::max_abs(back.mode({0, 1}) - 0.5 * pauli('Z')) < 1e-14);
}

TEST_CASE("potential CSV dump") {
  const auto g = chain(2);
  ColoredPotential phi(g, 1);
  phi.add(0b11, {1, 0}, pauli_string({0, 1}, "XZ"));
  phi.add_constant({0, 0}, 2.0);
  std::ostringstream os;
  phi.write_csv(os);
  const std::string text = os.str();
  CHECK(text.rfind("zone,n1,n2,dim,entries\n", 0) == 0);
  CHECK(text.find("0 1,1,0,4,") != std::string::npos);
  CHECK(text.find(",0,0,1,2:0") != std::string::npos);
}
