#include "prethermal/dynamics.hpp"

#include <initializer_list>
#include <limits>
#include <random>
#include <sstream>

namespace prethermal {

bool LemmaReport::ok() const {
  for (const auto& l : lemmas)
    if (l.violations > 0) return false;
  return true;
}

namespace {

constexpr int kSites = 4;

Matrix gaussian_matrix(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix m(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r = 0; r < dim; ++r) m(r, c) = Complex(g(rng), g(rng));
  return m;
}

// Random potential: terms on intervals of one or two sites, Fourier orders up
// to `max_order`. `sign` = +1 gives a Hermitian family, −1 an antihermitian one,
// 0 no constraint.
ColoredPotential random_potential(const GraphPtr& graph, std::mt19937_64& rng, int max_order, int sign) {
  std::uniform_int_distribution<int> count(2, 5), start(0, kSites - 1), width(1, 2), order(-max_order, max_order);
  std::uniform_real_distribution<double> scale(0.05, 1.0);
  ColoredPotential p(graph, 1);
  const int terms = count(rng);
  for (int t = 0; t < terms; ++t) {
    const int s = start(rng);
    const int w = std::min(width(rng), kSites - s);
    std::vector<int> sites;
    for (int i = 0; i < w; ++i) sites.push_back(s + i);
    const Matrix m = scale(rng) * gaussian_matrix(Eigen::Index{1} << w, rng);
    const int n = order(rng);
    const SiteMask zone = SiteGraph::mask_of(sites);
    if (sign == 0) {
      p.add(zone, {n, 0}, LocalOperator(sites, m));
    } else if (n == 0) {
      p.add(zone, {0, 0}, LocalOperator(sites, 0.5 * (m + sign * Matrix(m.adjoint()))));
    } else {
      p.add(zone, {n, 0}, LocalOperator(sites, m));
      p.add(zone, {-n, 0}, LocalOperator(sites, Matrix(sign * m.adjoint())));
    }
  }
  return p;
}

// e^{Q(θ)} Z(θ) e^{−Q(θ)} − Z(θ) as a colored potential, with grid growth until
// the aliasing check at κ′ passes.
ColoredPotential conjugation_difference(const ColoredPotential& Q, const ColoredPotential& Z, double kappa_p) {
  const ModeFamily q = ModeFamily::from_potential(Q);
  const ModeFamily z = ModeFamily::from_potential(Z);
  // Roundoff is amplified by e^{κ′|m|} at high modes. The difference cancels
  // against Z, so its noise floor is ε‖Z‖ rather than ε‖W‖: coefficients below
  // 1e-13·max‖Z(θ)‖ are pruned, and the first grid whose κ′-norm is stable to
  // 1e-7 relative is used.
  DecomposeOptions opt;
  opt.prune_rel = 1e-13;
  for (int size = 16;; size *= 2) {
    GridFamily qg = sample_grid(q, {size, 1});
    const GridFamily zg = sample_grid(z, {size, 1});
    GridFamily w(1, {size, 1}, z.dim());
    opt.scale = 0.0;
    for (std::size_t i = 0; i < zg.count(); ++i) opt.scale = std::max(opt.scale, zg[i].norm());
    for (std::size_t i = 0; i < w.count(); ++i) {
      const Matrix e = exp_antihermitian(qg[i]);
      w[i] = e * zg[i] * e.adjoint() - zg[i];
    }
    try {
      return decompose_to_potential(w, Z.graph(), opt, kappa_p, 1e-7, 0.0);
    } catch (const NumericalError&) {
      if (size >= 128) throw;
    }
  }
}

} // namespace

LemmaReport verify_lemma_bounds(int samples, unsigned long long seed) {
  if (samples < 0) throw ValidationError("sample count must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const auto graph = std::make_shared<const SiteGraph>(SiteGraph::chain(kSites));
  LemmaReport report;
  report.lemmas = {{"conjugation", 0, 0, 0.0, {}}, {"derivative", 0, 0, 0.0, {}}, {"commutator", 0, 0, 0.0, {}}};

  // Ratio LHS/RHS of each inequality; an instance violates if any ratio exceeds 1.
  auto record = [](LemmaResult& r, int idx, std::initializer_list<std::pair<double, double>> checks) {
    ++r.instances;
    bool bad = false;
    std::ostringstream msg;
    for (const auto& [lhs, rhs] : checks) {
      const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      r.max_ratio = std::max(r.max_ratio, ratio);
      if (lhs > rhs * (1.0 + 1e-12) + 1e-14) {
        bad = true;
        msg << " lhs " << lhs << " > rhs " << rhs << ";";
      }
    }
    if (bad) {
      ++r.violations;
      if (r.counterexample.empty()) r.counterexample = "instance " + std::to_string(idx) + ":" + msg.str();
    }
  };

  for (int s = 0; s < samples; ++s) {
    // ‖e^Q Z e^{−Q} − Z‖_{κ′} ≤ 18/((κ−κ′)κ′)·‖Q‖_κ‖Z‖_κ when 3‖Q‖_κ ≤ κ − κ′,
    // together with the companion bound on ‖e^Q Z e^{−Q}‖_{κ′}.
    {
      const double kappa = 0.5 + uni(rng);
      const double kappa_p = kappa * (0.2 + 0.6 * uni(rng));
      ColoredPotential Q = random_potential(graph, rng, 2, -1);
      const ColoredPotential Z = random_potential(graph, rng, 2, +1);
      const double target = (kappa - kappa_p) / 3.0 * (0.05 + 0.95 * uni(rng));
      Q *= Complex(target / Q.kappa_norm(kappa));
      const ColoredPotential diff = conjugation_difference(Q, Z, kappa_p);
      const double factor = 18.0 / ((kappa - kappa_p) * kappa_p) * Q.kappa_norm(kappa);
      const double lhs = diff.kappa_norm(kappa_p);
      const double rhs = factor * Z.kappa_norm(kappa);
      ColoredPotential full = diff;
      full += Z;
      const double lhs2 = full.kappa_norm(kappa_p);
      const double rhs2 = (1.0 + factor) * Z.kappa_norm(kappa);
      record(report.lemmas[0], s, {{lhs, rhs}, {lhs2, rhs2}});
    }
    // ‖∂θ O‖_{κ′} ≤ ‖O‖_κ / (e(κ − κ′)).
    {
      const double kappa = 0.2 + 1.5 * uni(rng);
      const double kappa_p = kappa * (0.05 + 0.9 * uni(rng));
      const ColoredPotential O = random_potential(graph, rng, 5, 0);
      const double lhs = O.theta_derivative(0).kappa_norm(kappa_p);
      const double rhs = O.kappa_norm(kappa) / (std::exp(1.0) * (kappa - kappa_p));
      record(report.lemmas[1], s, {{lhs, rhs}});
    }
    // ‖[O, H(θ)]‖ ≤ 2|S|‖O‖‖H‖_κ for O supported in S.
    {
      const double kappa = uni(rng);
      const ColoredPotential H = random_potential(graph, rng, 3, +1);
      std::uniform_int_distribution<int> start(0, kSites - 1), width(1, 3);
      const int st = start(rng);
      const int w = std::min(width(rng), kSites - st);
      std::vector<int> sites;
      for (int i = 0; i < w; ++i) sites.push_back(st + i);
      const Matrix om = gaussian_matrix(Eigen::Index{1} << w, rng);
      const Matrix O = embed_operator(LocalOperator(sites, om), *graph);
      const Matrix h = H.assemble({kTwoPi * uni(rng), 0.0});
      const double lhs = spectral_norm(O * h - h * O);
      const double rhs = 2.0 * w * spectral_norm(om) * H.kappa_norm(kappa);
      record(report.lemmas[2], s, {{lhs, rhs}});
    }
  }
  return report;
}

} // namespace prethermal
