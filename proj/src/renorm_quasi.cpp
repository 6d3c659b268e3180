#include "prethermal/renorm_quasi.hpp"

#include "renorm_engine.hpp"

#include <cmath>
#include <sstream>

namespace prethermal {

TwistedPotential to_rotating_frame(const ModeFamily& H, const ChargeOperator& charge, int n, std::array<int, 2> sizes,
                                   double tol) {
  if (n < 1) throw ValidationError("twist order must be positive");
  if (H.num_angles() != 2) throw ValidationError("quasiperiodic drive must have two angles");
  if (!charge.integer_spacings()) throw ValidationError("charge lacks integer eigenvalue spacings");
  const ChargeBasis basis(charge);
  TwistedPotential out;
  out.n = n;
  out.K = ModeFamily(H.dim(), 2);
  for (const auto& [mode, x] : H.modes())
    for (const auto& [m, xm] : basis.components(x)) out.K.add({n * mode[0] + m, mode[1]}, xm);
  out.g = group_generator(charge, n).adjoint();
  if (sizes[0] % n != 0) throw ValidationError("theta1 grid size must be a multiple of n");
  for (int a = 0; a < 2; ++a)
    while (sizes[static_cast<std::size_t>(a)] < 2 * out.K.max_order(a) + 2) sizes[static_cast<std::size_t>(a)] *= 2;
  out.twist_residual = twist_residual(out.K, out.g, n, sizes);
  if (out.twist_residual > tol) {
    std::ostringstream msg;
    msg << "twisted time-translation residual " << out.twist_residual << " exceeds tolerance";
    throw NumericalError(msg.str());
  }
  return out;
}

double twist_residual(const ModeFamily& K, const Matrix& g, int n, std::array<int, 2> sizes) {
  if (sizes[0] % n != 0) throw ValidationError("theta1 grid size must be a multiple of n");
  const GridFamily kg = sample_grid(K, sizes);
  const int shift = sizes[0] / n;
  double worst = 0.0;
  for (int i = 0; i < sizes[0]; ++i)
    for (int j = 0; j < sizes[1]; ++j) {
      const Matrix& here = kg[static_cast<std::size_t>(i * sizes[1] + j)];
      const Matrix& there = kg[static_cast<std::size_t>(((i + shift) % sizes[0]) * sizes[1] + j)];
      worst = std::max(worst, (here - g * there * g.adjoint()).cwiseAbs().maxCoeff());
    }
  return worst;
}

std::pair<ModeFamily, ModeFamily> symmetrize_theta1(const ModeFamily& K) {
  ModeFamily d(K.dim(), K.num_angles()), v(K.dim(), K.num_angles());
  for (const auto& [n, m] : K.modes()) (n[0] == 0 ? d : v).add(n, m);
  return {d, v};
}

ModeFamily build_B(const ModeFamily& V, double nu, int n, double tol) {
  ModeFamily out(V.dim(), V.num_angles());
  for (const auto& [k, m] : V.modes()) {
    if (k[0] == 0) {
      if (m.norm() > tol) throw ValidationError("build_B: V has a theta1-independent part");
      continue;
    }
    out.add(k, Complex(-static_cast<double>(n) / (nu * k[0])) * m);
  }
  return out;
}

Matrix QuasiDecomposition::rotation(double theta1) const { return exp_hermitian(N, theta1 / n); }

Matrix QuasiDecomposition::lab_frame(const Angles& theta) const {
  const Matrix r = rotation(theta[0]);
  return r * rotating.frame({theta[0] / n, theta[1]}) * r.adjoint();
}

Matrix QuasiDecomposition::D_lab(const Angles& theta) const {
  const Matrix r = rotation(theta[0]);
  return r * D_prime.at({0.0, theta[1]}) * r.adjoint();
}

Matrix QuasiDecomposition::V_lab(const Angles& theta) const {
  const Matrix r = rotation(theta[0]);
  return r * rotating.V.at({theta[0] / n, theta[1]}) * r.adjoint();
}

Matrix QuasiDecomposition::V_reinserted(const Angles& theta) const {
  return D_lab(theta) - D_prime.at({0.0, theta[1]}) + V_lab(theta);
}

namespace {

// (1/2πn)∫₀^{2πn} dθ₁ e^{sign·iθ₁N/n} H(θ₁, θ₂) e^{−sign·iθ₁N/n} by the
// trapezoid rule (exact for trigonometric polynomials of low enough order).
Matrix conjugated_average(const ModeFamily& H, const Matrix& N, int n, int sign, double theta2, int points) {
  Matrix acc = Matrix::Zero(H.dim(), H.dim());
  for (int j = 0; j < points; ++j) {
    const double t1 = kTwoPi * n * j / points;
    const Matrix r = exp_hermitian(N, -sign * t1 / n);
    acc += r * H.at({t1, theta2}) * r.adjoint();
  }
  return acc / static_cast<double>(points);
}

} // namespace

QuasiDecomposition run_quasi_renorm(const QuasiProblem& problem, const RenormOptions& opt) {
  if (!problem.charge) throw ValidationError("quasiperiodic run needs a charge");
  if (!(problem.nu > 0.0)) throw ValidationError("nu must be positive");
  if (problem.H.num_angles() != 2) throw ValidationError("quasiperiodic drive must have two angles");
  const ChargeOperator& charge = *problem.charge;
  const GraphPtr graph = charge.graph();
  const int n = problem.n;
  const ColoredPotential h_lab = canonical_potential(problem.H, nullptr);
  const double nu0 = problem.nu0 > 0.0 ? problem.nu0 : compute_nu0(h_lab, problem.kappa0, problem.omega);
  const double big = problem.nu / n;
  const RenormConstants constants = compute_constants(problem.kappa0, big, nu0);
  if (opt.mode == RenormMode::rigorous && !constants.admissible)
    throw ValidationError("rigorous mode needs nu/n > C nu0 (C = " + std::to_string(constants.C) + ")");

  const ModeFamily h_modes = ModeFamily::from_potential(h_lab);
  // θ₁ grid n·2^k resolving the rotating-frame content, θ₂ grid independent.
  int g1 = n;
  while (g1 < opt.grid) g1 *= 2;
  std::array<int, 2> sizes{g1, opt.grid};
  const TwistedPotential twisted = to_rotating_frame(h_modes, charge, n, sizes);
  for (int a = 0; a < 2; ++a)
    while (sizes[static_cast<std::size_t>(a)] < 2 * twisted.K.max_order(a) + 2) sizes[static_cast<std::size_t>(a)] *= 2;
  const ColoredPotential k_pot = decompose_modes(twisted.K, graph);

  QuasiDecomposition out;
  out.n = n;
  out.N = charge.full_matrix();
  out.g = twisted.g;
  const Matrix g = twisted.g;

  detail::EngineConfig cfg;
  cfg.graph = graph;
  cfg.num_angles = 2;
  cfg.slow_component = 1;
  cfg.omega = problem.omega;
  cfg.big = big;
  cfg.nu0 = nu0;
  cfg.schedule = make_schedule(opt.mode, constants, opt.max_steps, opt.adaptive_factor);
  cfg.opt = opt;
  cfg.grid = sizes;
  cfg.split = [](const ModeFamily& f) { return symmetrize_theta1(f); };
  cfg.solve = [big](const ModeFamily& v) { return build_B(v, big, 1, 1e-9 * std::max(1.0, v.coefficient_sum())); };
  cfg.split_pot = [](const ColoredPotential& p) {
    ColoredPotential d(p.graph(), 2), v(p.graph(), 2);
    for (const auto& [key, term] : p.terms()) (key.fourier[0] == 0 ? d : v).add(key.zone, key.fourier, term.op);
    for (const auto& [k, c] : p.constants()) (k[0] == 0 ? d : v).add_constant(k, c);
    return std::make_pair(d, v);
  };
  cfg.solve_pot = [big](const ColoredPotential& v) {
    ColoredPotential b(v.graph(), 2);
    for (const auto& [key, term] : v.terms())
      if (key.fourier[0] != 0) b.add(key.zone, key.fourier, Complex(-1.0 / (big * key.fourier[0])) * term.op);
    return b;
  };
  cfg.certify = [g, n](RenormStep& step, std::array<int, 2> sz) {
    step.twist_residual = twist_residual(step.D + step.V, g, n, sz);
    const GridFamily dg = sample_grid(step.D, sz);
    double var = 0.0, comm = 0.0, scale = 0.0;
    for (int i = 0; i < sz[0]; ++i)
      for (int j = 0; j < sz[1]; ++j) {
        const Matrix& d = dg[static_cast<std::size_t>(i * sz[1] + j)];
        var = std::max(var, (d - dg[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff());
        comm = std::max(comm, (d * g - g * d).norm());
        scale = std::max(scale, d.norm());
      }
    step.d_theta1_variation = var;
    step.g_commutator_residual = comm;
    step.diag_residual = scale > 0.0 ? comm / scale : comm;
  };
  out.rotating = detail::run_engine(cfg, twisted.K, k_pot);
  out.D_prime = out.rotating.D;

  // Conjugated symmetrization vs the plain θ₁-average.
  const ModeFamily d0 = symmetrize_theta1(twisted.K).first;
  const int points = 2 * n * (2 * h_modes.max_order(0) + 2 * std::max(1, static_cast<int>(std::ceil(out.N.diagonal().real().cwiseAbs().maxCoeff()))) + 2);
  for (int j = 0; j < 8; ++j) {
    const double t2 = kTwoPi * j / 8;
    const Matrix ref = d0.at({0.0, t2});
    out.conjugated_average_residual =
        std::max(out.conjugated_average_residual, (conjugated_average(h_modes, out.N, n, +1, t2, points) - ref).cwiseAbs().maxCoeff());
    out.flipped_average_residual = std::max(
        out.flipped_average_residual, (conjugated_average(h_modes, out.N, n, -1, t2, points) - ref).cwiseAbs().maxCoeff());
  }
  return out;
}

double assemble_lab_frame(QuasiDecomposition& dec, int grid, double tol) {
  double worst = 0.0;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const Angles t{kTwoPi * i / grid, kTwoPi * j / grid};
      const Matrix a = dec.lab_frame(t);
      const Matrix b = dec.lab_frame({t[0] + kTwoPi, t[1]});
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
  dec.periodicity_residual = worst;
  if (worst > tol) {
    std::ostringstream msg;
    msg << "lab-frame periodicity residual " << worst << " exceeds tolerance";
    throw NumericalError(msg.str());
  }
  return worst;
}

} // namespace prethermal
