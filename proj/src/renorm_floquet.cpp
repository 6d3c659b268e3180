#include "prethermal/renorm.hpp"

#include "renorm_engine.hpp"

#include <cmath>

namespace prethermal {

std::pair<ColoredPotential, ColoredPotential> symmetrize_u1(const ColoredPotential& phi, const ChargeOperator& charge) {
  // Each term is split on one zone: when its zero mode leaks past the zone
  // (charge terms crossing the boundary), both parts move to the enlarged
  // zone, so every term of the remainder is itself off-diagonal.
  ColoredPotential diag(phi.graph(), phi.num_angles()), off(phi.graph(), phi.num_angles());
  double scale = 0.0;
  for (const auto& [key, term] : phi.terms()) scale = std::max(scale, term.norm);
  for (const auto& [key, term] : phi.terms()) {
    const auto dec = ad_charge_decompose(term.op, charge, 0.0);
    const auto it = dec.components.find(0);
    if (it == dec.components.end()) {
      off.add(key.zone, key.fourier, term.op);
      continue;
    }
    SiteMask zone = key.zone;
    double residual = 0.0;
    LocalOperator zero = reduce_to(it->second, it->second.mask() & zone, &residual);
    if (residual > 1e-13 * std::max(1.0, term.norm)) {
      zero = it->second;
      zone = phi.graph()->connected_superset(zone | zero.mask());
    }
    const LocalOperator rest = term.op - zero;
    diag.add(zone, key.fourier, zero);
    // Drop exact cancellations so a diagonal input yields an empty remainder.
    if (op_norm(rest) > 1e-14 * scale) off.add(zone, key.fourier, rest);
  }
  for (const auto& [n, c] : phi.constants()) diag.add_constant(n, c);
  return {std::move(diag), std::move(off)};
}

ColoredPotential build_A(const ColoredPotential& V, double nu, const ChargeOperator& charge, double tol) {
  ColoredPotential out(V.graph(), V.num_angles());
  for (const auto& [key, term] : V.terms()) {
    const auto dec = ad_charge_decompose(term.op, charge, 0.0);
    LocalOperator acc;
    bool have = false;
    for (const auto& [m, comp] : dec.components) {
      if (m == 0) {
        if (op_norm(comp) > tol * std::max(1.0, term.norm))
          throw ValidationError("build_A: V has a charge-diagonal component");
        continue;
      }
      const LocalOperator piece = Complex(-1.0 / (nu * m)) * comp;
      if (have)
        acc += piece;
      else
        acc = piece;
      have = true;
    }
    if (!have) continue;
    double residual = 0.0;
    SiteMask zone = key.zone;
    LocalOperator reduced = reduce_to(acc, acc.mask() & zone, &residual);
    if (residual > 1e-13 * std::max(1.0, term.norm / nu)) {
      reduced = acc;
      zone = V.graph()->connected_superset(zone | acc.mask());
    }
    out.add(zone, key.fourier, reduced);
  }
  for (const auto& [n, c] : V.constants())
    if (std::abs(c) > tol) throw ValidationError("build_A: V has a scalar part");
  return out;
}

ModeFamily build_A_modes(const ModeFamily& V, double nu, const ChargeBasis& basis) {
  ModeFamily out(V.dim(), V.num_angles());
  for (const auto& [n, m] : V.modes())
    out.add(n, basis.filter(m, [nu](int q) { return q == 0 ? Complex{} : Complex(-1.0 / (nu * q)); }));
  return out;
}

std::pair<ModeFamily, ModeFamily> apply_frame_step(const ModeFamily& D, const ModeFamily& V, double omega, double nu,
                                                   const ChargeBasis& basis, std::array<int, 2> sizes) {
  const ModeFamily a = build_A_modes(V, nu, basis);
  ModeFamily w = grid_to_modes(frame_step_grid(D, V, a, omega, 0, sizes));
  detail::hermitize(w);
  ModeFamily dw(w.dim(), w.num_angles()), vw(w.dim(), w.num_angles());
  for (const auto& [n, m] : w.modes()) {
    const Matrix s = basis.symmetrize(m);
    dw.add(n, s);
    vw.add(n, m - s);
  }
  return {D + dw, vw};
}

EffectiveDecomposition run_floquet_renorm(const FloquetProblem& problem, const RenormOptions& opt) {
  if (!problem.charge) throw ValidationError("Floquet run needs a charge");
  if (!(problem.nu > 0.0)) throw ValidationError("nu must be positive");
  if (problem.H.num_angles() != 1) throw ValidationError("Floquet drive must have one angle");
  const ChargeOperator& charge = *problem.charge;
  const GraphPtr graph = charge.graph();
  const ColoredPotential h_pot = canonical_potential(problem.H, &charge);
  const double nu0 = problem.nu0 > 0.0 ? problem.nu0 : compute_nu0(h_pot, problem.kappa0, problem.omega);
  const RenormConstants constants = compute_constants(problem.kappa0, problem.nu, nu0);
  if (opt.mode == RenormMode::rigorous && !constants.admissible)
    throw ValidationError("rigorous mode needs nu > C nu0 (C = " + std::to_string(constants.C) + ")");

  const auto basis = std::make_shared<ChargeBasis>(charge);
  const Matrix& n_full = charge.full_matrix();
  detail::EngineConfig cfg;
  cfg.graph = graph;
  cfg.zone_charge = &charge;
  cfg.num_angles = 1;
  cfg.slow_component = 0;
  cfg.omega = problem.omega;
  cfg.big = problem.nu;
  cfg.nu0 = nu0;
  cfg.schedule = make_schedule(opt.mode, constants, opt.max_steps, opt.adaptive_factor);
  cfg.opt = opt;
  cfg.grid = {opt.grid, 1};
  cfg.split = [basis](const ModeFamily& f) {
    ModeFamily d(f.dim(), f.num_angles()), v(f.dim(), f.num_angles());
    for (const auto& [n, m] : f.modes()) {
      const Matrix s = basis->symmetrize(m);
      if (s.norm() > 0.0) d.add(n, s);
      const Matrix r = m - s;
      if (r.norm() > 0.0) v.add(n, r);
    }
    return std::make_pair(d, v);
  };
  const double nu = problem.nu;
  cfg.solve = [basis, nu](const ModeFamily& v) { return build_A_modes(v, nu, *basis); };
  cfg.split_pot = [&charge](const ColoredPotential& p) { return symmetrize_u1(p, charge); };
  cfg.solve_pot = [&charge, nu](const ColoredPotential& v) { return build_A(v, nu, charge, 1e-9); };
  cfg.certify = [&n_full](RenormStep& step, std::array<int, 2> sizes) {
    const GridFamily dg = sample_grid(step.D, sizes);
    double comm = 0.0, scale = 0.0;
    const double root = std::sqrt(static_cast<double>(n_full.rows()));
    for (const auto& d : dg.samples()) {
      comm = std::max(comm, (d * n_full - n_full * d).norm());
      scale = std::max(scale, d.norm() / root);
    }
    step.diag_residual = scale > 0.0 ? comm / scale : comm;
  };
  return detail::run_engine(cfg, ModeFamily::from_potential(h_pot), h_pot);
}

} // namespace prethermal
