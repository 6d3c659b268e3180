#include "renorm_engine.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace prethermal {

GridFamily frame_step_grid(const ModeFamily& D, const ModeFamily& V, const ModeFamily& A, double omega,
                           int slow_component, std::array<int, 2> sizes) {
  const GridFamily dg = sample_grid(D, sizes);
  const GridFamily vg = sample_grid(V, sizes);
  const GridFamily ag = sample_grid(A, sizes);
  const GridFamily dag = sample_grid(A.derivative(slow_component), sizes);
  GridFamily w(D.num_angles(), sizes, D.dim());
  for (std::size_t i = 0; i < w.count(); ++i) {
    const FrameKernel k(ag[i]);
    // e^{−A}(νN + D + V − iω∂)e^{A} − νN − D, using [νN, A] = −V.
    w[i] = k.gamma(dg[i] + vg[i]) - k.alpha(vg[i] + Complex(0.0, omega) * dag[i]) - dg[i];
  }
  return w;
}

namespace detail {

void hermitize(ModeFamily& f) {
  ModeFamily out(f.dim(), f.num_angles());
  for (const auto& [n, m] : f.modes()) out.add(n, 0.5 * (m + f.mode(negate(n)).adjoint()));
  f = std::move(out);
}

namespace {

double mode_sum(const ModeFamily& f) { return f.coefficient_sum(); }

double anti_residual(const ModeFamily& a) {
  double r = 0.0;
  for (const auto& [n, m] : a.modes()) r += (m + a.mode(negate(n)).adjoint()).norm();
  return r;
}

ColoredPotential difference(const ColoredPotential& a, const ColoredPotential& b) {
  ColoredPotential out = a;
  out += Complex(-1.0) * b;
  return out;
}

} // namespace

EffectiveDecomposition run_engine(const EngineConfig& cfg, const ModeFamily& H, const ColoredPotential& H_pot) {
  const RenormSchedule& sched = cfg.schedule;
  const RenormOptions& opt = cfg.opt;
  EffectiveDecomposition dec;
  dec.graph = cfg.graph;
  dec.num_angles = cfg.num_angles;
  dec.nu = cfg.big;
  dec.omega = cfg.omega;
  dec.nu0 = cfg.nu0;
  dec.schedule = sched;
  dec.H = H;

  std::array<int, 2> sizes = cfg.grid;
  if (cfg.num_angles == 1) sizes[1] = 1;
  for (int a = 0; a < cfg.num_angles; ++a)
    while (sizes[static_cast<std::size_t>(a)] < 2 * H.max_order(a) + 2) sizes[static_cast<std::size_t>(a)] *= 2;

  const double floor = 1e-13 * cfg.nu0;
  DecomposeOptions dopt;
  dopt.charge = cfg.zone_charge;
  dopt.prune_rel = opt.prune_rel;
  dopt.scale = cfg.nu0;

  RenormStep cur;
  cur.n = 0;
  std::tie(cur.D, cur.V) = cfg.split(H);
  std::tie(cur.D_pot, cur.V_pot) = cfg.split_pot(H_pot);
  const ColoredPotential d0 = cur.D_pot;
  double d_change = 0.0;

  for (;;) {
    const int n = cur.n;
    cur.kappa = sched.kappa(n);
    cur.kappa_next = sched.kappa(n + 1);
    cur.grid = sizes[0];
    cur.norm_D = cur.D_pot.kappa_norm(cur.kappa);
    cur.norm_V = cur.V.empty() ? 0.0 : cur.V_pot.kappa_norm(cur.kappa);
    cur.offdiag_mean = mode_sum(cfg.split(cur.V).first);
    cfg.certify(cur, sizes);

    std::string stop;
    if (sched.mode == RenormMode::rigorous && n >= sched.planned_steps())
      stop = "n_star reached";
    else if (sched.mode == RenormMode::adaptive && n >= sched.max_steps)
      stop = "max_steps reached";
    else if (sched.mode == RenormMode::adaptive && cur.norm_V <= floor)
      stop = "residual below noise floor";
    if (!stop.empty()) {
      dec.stop_reason = stop;
      break;
    }

    ModeFamily a = cfg.solve(cur.V);
    const ColoredPotential a_pot = cfg.solve_pot(cur.V_pot);
    cur.norm_A = a_pot.kappa_norm(cur.kappa);
    cur.anti_residual = anti_residual(a);
    cur.hypothesis_ok = 6.0 * kPi * cur.norm_V / cfg.big < cur.kappa - cur.kappa_next;
    if (sched.mode == RenormMode::rigorous && !cur.hypothesis_ok) {
      dec.stop_reason = "hypothesis violated at step " + std::to_string(n);
      break;
    }

    GridFamily wg;
    ColoredPotential w_pot;
    for (;;) {
      wg = frame_step_grid(cur.D, cur.V, a, cfg.omega, cfg.slow_component, sizes);
      try {
        w_pot = decompose_to_potential(wg, cfg.graph, dopt, cur.kappa_next, opt.eps_alias, cfg.nu0);
        break;
      } catch (const NumericalError& e) {
        bool grown = false;
        for (int ax = 0; ax < cfg.num_angles; ++ax)
          if (sizes[static_cast<std::size_t>(ax)] * 2 <= opt.max_grid) {
            sizes[static_cast<std::size_t>(ax)] *= 2;
            grown = true;
          }
        if (!grown) {
          std::ostringstream msg;
          msg << "step " << n << ": " << e.what() << " at the grid cap " << opt.max_grid;
          throw NumericalError(msg.str());
        }
      }
    }
    ModeFamily w = grid_to_modes(wg);
    hermitize(w);
    w.prune(opt.prune_rel * cfg.nu0);
    cur.norm_W = w_pot.kappa_norm(cur.kappa_next);
    cur.halving_ok = cur.norm_W <= 0.5 * cur.norm_V + floor;

    auto [dw, vw] = cfg.split(w);
    auto [dw_pot, vw_pot] = cfg.split_pot(w_pot);
    const double next_v = vw.empty() ? 0.0 : vw_pot.kappa_norm(cur.kappa_next);
    if (sched.mode == RenormMode::adaptive && next_v >= cur.norm_V) {
      dec.stop_reason = "residual stopped shrinking";
      break;
    }

    RenormStep next;
    next.n = n + 1;
    next.D = cur.D + dw;
    next.V = std::move(vw);
    next.D_pot = cur.D_pot + dw_pot;
    next.V_pot = std::move(vw_pot);
    d_change += dw_pot.kappa_norm(cur.kappa_next);

    if (opt.keep_step_families) {
      cur.A = a;
    } else {
      cur.D = ModeFamily();
      cur.V = ModeFamily();
    }
    dec.generators.push_back(std::move(a));
    dec.trace.push_back(std::move(cur));
    cur = std::move(next);
  }
  cur.A = ModeFamily(H.dim(), cfg.num_angles);
  dec.D = cur.D;
  dec.V = cur.V;
  dec.c_prime = d_change / (cfg.nu0 / cfg.big);
  dec.d_minus_average = difference(cur.D_pot, d0).kappa_norm(cur.kappa);
  dec.trace.push_back(std::move(cur));
  return dec;
}

} // namespace detail
} // namespace prethermal
