#pragma once

#include "prethermal/charge.hpp"
#include "prethermal/colored_potential.hpp"
#include "prethermal/operator_family.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace prethermal {

enum class RenormMode { rigorous, adaptive };

RenormMode parse_mode(const std::string& s);
std::string to_string(RenormMode m);

/// Constants of the rigorous schedule for decay κ₀ and ratio ν/ν₀.
struct RenormConstants {
  double kappa0 = 1.0;
  double nu = 0.0;
  double nu0 = 0.0;
  double A = 0.0;
  double x_closed = 0.0; ///< closed-form root
  double x_root = 0.0;   ///< positive root of the quadratic P(x′)
  double x_lemma = 0.0;  ///< 1/(6πκ₀)
  double x = 0.0;        ///< min of the three
  double B = 0.0;        ///< √2/x
  double C_inv = 0.0;
  double C = 0.0;
  int n_star = 0;
  bool admissible = false; ///< ν > C ν₀
};

RenormConstants compute_constants(double kappa0, double nu, double nu0);

/// P(x′) = (72πκ₁/e)x′² + (108π + 2πκ₁/e)x′ − ½ with κ₁ = κ₀/2.
double quadratic_P(double x, double kappa0);

struct RenormSchedule {
  RenormMode mode = RenormMode::adaptive;
  RenormConstants constants;
  double adaptive_factor = 0.9;
  int max_steps = 12;

  /// κ_n: rigorous κ₀, then κ(n)² = κ₁² − 2B(ν₀/ν)(n − 1); adaptive κ₀·fⁿ.
  double kappa(int n) const;
  /// Steps the run will attempt at most (n_star in rigorous mode).
  int planned_steps() const;
};

RenormSchedule make_schedule(RenormMode mode, const RenormConstants& c, int max_steps = 12, double factor = 0.9);

/// γ(O) = e^{−A} O e^{A} and α(O) = ∫₀¹ e^{−sA} O e^{sA} ds, evaluated exactly
/// in the eigenbasis of the antihermitian A.
class FrameKernel {
public:
  explicit FrameKernel(const Matrix& a);
  Matrix gamma(const Matrix& o) const;
  Matrix alpha(const Matrix& o) const;
  Matrix exp(double s = 1.0) const;

private:
  Matrix u_;
  RealVector mu_; // A = U diag(−iμ) U†
};

struct RenormOptions {
  RenormMode mode = RenormMode::adaptive;
  int max_steps = 12;
  double adaptive_factor = 0.9;
  int grid = 64;        ///< initial grid per angle (θ₁ grid in the quasi engine is n·2^k)
  int max_grid = 1024;  ///< doubling cap for the aliasing check
  double eps_alias = 1e-9;
  double prune_rel = 1e-14;
  /// Keep D, V, A families in every trace record (large systems drop them;
  /// the final split and the generators are always kept).
  bool keep_step_families = true;
};

/// One level of the iteration. `A` is the generator used to leave this level
/// (empty on the final record).
struct RenormStep {
  int n = 0;
  double kappa = 0.0;
  double kappa_next = 0.0;
  ModeFamily D, V, A;
  ColoredPotential D_pot, V_pot;
  double norm_D = 0.0;
  double norm_V = 0.0;
  double norm_A = 0.0;
  double norm_W = 0.0; ///< ‖W_n‖ at κ_{n+1}; set once the step is taken
  bool hypothesis_ok = true;
  bool halving_ok = true;
  double diag_residual = 0.0;   ///< max_θ ‖[D, N]‖ / max_θ ‖D‖ (quasi: [D′, g])
  double offdiag_mean = 0.0;    ///< ‖⟨V⟩‖ summed over modes
  double anti_residual = 0.0;   ///< ‖A + A†‖ summed over modes
  int grid = 0;
  // Quasi-engine certificates.
  double twist_residual = 0.0;
  double d_theta1_variation = 0.0;
  double g_commutator_residual = 0.0;
};

/// Result of the iteration in its working frame.
struct EffectiveDecomposition {
  GraphPtr graph;
  int num_angles = 1;
  double nu = 0.0;    ///< large amplitude of the generator (ν, or ν/n in the quasi rotating frame)
  double omega = 0.0; ///< slow frequency
  double nu0 = 0.0;
  RenormSchedule schedule;
  std::vector<RenormStep> trace;
  std::vector<ModeFamily> generators; ///< A_0, A_1, … in application order
  ModeFamily H;                       ///< drive in the working frame
  ModeFamily D, V;                    ///< final split
  std::string stop_reason;
  double c_prime = 0.0;          ///< Σ‖D_{n+1} − D_n‖ / (ν₀/ν)
  double d_minus_average = 0.0;  ///< ‖D − ⟨H⟩‖ at the final κ

  int steps() const { return static_cast<int>(generators.size()); }
  /// e^{A_0(θ)} e^{A_1(θ)} ⋯
  Matrix frame(const Angles& theta) const;
  /// Principal logarithm of `frame(θ)` (antihermitian).
  Matrix frame_log(const Angles& theta) const;
  GridFamily frame_grid(std::array<int, 2> sizes) const;
  GridFamily frame_log_grid(std::array<int, 2> sizes) const;
};

/// G(t) = νN + H(ωt + θ₀).
struct FloquetProblem {
  const ChargeOperator* charge = nullptr;
  ColoredPotential H;
  double nu = 0.0;
  double omega = 1.0;
  double kappa0 = 1.0;
  double nu0 = 0.0; ///< ≤ 0: computed as max{2‖H‖_{κ₀}, ω}
};

/// ν₀ = max{2‖H‖_{κ₀}, max ω}.
double compute_nu0(const ColoredPotential& H, double kappa0, double omega_max);

/// Canonical potential for a drive: re-expanded in the basis strings with
/// strongly supported connected zones (if a charge is given).
ColoredPotential canonical_potential(const ColoredPotential& H, const ChargeOperator* charge);

/// (⟨Φ⟩, Φ − ⟨Φ⟩), termwise.
std::pair<ColoredPotential, ColoredPotential> symmetrize_u1(const ColoredPotential& phi, const ChargeOperator& charge);

/// Termwise A = −(1/ν) Σ_{m≠0} V^{(m)}/m; throws if V has an m = 0 part.
ColoredPotential build_A(const ColoredPotential& V, double nu, const ChargeOperator& charge, double tol = 1e-12);

/// Mode-level A for the grid engine.
ModeFamily build_A_modes(const ModeFamily& V, double nu, const ChargeBasis& basis);

/// W = γ(D + V) − α(V + iω ∂A) − D evaluated pointwise on the grid.
GridFamily frame_step_grid(const ModeFamily& D, const ModeFamily& V, const ModeFamily& A, double omega,
                           int slow_component, std::array<int, 2> sizes);

/// One renormalization step on mode families: returns (D_{n+1}, V_{n+1}).
std::pair<ModeFamily, ModeFamily> apply_frame_step(const ModeFamily& D, const ModeFamily& V, double omega, double nu,
                                                   const ChargeBasis& basis, std::array<int, 2> sizes);

EffectiveDecomposition run_floquet_renorm(const FloquetProblem& problem, const RenormOptions& opt = {});

/// CSV ledger: n,kappa_n,norm_D,norm_V,norm_A,hypothesis_ok,halving_ok[,twist_residual,d_theta1_variation,g_commutator_residual]
void write_ledger_csv(const EffectiveDecomposition& dec, std::ostream& os, bool quasi_columns = false);

} // namespace prethermal
