#pragma once

#include "prethermal/renorm.hpp"

namespace prethermal {

/// G(t) = (ν/n)N + H(θ⃗_t), θ⃗_t = (ν, ω)t + θ⃗₀.
struct QuasiProblem {
  const ChargeOperator* charge = nullptr;
  ColoredPotential H; ///< two angles, lab frame
  double nu = 0.0;
  double omega = 1.0;
  int n = 2;
  double kappa0 = 1.0;
  double nu0 = 0.0; ///< ≤ 0: computed as max{2‖H‖_{κ₀}, ω}
};

/// Rotating-frame drive on the rescaled torus,
/// K(φ, θ₂) = e^{iφN} H(nφ, θ₂) e^{−iφN}, φ = θ₁/n, with flow (ν/n, ω).
/// It satisfies K(φ, θ₂) = g K(φ + 2π/n, θ₂) g† for g = e^{−i2πN/n}.
struct TwistedPotential {
  ModeFamily K;
  int n = 1;
  Matrix g; ///< e^{−i2πN/n}
  double twist_residual = 0.0;
};

TwistedPotential to_rotating_frame(const ModeFamily& H, const ChargeOperator& charge, int n, std::array<int, 2> sizes,
                                   double tol = 1e-10);

/// max over the grid of ‖K(φ, θ₂) − g K(φ + 2π/n, θ₂) g†‖; the θ₁ grid size must be a multiple of n.
double twist_residual(const ModeFamily& K, const Matrix& g, int n, std::array<int, 2> sizes);

/// (θ₁-average, remainder).
std::pair<ModeFamily, ModeFamily> symmetrize_theta1(const ModeFamily& K);

/// B_{p,q} = −(n/ν) V_{p,q}/p; throws if V has a θ₁-independent part.
ModeFamily build_B(const ModeFamily& V, double nu, int n, double tol = 1e-12);

struct QuasiDecomposition {
  EffectiveDecomposition rotating; ///< iteration on the rescaled torus
  int n = 1;
  Matrix N;
  Matrix g;           ///< e^{−i2πN/n}
  ModeFamily D_prime; ///< θ₂-only effective Hamiltonian
  /// Conjugated symmetrization (1/2πn)∫dθ₁ e^{±iθ₁N/n} H e^{∓iθ₁N/n} compared
  /// with the rotating-frame average ⟨H₀⟩: sign consistent with the rotating
  /// frame, and with the opposite sign.
  double conjugated_average_residual = 0.0;
  double flipped_average_residual = 0.0;
  double periodicity_residual = -1.0; ///< set by assemble_lab_frame

  /// e^{−iθ₁N/n}
  Matrix rotation(double theta1) const;
  /// e^{A(θ⃗)} = e^{−iθ₁N/n} F(θ₁/n, θ₂) e^{iθ₁N/n}
  Matrix lab_frame(const Angles& theta) const;
  /// e^{−iθ₁N/n} D′(θ₂) e^{iθ₁N/n}
  Matrix D_lab(const Angles& theta) const;
  Matrix V_lab(const Angles& theta) const;
  /// V with the rotation reinserted: D_lab − D′ + V_lab, so that the
  /// generator reads (ν/n)N + D′(θ₂) + V_reinserted.
  Matrix V_reinserted(const Angles& theta) const;
};

QuasiDecomposition run_quasi_renorm(const QuasiProblem& problem, const RenormOptions& opt = {});

/// Certifies e^{A(θ₁ + 2π, θ₂)} = e^{A(θ₁, θ₂)} on a grid; stores and returns the
/// residual, throwing NumericalError above `tol`.
double assemble_lab_frame(QuasiDecomposition& dec, int grid = 16, double tol = 1e-10);

} // namespace prethermal
