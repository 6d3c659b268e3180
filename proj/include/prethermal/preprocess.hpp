#pragma once

#include "prethermal/dynamics.hpp"

#include <string>
#include <vector>

namespace prethermal {

/// Removal of a time-dependent amplitude ν(t) = ν̄(1 + f(t)).
/// reparameterize: t′ = t + ∫₀^t f, generator ν̄N + H(ωt(t′))/(1 + f(t(t′))).
/// rotating_frame: U = U₀U′ with U₀(t) = e^{−iν̄∫₀^t f·N}, generator
/// ν̄N + U₀†H U₀.
enum class PreprocessStrategy { reparameterize, rotating_frame };

PreprocessStrategy parse_strategy(const std::string& name);
std::string to_string(PreprocessStrategy s);

struct PreprocessResult {
  DriveSpec original;
  DriveSpec spec; ///< constant-amplitude equivalent
  PreprocessStrategy strategy = PreprocessStrategy::reparameterize;
  int fft_size = 0; ///< grid used for the Fourier expansion (0 if unchanged)

  /// Time at which the transformed propagator is evaluated: t′(t) or t.
  double transformed_time(double t) const;
  /// U(t) of the original drive from U′ of the transformed one.
  Matrix undo(const Matrix& u_transformed, double t) const;
  /// Original-drive propagator computed through the transformed spec.
  std::vector<Matrix> propagate_original(const std::vector<double>& times, double dt = 0.0) const;
};

/// Equivalent constant-amplitude drive. Coefficients of the periodic factors
/// are kept until they fall below `tol` relative to the largest one.
/// Throws ValidationError for |f| ≥ 1 or a nonzero average of f.
PreprocessResult preprocess_drive(const DriveSpec& spec, PreprocessStrategy strategy, double tol = 1e-14);

struct PreprocessCertificate {
  std::vector<double> times;
  std::vector<double> deviations; ///< ‖U_original(t) − U_via_transformed(t)‖
  double period_shift = 0.0;      ///< |t(t′ + T) − t(t′) − T| (reparameterization)
  double max_deviation() const;
};

PreprocessCertificate certify_preprocess(const PreprocessResult& r, const std::vector<double>& times, double dt = 0.0);

} // namespace prethermal
