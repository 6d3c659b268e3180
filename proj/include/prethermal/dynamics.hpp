#pragma once

#include "prethermal/renorm.hpp"
#include "prethermal/renorm_quasi.hpp"

#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace prethermal {

/// ν(t) = ν̄(1 + f(t)) with f(t) = mean + a·cos(Ω t + φ). Admissible profiles
/// have zero mean; a nonzero mean is representable so it can be rejected.
struct AmplitudeProfile {
  double mean = 0.0;
  double a = 0.0;
  double omega = 1.0;
  double phase = 0.0;

  bool constant() const { return a == 0.0 && mean == 0.0; }
  double f(double t) const;
  /// ∫₀^t f(s) ds.
  double integral(double t) const;
  /// |f| < 1 everywhere.
  void validate() const;
};

/// G(t) = amplitude(t)·N + H(θ⃗_t).
/// Floquet (one angle): amplitude ν(1 + f(t)), θ_t = ωt + θ₀.
/// Quasiperiodic (two angles): amplitude ν/n, θ⃗_t = (ν, ω)t + θ⃗₀.
struct DriveSpec {
  std::shared_ptr<const ChargeOperator> charge;
  ColoredPotential H;
  double nu = 0.0;
  int n = 1;
  double omega = 1.0;
  Angles theta0{0.0, 0.0};
  double kappa0 = 1.0;
  double nu0 = 0.0; ///< set by `finalize_drive`
  AmplitudeProfile profile;

  bool quasi() const { return H.num_angles() == 2; }
  double amplitude(double t) const;
  Angles angles(double t) const;
  /// 2π/ω (Floquet only).
  double period() const;
};

/// Validates the spec and stores ν₀ = max{2‖H‖_{κ₀}, ω}.
void finalize_drive(DriveSpec& spec);

FloquetProblem floquet_problem(const DriveSpec& spec);
QuasiProblem quasi_problem(const DriveSpec& spec);

using Generator = std::function<Matrix(double)>;

/// Full-space G(t) of a drive.
Generator drive_generator(const DriveSpec& spec);

/// dt ≤ 0.1 / max(amplitude, Σ‖H_n⃗‖, frequencies).
double default_dt(const DriveSpec& spec);

/// U(t_j) for i∂_t U = G(t)U, U(t0) = I, with the fourth-order commutator-free
/// Throws NumericalError if ‖U†U − I‖ exceeds 1e-9 per unit time plus 1e-14 per step.
/// Throws NumericalError if ‖U†U − I‖ exceeds 1e-9 per unit time.
std::vector<Matrix> propagate_generator(const Generator& g, Eigen::Index dim, const std::vector<double>& times,
                                        double dt, double t0 = 0.0);

/// One-period propagator of a periodic generator and its powers
/// U(kT) = U(T)^k through the Schur form of U(T). Optional offsets τ_j inside
/// the period give U(kT + τ_j) = U(τ_j)U(T)^k as well.
class FloquetOperator {
public:
  FloquetOperator(const Generator& g, Eigen::Index dim, double period, double dt,
                  std::vector<double> offsets = {});
  explicit FloquetOperator(const Matrix& one_period, double period);

  double period() const { return period_; }
  const Matrix& one_period() const { return u_; }
  const std::vector<double>& offsets() const { return offsets_; }
  Matrix power(long long k) const;
  /// U(t) for t = kT or kT + τ_j; throws ValidationError for other times.
  Matrix at(double t) const;
  /// Quasienergies ε ∈ (−π/T, π/T] with U(T) = Σ e^{−iεT}|v⟩⟨v|.
  RealVector quasienergies() const;

private:
  void factor();

  double period_ = 0.0;
  Matrix u_;
  std::vector<double> offsets_;
  std::vector<Matrix> partial_;
  Matrix q_;
  RealVector phases_;
};

/// Propagation of a T-periodic generator at arbitrary times via
/// U(kT + τ) = U(τ)U(T)^k; only one period is integrated.
std::vector<Matrix> propagate_periodic(const Generator& g, Eigen::Index dim, double period,
                                       const std::vector<double>& times, double dt);

std::vector<Matrix> propagate(const DriveSpec& spec, const std::vector<double>& times, double dt = 0.0);

/// Right-hand side of the decomposition identity:
/// F(θ_t) T exp(−i∫ νN + D + V) F(θ₀)†; `drop_V` removes V from the generator.
std::vector<Matrix> reconstruct_propagator(const DriveSpec& spec, const EffectiveDecomposition& dec,
                                           const std::vector<double>& times, double dt = 0.0, bool drop_V = false);
/// Quasiperiodic version with the lab-frame e^{A(θ⃗)} and generator (ν/n)N + D_lab + V_lab.
std::vector<Matrix> reconstruct_propagator(const DriveSpec& spec, const QuasiDecomposition& dec,
                                           const std::vector<double>& times, double dt = 0.0, bool drop_V = false);

struct ObservableSeries {
  std::vector<double> times;
  std::vector<double> values;
  std::string observable;
  std::map<std::string, std::string> metadata;

  /// Throws ValidationError unless sizes match and times strictly increase.
  void validate() const;
  /// Rows `t,value,observable,run_id`; `header` prepends the column names.
  void write_csv(std::ostream& os, const std::string& run_id, bool header = true) const;
};

/// Dressed charge Ñ(θ) = F(θ) N F(θ)† of a Floquet decomposition.
Matrix dressed_charge(const ChargeOperator& charge, const EffectiveDecomposition& dec, const Angles& theta);

/// (1/|Λ|)‖Ñ − U(kT)†ÑU(kT)‖ at stroboscopic times t = kT (bare N when `dressed`
/// is false or `dec` is null).
ObservableSeries measure_charge_conservation(const DriveSpec& spec, const EffectiveDecomposition* dec,
                                             const std::vector<long long>& periods, bool dressed, double dt = 0.0);
/// Same measurement from a precomputed one-period operator.
ObservableSeries measure_charge_conservation(const DriveSpec& spec, const FloquetOperator& floquet,
                                             const EffectiveDecomposition* dec, const std::vector<long long>& periods,
                                             bool dressed);
/// Arbitrary times: (1/|Λ|)‖Ñ(θ₀) − U(t)†Ñ(θ_t)U(t)‖.
ObservableSeries measure_charge_conservation_at(const DriveSpec& spec, const EffectiveDecomposition* dec,
                                                const std::vector<double>& times, bool dressed, double dt = 0.0);

/// Arbitrary-time measurement from a precomputed operator (times kT + τ_j).
ObservableSeries measure_charge_conservation_at(const DriveSpec& spec, const FloquetOperator& floquet,
                                                const EffectiveDecomposition* dec, const std::vector<double>& times,
                                                bool dressed);

/// Log-spaced sampling for lifetimes: `sub_octaves` octaves below one period
/// (offsets T·2^{−j/per_octave}) followed by stroboscopic times kT with k
/// log-spaced up to `horizon_periods`.
struct LogSampling {
  std::vector<double> offsets; ///< intra-period offsets, increasing
  std::vector<double> times;   ///< all sample times, increasing, starting at 0
};
LogSampling log_sampling(double period, double horizon_periods, int per_octave, int sub_octaves);

/// ⟨ψ₀|U(kT)† N U(kT)|ψ₀⟩.
ObservableSeries charge_expectation(const DriveSpec& spec, const FloquetOperator& floquet, const Vector& psi0,
                                    const std::vector<long long>& periods);

/// Rigorous bound 2 t ν₀ n₀ d^R 2^{−n*} with d the spatial dimension.
double conservation_bound(const DriveSpec& spec, int n_star, double t);

struct TruncationSeries {
  ObservableSeries deviation; ///< ‖U†OU − Ũ†OŨ‖
  ObservableSeries symmetry;  ///< ‖[U†OU, g]‖ (quasi only, empty otherwise)
};

/// Compares exact and V-dropped dynamics of a full-space observable O.
TruncationSeries compare_truncated_dynamics(const DriveSpec& spec, const EffectiveDecomposition& dec, const Matrix& O,
                                            const std::vector<double>& times, double dt = 0.0);
TruncationSeries compare_truncated_dynamics(const DriveSpec& spec, const QuasiDecomposition& dec, const Matrix& O,
                                            const std::vector<double>& times, double dt = 0.0);

/// Integral of ‖V(θ_s)‖ over [0, t] (trapezoid on the propagation grid): the
/// Duhamel bound on ‖U − Ũ‖.
double duhamel_bound(const DriveSpec& spec, const EffectiveDecomposition& dec, double t, int samples = 512);

inline constexpr double kNeverCrossed = std::numeric_limits<double>::infinity();

/// First time the running maximum of the series reaches `threshold`, linearly
/// interpolated between samples; kNeverCrossed if it never does.
double extract_lifetime(const ObservableSeries& series, double threshold);

struct LemmaResult {
  std::string name;
  int instances = 0;
  int violations = 0;
  double max_ratio = 0.0; ///< max LHS / RHS
  std::string counterexample;
};

struct LemmaReport {
  std::vector<LemmaResult> lemmas;
  bool ok() const;
};

/// Randomized checks of the conjugation, derivative and commutator bounds,
/// `samples` instances each.
LemmaReport verify_lemma_bounds(int samples, unsigned long long seed);

} // namespace prethermal
