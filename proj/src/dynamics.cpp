#include "prethermal/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

namespace prethermal {

double AmplitudeProfile::f(double t) const { return mean + a * std::cos(omega * t + phase); }

double AmplitudeProfile::integral(double t) const {
  if (a == 0.0) return mean * t;
  return mean * t + a / omega * (std::sin(omega * t + phase) - std::sin(phase));
}

void AmplitudeProfile::validate() const {
  if (!(std::abs(mean) + std::abs(a) < 1.0))
    throw ValidationError("amplitude profile needs |f| < 1 (max |f| = " + std::to_string(std::abs(mean) + std::abs(a)) +
                          ")");
  if (a != 0.0 && !(omega > 0.0)) throw ValidationError("amplitude profile frequency must be positive");
}

double DriveSpec::amplitude(double t) const { return quasi() ? nu / n : nu * (1.0 + profile.f(t)); }

Angles DriveSpec::angles(double t) const {
  if (quasi()) return {nu * t + theta0[0], omega * t + theta0[1]};
  return {omega * t + theta0[0], 0.0};
}

double DriveSpec::period() const {
  if (quasi()) throw ValidationError("a quasiperiodic drive has no period");
  return kTwoPi / omega;
}

void finalize_drive(DriveSpec& spec) {
  if (!spec.charge) throw ValidationError("drive needs a charge");
  if (!(spec.nu > 0.0)) throw ValidationError("nu must be positive");
  if (!(spec.omega > 0.0)) throw ValidationError("omega must be positive");
  if (spec.n < 1) throw ValidationError("twist order n must be positive");
  if (spec.H.num_angles() < 1 || spec.H.num_angles() > 2) throw ValidationError("drive must have one or two angles");
  if (spec.H.graph() != spec.charge->graph() &&
      spec.H.graph()->num_sites() != spec.charge->graph()->num_sites())
    throw ValidationError("drive and charge live on different lattices");
  spec.profile.validate();
  if (spec.quasi() && !spec.profile.constant())
    throw ValidationError("amplitude profiles apply to Floquet drives; preprocess them first");
  if (spec.profile.a != 0.0) {
    const double ratio = spec.profile.omega / spec.omega;
    if (std::abs(ratio - std::round(ratio)) > 1e-12 || std::round(ratio) < 1.0)
      throw ValidationError("amplitude profile frequency must be a multiple of omega");
  }
  const ColoredPotential canon = canonical_potential(spec.H, spec.quasi() ? nullptr : spec.charge.get());
  spec.nu0 = compute_nu0(canon, spec.kappa0, spec.omega);
}

FloquetProblem floquet_problem(const DriveSpec& spec) {
  if (spec.quasi()) throw ValidationError("drive is quasiperiodic");
  if (!spec.profile.constant()) throw ValidationError("Floquet renormalization needs a constant amplitude; preprocess the drive");
  return FloquetProblem{spec.charge.get(), spec.H, spec.nu, spec.omega, spec.kappa0, spec.nu0};
}

QuasiProblem quasi_problem(const DriveSpec& spec) {
  if (!spec.quasi()) throw ValidationError("drive is not quasiperiodic");
  return QuasiProblem{spec.charge.get(), spec.H, spec.nu, spec.omega, spec.n, spec.kappa0, spec.nu0};
}

namespace {

Generator family_generator(Matrix n, std::function<double(double)> amp, ModeFamily h,
                           std::function<Angles(double)> angles) {
  return [n = std::move(n), amp = std::move(amp), h = std::move(h), angles = std::move(angles)](double t) {
    return Matrix(amp(t) * n + h.at(angles(t)));
  };
}

bool is_periodic(const DriveSpec& spec) { return !spec.quasi(); }

double norm_bound(const ModeFamily& f) {
  double s = 0.0;
  for (const auto& [k, m] : f.modes()) s += spectral_norm(m);
  return s;
}

double hermitian_deviation(const Matrix& a, const Matrix& b) {
  const Matrix d = a - b;
  return hermitian_norm(0.5 * (d + d.adjoint()));
}

} // namespace

Generator drive_generator(const DriveSpec& spec) {
  const DriveSpec s = spec;
  return family_generator(
      spec.charge->full_matrix(), [s](double t) { return s.amplitude(t); }, ModeFamily::from_potential(spec.H),
      [s](double t) { return s.angles(t); });
}

double default_dt(const DriveSpec& spec) {
  double scale = spec.quasi() ? std::max(spec.nu / spec.n, spec.nu) : spec.nu * (1.0 + std::abs(spec.profile.mean) + std::abs(spec.profile.a));
  scale = std::max({scale, norm_bound(ModeFamily::from_potential(spec.H)), spec.omega});
  if (spec.profile.a != 0.0) scale = std::max(scale, spec.profile.omega);
  return 0.1 / scale;
}

std::vector<Matrix> propagate_generator(const Generator& g, Eigen::Index dim, const std::vector<double>& times,
                                        double dt, double t0) {
  if (!(dt > 0.0)) throw ValidationError("time step must be positive");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  // Commutator-free order-4 scheme with two exponentials per step
  // (Gauss nodes c = ½ ∓ √3/6, weights ¼ ± √3/6).
  const double r3 = std::sqrt(3.0) / 6.0;
  const double c1 = 0.5 - r3, c2 = 0.5 + r3;
  const double w1 = 0.25 + r3, w2 = 0.25 - r3;
  std::vector<Matrix> out(times.size());
  Matrix u = Matrix::Identity(dim, dim);
  double t = t0;
  long long total_steps = 0;
  for (const std::size_t idx : order) {
    const double target = times[idx];
    if (target < t0) throw ValidationError("propagation times must not precede the start time");
    const double span = target - t;
    const long long steps = span > 0.0 ? static_cast<long long>(std::ceil(span / dt - 1e-9)) : 0;
    const double h = steps > 0 ? span / static_cast<double>(steps) : 0.0;
    for (long long k = 0; k < steps; ++k) {
      const double ts = t + static_cast<double>(k) * h;
      const Matrix g1 = g(ts + c1 * h);
      const Matrix g2 = g(ts + c2 * h);
      u = exp_hermitian(w2 * g1 + w1 * g2, h) * (exp_hermitian(w1 * g1 + w2 * g2, h) * u);
    }
    total_steps += steps;
    t = target;
    out[idx] = u;
  }
  if (!times.empty()) {
    const double defect = unitarity_defect(u);
    // Truncation error per unit time plus a roundoff allowance per step.
    const double tol = 1e-9 * std::max(1.0, t - t0) + 1e-14 * static_cast<double>(total_steps);
    if (defect > tol) {
      std::ostringstream msg;
      msg << "unitarity defect " << defect << " at t = " << t << " after " << total_steps
          << " steps exceeds " << tol << "; reduce dt";
      throw NumericalError(msg.str());
    }
  }
  return out;
}

FloquetOperator::FloquetOperator(const Generator& g, Eigen::Index dim, double period, double dt,
                                 std::vector<double> offsets)
    : period_(period), offsets_(std::move(offsets)) {
  std::sort(offsets_.begin(), offsets_.end());
  for (const double tau : offsets_)
    if (!(tau > 0.0 && tau < period)) throw ValidationError("Floquet offsets must lie strictly inside the period");
  std::vector<double> times = offsets_;
  times.push_back(period);
  partial_ = propagate_generator(g, dim, times, dt);
  u_ = partial_.back();
  partial_.pop_back();
  factor();
}

FloquetOperator::FloquetOperator(const Matrix& one_period, double period) : period_(period), u_(one_period) {
  factor();
}

void FloquetOperator::factor() {
  Eigen::ComplexSchur<Matrix> schur(u_);
  q_ = schur.matrixU();
  const Matrix& t = schur.matrixT();
  phases_.resize(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) phases_(i) = std::arg(t(i, i));
}

Matrix FloquetOperator::power(long long k) const {
  Vector d(phases_.size());
  for (Eigen::Index i = 0; i < phases_.size(); ++i)
    d(i) = std::polar(1.0, std::remainder(static_cast<double>(k) * phases_(i), kTwoPi));
  return q_ * d.asDiagonal() * q_.adjoint();
}

Matrix FloquetOperator::at(double t) const {
  if (t < 0.0) throw ValidationError("Floquet sampling needs t >= 0");
  // Relative tolerance in units of T; t = kT carries roundoff ∝ k.
  const double x = t / period_;
  const double tol = 1e-9 + 1e-14 * x;
  const long long nearest = std::llround(x);
  if (std::abs(x - static_cast<double>(nearest)) <= tol) return power(nearest);
  const long long k = static_cast<long long>(std::floor(x));
  const double frac = x - static_cast<double>(k);
  for (std::size_t j = 0; j < offsets_.size(); ++j)
    if (std::abs(frac - offsets_[j] / period_) <= tol) return partial_[j] * power(k);
  std::ostringstream msg;
  msg << "time " << t << " is not a period multiple plus a stored offset";
  throw ValidationError(msg.str());
}

RealVector FloquetOperator::quasienergies() const { return -phases_ / period_; }

std::vector<Matrix> propagate_periodic(const Generator& g, Eigen::Index dim, double period,
                                       const std::vector<double>& times, double dt) {
  std::vector<double> frac(times.size());
  std::vector<long long> whole(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0) throw ValidationError("propagation times must be non-negative");
    long long k = static_cast<long long>(std::floor(times[i] / period + 1e-12));
    double tau = times[i] - static_cast<double>(k) * period;
    if (tau < 0.0) tau = 0.0;
    whole[i] = k;
    frac[i] = tau;
  }
  std::vector<double> inner = frac;
  inner.push_back(period);
  const std::vector<Matrix> partial = propagate_generator(g, dim, inner, dt);
  const FloquetOperator floquet(partial.back(), period);
  std::vector<Matrix> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = partial[i] * floquet.power(whole[i]);
  return out;
}

std::vector<Matrix> propagate(const DriveSpec& spec, const std::vector<double>& times, double dt) {
  if (dt <= 0.0) dt = default_dt(spec);
  const Generator g = drive_generator(spec);
  const auto dim = static_cast<Eigen::Index>(spec.charge->graph()->hilbert_dim());
  if (is_periodic(spec)) return propagate_periodic(g, dim, spec.period(), times, dt);
  return propagate_generator(g, dim, times, dt);
}

std::vector<Matrix> reconstruct_propagator(const DriveSpec& spec, const EffectiveDecomposition& dec,
                                           const std::vector<double>& times, double dt, bool drop_V) {
  if (spec.quasi()) throw ValidationError("use the quasiperiodic reconstruction for two-angle drives");
  if (!spec.profile.constant()) throw ValidationError("reconstruction needs a constant amplitude");
  if (dt <= 0.0) dt = default_dt(spec);
  const Matrix n = spec.charge->full_matrix();
  ModeFamily eff = drop_V ? dec.D : dec.D + dec.V;
  const double nu = spec.nu;
  const DriveSpec s = spec;
  const Generator g = family_generator(
      n, [nu](double) { return nu; }, std::move(eff), [s](double t) { return s.angles(t); });
  const std::vector<Matrix> inner = propagate_periodic(g, n.rows(), spec.period(), times, dt);
  const Matrix f0 = dec.frame(spec.angles(0.0));
  std::vector<Matrix> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out[i] = dec.frame(spec.angles(times[i])) * inner[i] * f0.adjoint();
  return out;
}

std::vector<Matrix> reconstruct_propagator(const DriveSpec& spec, const QuasiDecomposition& dec,
                                           const std::vector<double>& times, double dt, bool drop_V) {
  if (!spec.quasi()) throw ValidationError("drive is not quasiperiodic");
  if (dt <= 0.0) dt = default_dt(spec);
  const Matrix n = spec.charge->full_matrix();
  const double amp = spec.nu / spec.n;
  const DriveSpec s = spec;
  const Generator g = [&dec, n, amp, s, drop_V](double t) {
    const Angles th = s.angles(t);
    Matrix m = amp * n + dec.D_lab(th);
    if (!drop_V) m += dec.V_lab(th);
    return m;
  };
  const std::vector<Matrix> inner = propagate_generator(g, n.rows(), times, dt);
  const Matrix f0 = dec.lab_frame(spec.angles(0.0));
  std::vector<Matrix> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i)
    out[i] = dec.lab_frame(spec.angles(times[i])) * inner[i] * f0.adjoint();
  return out;
}

void ObservableSeries::validate() const {
  if (times.size() != values.size()) throw ValidationError("series times and values differ in length");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ValidationError("series times must be strictly increasing");
}

void ObservableSeries::write_csv(std::ostream& os, const std::string& run_id, bool header) const {
  if (header) os << "t,value,observable,run_id\n";
  os << std::setprecision(12) << std::scientific;
  for (std::size_t i = 0; i < times.size(); ++i)
    os << times[i] << "," << values[i] << "," << observable << "," << run_id << "\n";
  os << std::defaultfloat;
}

Matrix dressed_charge(const ChargeOperator& charge, const EffectiveDecomposition& dec, const Angles& theta) {
  const Matrix f = dec.frame(theta);
  return f * charge.full_matrix() * f.adjoint();
}

ObservableSeries measure_charge_conservation(const DriveSpec& spec, const FloquetOperator& floquet,
                                             const EffectiveDecomposition* dec, const std::vector<long long>& periods,
                                             bool dressed) {
  const bool use_dressed = dressed && dec;
  const Matrix n = use_dressed ? dressed_charge(*spec.charge, *dec, spec.angles(0.0)) : spec.charge->full_matrix();
  const double sites = spec.charge->graph()->num_sites();
  ObservableSeries s;
  s.observable = use_dressed ? "dressed_charge_deviation" : "bare_charge_deviation";
  for (const long long k : periods) {
    const Matrix u = floquet.power(k);
    s.times.push_back(static_cast<double>(k) * floquet.period());
    s.values.push_back(hermitian_deviation(n, u.adjoint() * n * u) / sites);
  }
  s.validate();
  return s;
}

ObservableSeries measure_charge_conservation(const DriveSpec& spec, const EffectiveDecomposition* dec,
                                             const std::vector<long long>& periods, bool dressed, double dt) {
  if (spec.quasi()) throw ValidationError("stroboscopic measurement needs a Floquet drive");
  if (dt <= 0.0) dt = default_dt(spec);
  const auto dim = static_cast<Eigen::Index>(spec.charge->graph()->hilbert_dim());
  const FloquetOperator floquet(drive_generator(spec), dim, spec.period(), dt);
  return measure_charge_conservation(spec, floquet, dec, periods, dressed);
}

ObservableSeries measure_charge_conservation_at(const DriveSpec& spec, const EffectiveDecomposition* dec,
                                                const std::vector<double>& times, bool dressed, double dt) {
  const bool use_dressed = dressed && dec;
  const std::vector<Matrix> us = propagate(spec, times, dt);
  const Matrix& n = spec.charge->full_matrix();
  const Matrix n0 = use_dressed ? dressed_charge(*spec.charge, *dec, spec.angles(0.0)) : n;
  const double sites = spec.charge->graph()->num_sites();
  ObservableSeries s;
  s.observable = use_dressed ? "dressed_charge_deviation" : "bare_charge_deviation";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Matrix nt = use_dressed ? dressed_charge(*spec.charge, *dec, spec.angles(times[i])) : n;
    s.times.push_back(times[i]);
    s.values.push_back(hermitian_deviation(n0, us[i].adjoint() * nt * us[i]) / sites);
  }
  s.validate();
  return s;
}

ObservableSeries measure_charge_conservation_at(const DriveSpec& spec, const FloquetOperator& floquet,
                                                const EffectiveDecomposition* dec, const std::vector<double>& times,
                                                bool dressed) {
  const bool use_dressed = dressed && dec;
  const Matrix& n = spec.charge->full_matrix();
  const Matrix n0 = use_dressed ? dressed_charge(*spec.charge, *dec, spec.angles(0.0)) : n;
  const double sites = spec.charge->graph()->num_sites();
  ObservableSeries s;
  s.observable = use_dressed ? "dressed_charge_deviation" : "bare_charge_deviation";
  // Ñ(θ_t) depends on t only through its offset inside the period.
  std::map<long long, Matrix> dressed_cache;
  const double T = floquet.period();
  for (const double t : times) {
    const Matrix u = floquet.at(t);
    s.times.push_back(t);
    if (!use_dressed) {
      s.values.push_back(hermitian_deviation(n0, u.adjoint() * n * u) / sites);
      continue;
    }
    const double x = t / T;
    double frac = x - std::floor(x);
    if (std::abs(x - std::round(x)) <= 1e-9 + 1e-14 * x) frac = 0.0;
    const double tau = frac * T;
    const long long key = std::llround(frac * 1e6);
    auto it = dressed_cache.find(key);
    if (it == dressed_cache.end())
      it = dressed_cache.emplace(key, tau == 0.0 ? n0 : dressed_charge(*spec.charge, *dec, spec.angles(tau))).first;
    s.values.push_back(hermitian_deviation(n0, u.adjoint() * it->second * u) / sites);
  }
  s.validate();
  return s;
}

LogSampling log_sampling(double period, double horizon_periods, int per_octave, int sub_octaves) {
  if (!(period > 0.0) || !(horizon_periods >= 1.0) || per_octave < 1 || sub_octaves < 0)
    throw ValidationError("invalid log sampling parameters");
  LogSampling out;
  out.times.push_back(0.0);
  for (int j = sub_octaves * per_octave; j >= 1; --j) {
    const double tau = period * std::pow(2.0, -static_cast<double>(j) / per_octave);
    out.offsets.push_back(tau);
    out.times.push_back(tau);
  }
  long long last = 0;
  const int octaves = static_cast<int>(std::ceil(std::log2(horizon_periods) * per_octave - 1e-9));
  for (int j = 0; j <= octaves; ++j) {
    long long k = std::llround(std::pow(2.0, static_cast<double>(j) / per_octave));
    k = std::min<long long>(k, std::llround(horizon_periods));
    if (k > last) {
      out.times.push_back(static_cast<double>(k) * period);
      last = k;
    }
  }
  return out;
}

ObservableSeries charge_expectation(const DriveSpec& spec, const FloquetOperator& floquet, const Vector& psi0,
                                    const std::vector<long long>& periods) {
  const Matrix& n = spec.charge->full_matrix();
  ObservableSeries s;
  s.observable = "charge_expectation";
  for (const long long k : periods) {
    const Vector psi = floquet.power(k) * psi0;
    s.times.push_back(static_cast<double>(k) * floquet.period());
    s.values.push_back(psi.dot(n * psi).real());
  }
  s.validate();
  return s;
}

double conservation_bound(const DriveSpec& spec, int n_star, double t) {
  const ChargeOperator& c = *spec.charge;
  const double n0 = std::ceil(c.term_bound() - 1e-12);
  const double d = c.graph()->spatial_dimension();
  return 2.0 * t * spec.nu0 * n0 * std::pow(d, c.range()) * std::pow(0.5, n_star);
}

namespace {

TruncationSeries truncation_series(const std::vector<Matrix>& exact, const std::vector<Matrix>& truncated,
                                   const Matrix& O, const std::vector<double>& times, const Matrix* g) {
  TruncationSeries out;
  out.deviation.observable = "truncation_deviation";
  if (g) out.symmetry.observable = "symmetry_defect";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Matrix a = exact[i].adjoint() * O * exact[i];
    const Matrix b = truncated[i].adjoint() * O * truncated[i];
    out.deviation.times.push_back(times[i]);
    out.deviation.values.push_back(spectral_norm(a - b));
    if (g) {
      out.symmetry.times.push_back(times[i]);
      out.symmetry.values.push_back(spectral_norm(a * *g - *g * a));
    }
  }
  out.deviation.validate();
  out.symmetry.validate();
  return out;
}

} // namespace

TruncationSeries compare_truncated_dynamics(const DriveSpec& spec, const EffectiveDecomposition& dec, const Matrix& O,
                                            const std::vector<double>& times, double dt) {
  const std::vector<Matrix> exact = reconstruct_propagator(spec, dec, times, dt, false);
  const std::vector<Matrix> truncated = reconstruct_propagator(spec, dec, times, dt, true);
  return truncation_series(exact, truncated, O, times, nullptr);
}

TruncationSeries compare_truncated_dynamics(const DriveSpec& spec, const QuasiDecomposition& dec, const Matrix& O,
                                            const std::vector<double>& times, double dt) {
  const std::vector<Matrix> exact = reconstruct_propagator(spec, dec, times, dt, false);
  const std::vector<Matrix> truncated = reconstruct_propagator(spec, dec, times, dt, true);
  return truncation_series(exact, truncated, O, times, &dec.g);
}

double duhamel_bound(const DriveSpec& spec, const EffectiveDecomposition& dec, double t, int samples) {
  if (dec.V.empty() || t <= 0.0) return 0.0;
  double acc = 0.0;
  for (int j = 0; j <= samples; ++j) {
    const double s = t * j / samples;
    const double w = (j == 0 || j == samples) ? 0.5 : 1.0;
    acc += w * spectral_norm(dec.V.at(spec.angles(s)));
  }
  return acc * t / samples;
}

double extract_lifetime(const ObservableSeries& series, double threshold) {
  if (series.times.empty()) throw ValidationError("cannot extract a lifetime from an empty series");
  series.validate();
  double running = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    const double v = series.values[i];
    if (v >= threshold && v > running) {
      if (i == 0) return series.times[0];
      const double t0 = series.times[i - 1], t1 = series.times[i];
      return t0 + (threshold - running) / (v - running) * (t1 - t0);
    }
    running = std::max(running, v);
  }
  return kNeverCrossed;
}

} // namespace prethermal
