#include "prethermal/preprocess.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <functional>

namespace prethermal {

PreprocessStrategy parse_strategy(const std::string& name) {
  if (name == "reparameterize") return PreprocessStrategy::reparameterize;
  if (name == "rotating-frame") return PreprocessStrategy::rotating_frame;
  throw ValidationError("unknown preprocessing strategy '" + name + "' (reparameterize | rotating-frame)");
}

std::string to_string(PreprocessStrategy s) {
  return s == PreprocessStrategy::reparameterize ? "reparameterize" : "rotating-frame";
}

namespace {

// t with t + F(t) = t′; t ↦ t + F(t) has derivative 1 + f ≥ 1 − max|f| > 0.
double invert_time(const AmplitudeProfile& p, double tp) {
  double t = tp;
  for (int it = 0; it < 100; ++it) {
    const double step = (t + p.integral(t) - tp) / (1.0 + p.f(t));
    t -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(tp))) return t;
  }
  throw NumericalError("time reparameterization did not converge");
}

// Fourier coefficients c_k of a 2π-periodic scalar function,
// u(ψ) = Σ_k c_k e^{ikψ}, on the smallest power-of-two grid whose upper band
// is below `tol` relative to the largest coefficient.
std::map<int, Complex> scalar_series(const std::function<Complex(double)>& u, double tol, int& size_used) {
  Eigen::FFT<double> fft;
  for (int size = 64; size <= (1 << 16); size *= 2) {
    std::vector<Complex> in(static_cast<std::size_t>(size)), out;
    for (int j = 0; j < size; ++j) in[static_cast<std::size_t>(j)] = u(kTwoPi * j / size);
    fft.fwd(out, in);
    double peak = 0.0, band = 0.0;
    for (int j = 0; j < size; ++j) {
      const int k = j <= size / 2 ? j : j - size;
      const double mag = std::abs(out[static_cast<std::size_t>(j)]) / size;
      peak = std::max(peak, mag);
      if (std::abs(k) > size / 4) band = std::max(band, mag);
    }
    if (band > tol * peak) continue;
    size_used = std::max(size_used, size);
    std::map<int, Complex> c;
    for (int j = 0; j < size; ++j) {
      const int k = j <= size / 2 ? j : j - size;
      const Complex v = out[static_cast<std::size_t>(j)] / static_cast<double>(size);
      if (std::abs(v) > tol * peak) c[k] = v;
    }
    return c;
  }
  throw NumericalError("Fourier expansion of the amplitude factor did not converge");
}

// Mode-shifted product: Σ_m X_m e^{imθ} · Σ_k c_{m,k} e^{ik(θ − θ₀)}.
void add_shifted(ColoredPotential& out, SiteMask zone, int m, const LocalOperator& op,
                 const std::map<int, Complex>& c, double theta0) {
  for (const auto& [k, ck] : c) out.add(zone, {m + k, 0}, (ck * std::exp(Complex(0.0, -k * theta0))) * op);
}

} // namespace

double PreprocessResult::transformed_time(double t) const {
  return strategy == PreprocessStrategy::reparameterize ? t + original.profile.integral(t) : t;
}

Matrix PreprocessResult::undo(const Matrix& u, double t) const {
  if (strategy == PreprocessStrategy::reparameterize || original.profile.constant()) return u;
  const double phase = original.nu * original.profile.integral(t);
  return exp_hermitian(original.charge->full_matrix(), phase) * u;
}

std::vector<Matrix> PreprocessResult::propagate_original(const std::vector<double>& times, double dt) const {
  std::vector<double> tp;
  tp.reserve(times.size());
  for (double t : times) tp.push_back(transformed_time(t));
  const auto us = propagate(spec, tp, dt);
  std::vector<Matrix> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out.push_back(undo(us[i], times[i]));
  return out;
}

PreprocessResult preprocess_drive(const DriveSpec& spec, PreprocessStrategy strategy, double tol) {
  const AmplitudeProfile& p = spec.profile;
  p.validate();
  if (std::abs(p.mean) > 0.0) throw ValidationError("amplitude profile has nonzero average " + std::to_string(p.mean));
  if (spec.quasi()) throw ValidationError("preprocessing applies to Floquet drives");

  PreprocessResult r;
  r.original = spec;
  r.strategy = strategy;
  r.spec = spec;
  r.spec.profile = AmplitudeProfile{};
  if (p.constant()) return r;
  if (!spec.charge) throw ValidationError("drive needs a charge");

  const double omega = spec.omega;
  const double theta0 = spec.theta0[0];
  ColoredPotential h(spec.H.graph(), 1);

  if (strategy == PreprocessStrategy::reparameterize) {
    // ψ = ωt′: θ = θ′ − ωF(t(ψ)), prefactor 1/(1 + f(t(ψ))).
    std::map<int, std::map<int, Complex>> factors;
    auto factor = [&](int m) -> const std::map<int, Complex>& {
      auto it = factors.find(m);
      if (it != factors.end()) return it->second;
      auto u = [&](double psi) {
        const double t = invert_time(p, psi / omega);
        return std::exp(Complex(0.0, -m * omega * p.integral(t))) / (1.0 + p.f(t));
      };
      return factors.emplace(m, scalar_series(u, tol, r.fft_size)).first->second;
    };
    for (const auto& [key, term] : spec.H.terms()) add_shifted(h, key.zone, key.fourier[0], term.op, factor(key.fourier[0]), theta0);
    for (const auto& [n, c] : spec.H.constants())
      for (const auto& [k, ck] : factor(n[0])) h.add_constant({n[0] + k, 0}, c * ck * std::exp(Complex(0.0, -k * theta0)));
  } else {
    // e^{iν̄F N} X_q e^{−iν̄F N} = e^{iqν̄F} X_q with ψ = ωt.
    std::map<int, std::map<int, Complex>> factors;
    auto factor = [&](int q) -> const std::map<int, Complex>& {
      auto it = factors.find(q);
      if (it != factors.end()) return it->second;
      auto u = [&](double psi) { return std::exp(Complex(0.0, q * spec.nu * p.integral(psi / omega))); };
      return factors.emplace(q, scalar_series(u, tol, r.fft_size)).first->second;
    };
    for (const auto& [key, term] : spec.H.terms()) {
      const AdChargeDecomposition parts = ad_charge_decompose(term.op, *spec.charge);
      for (const auto& [q, comp] : parts.components) {
        const SiteMask zone = key.zone | comp.mask();
        if (q == 0)
          h.add(zone, key.fourier, comp);
        else
          add_shifted(h, zone, key.fourier[0], comp, factor(q), theta0);
      }
    }
    for (const auto& [n, c] : spec.H.constants()) h.add_constant(n, c);
  }
  r.spec.H = std::move(h);
  finalize_drive(r.spec);
  return r;
}

double PreprocessCertificate::max_deviation() const {
  double m = 0.0;
  for (double d : deviations) m = std::max(m, d);
  return m;
}

PreprocessCertificate certify_preprocess(const PreprocessResult& r, const std::vector<double>& times, double dt) {
  PreprocessCertificate cert;
  cert.times = times;
  const double step = dt > 0.0 ? dt : std::min(default_dt(r.original), default_dt(r.spec));
  const auto direct = propagate(r.original, times, step);
  const auto via = r.propagate_original(times, step);
  for (std::size_t i = 0; i < times.size(); ++i) cert.deviations.push_back(spectral_norm(direct[i] - via[i]));
  if (r.strategy == PreprocessStrategy::reparameterize && !r.original.profile.constant()) {
    const double T = r.original.period();
    for (double tp : {0.1 * T, 0.37 * T, 0.8 * T}) {
      const double shift = invert_time(r.original.profile, tp + T) - invert_time(r.original.profile, tp) - T;
      cert.period_shift = std::max(cert.period_shift, std::abs(shift));
    }
  }
  return cert;
}

} // namespace prethermal
