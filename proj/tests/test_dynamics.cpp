#include "prethermal/dynamics.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace prethermal;
using testutil::max_abs;

namespace {

GraphPtr chain(int n) { return std::make_shared<SiteGraph>(SiteGraph::chain(n)); }

std::shared_ptr<const ChargeOperator> number_charge(const GraphPtr& g) {
  return std::make_shared<const ChargeOperator>(charge_preset("number", g));
}

ColoredPotential field_drive(const GraphPtr& g, double hx, double hz, double J) {
  ColoredPotential h(g, 1);
  for (int i = 0; i < g->num_sites(); ++i) {
    const SiteMask z = SiteMask{1} << i;
    h.add(z, {1, 0}, Complex(0.5 * hx) * pauli_string({i}, "X"));
    h.add(z, {-1, 0}, Complex(0.5 * hx) * pauli_string({i}, "X"));
    h.add(z, {0, 0}, Complex(hz) * pauli_string({i}, "Z"));
  }
  for (int i = 0; i + 1 < g->num_sites(); ++i)
    h.add(SiteMask{3} << i, {0, 0}, Complex(J) * pauli_string({i, i + 1}, "ZZ"));
  return h;
}

DriveSpec floquet_spec(int sites, double ratio, double omega = 1.0) {
  const auto g = chain(sites);
  DriveSpec s;
  s.charge = number_charge(g);
  s.H = field_drive(g, 0.6, 0.3, 0.25);
  s.omega = omega;
  s.nu = 1.0;
  s.theta0 = {0.3, 0.0};
  finalize_drive(s);
  s.nu = ratio * s.nu0;
  return s;
}

} // namespace

TEST_CASE("propagation of trivial drives") {
  const auto g = chain(2);
  DriveSpec s;
  s.charge = number_charge(g);
  s.H = ColoredPotential(g, 1);
  s.nu = 7.0;
  finalize_drive(s);
  CHECK(s.nu0 == doctest::Approx(1.0));
  const Matrix& n = s.charge->full_matrix();
  const auto us = propagate(s, {0.0, 0.7, 13.1});
  CHECK(max_abs(us[0] - Matrix::Identity(4, 4)) < 1e-15);
  CHECK(max_abs(us[1] - exp_hermitian(n, 7.0 * 0.7)) < 1e-12);
  CHECK(max_abs(us[2] - exp_hermitian(n, 7.0 * 13.1)) < 1e-12);

  // Static generator: single matrix exponential.
  s.H.add(0b11, {0, 0}, Complex(0.4) * pauli_string({0, 1}, "XX"));
  s.H.add(0b01, {0, 0}, Complex(0.3) * pauli_string({0}, "Y"));
  finalize_drive(s);
  const Matrix g0 = 7.0 * n + s.H.assemble({0.0, 0.0});
  const auto direct = propagate_generator(drive_generator(s), 4, {2.5}, 0.05);
  CHECK(max_abs(direct[0] - exp_hermitian(g0, 2.5)) < 1e-12);
}

TEST_CASE("integrator convergence order") {
  const DriveSpec s = floquet_spec(2, 3.0);
  const Generator g = drive_generator(s);
  const double t = 2.7;
  const double dt = 0.2 / s.nu;
  const Matrix ref = propagate_generator(g, 4, {t}, dt / 16).front();
  const Matrix u1 = propagate_generator(g, 4, {t}, dt).front();
  const Matrix u2 = propagate_generator(g, 4, {t}, dt / 2).front();
  const double e1 = spectral_norm(u1 - ref), e2 = spectral_norm(u2 - ref);
  MESSAGE("CF4 errors " << e1 << " " << e2 << " order " << std::log2(e1 / e2));
  CHECK(std::log2(e1 / e2) > 3.7);
  const Matrix u3 = propagate_generator(g, 4, {t}, default_dt(s)).front();
  const Matrix u4 = propagate_generator(g, 4, {t}, default_dt(s) / 2).front();
  CHECK(spectral_norm(u3 - u4) < 1e-8);
  CHECK(unitarity_defect(u3) < 1e-12);
}

TEST_CASE("periodic propagation via Floquet powers") {
  const DriveSpec s = floquet_spec(2, 2.0, 1.7);
  const Generator g = drive_generator(s);
  const std::vector<double> times{0.0, 0.4, s.period(), 3.4 * s.period()};
  const double dt = default_dt(s) / 4;
  const auto direct = propagate_generator(g, 4, times, dt);
  const auto periodic = propagate_periodic(g, 4, s.period(), times, dt);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(spectral_norm(direct[i] - periodic[i]) < 1e-10);

  const FloquetOperator f(g, 4, s.period(), dt);
  CHECK(spectral_norm(f.power(3) - direct[2] * direct[2] * direct[2]) < 1e-11);
  CHECK(spectral_norm(f.power(0) - Matrix::Identity(4, 4)) < 1e-13);
  const RealVector eps = f.quasienergies();
  CHECK(eps.cwiseAbs().maxCoeff() <= kPi / s.period() + 1e-12);
}

TEST_CASE("Floquet operator at sub-period offsets") {
  const DriveSpec s = floquet_spec(2, 2.0, 1.7);
  const Generator g = drive_generator(s);
  const double T = s.period();
  const double dt = default_dt(s) / 4;
  const std::vector<double> offsets{0.1 * T, 0.55 * T};
  const FloquetOperator f(g, 4, T, dt, offsets);
  const std::vector<double> times{0.1 * T, 0.55 * T, 2.0 * T, 3.1 * T, 7.55 * T};
  const auto direct = propagate_generator(g, 4, times, dt);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(spectral_norm(f.at(times[i]) - direct[i]) < 1e-10);
  CHECK(spectral_norm(f.at(0.0) - Matrix::Identity(4, 4)) < 1e-13);
  CHECK_THROWS_AS(f.at(0.3 * T), ValidationError);
  // Far stroboscopic times with roundoff on either side of kT.
  const double far = 14000000.0 * T;
  CHECK(spectral_norm(f.at(std::nextafter(far, 0.0)) - f.power(14000000)) < 1e-12);
  CHECK(spectral_norm(f.at(std::nextafter(far, 2.0 * far)) - f.power(14000000)) < 1e-12);
  CHECK(spectral_norm(f.at(far + 0.55 * T) - f.at(0.55 * T) * f.power(14000000)) < 1e-12);

  const LogSampling ls = log_sampling(T, 1e4, 4, 3);
  REQUIRE(!ls.times.empty());
  CHECK(ls.times.front() == 0.0);
  for (std::size_t i = 1; i < ls.times.size(); ++i) CHECK(ls.times[i] > ls.times[i - 1]);
  for (std::size_t i = 1; i < ls.offsets.size(); ++i) CHECK(ls.offsets[i] > ls.offsets[i - 1]);
  CHECK(ls.offsets.size() == 12);
  CHECK(ls.offsets.front() == doctest::Approx(T / 8.0));
  CHECK(ls.times.back() <= 1e4 * T * (1.0 + 1e-12));
  CHECK(ls.times.back() >= 0.5e4 * T);
  // Every sample is reachable from the operator.
  const FloquetOperator fl(g, 4, T, dt, ls.offsets);
  for (double t : ls.times) CHECK_NOTHROW(fl.at(t));
  const ObservableSeries a = measure_charge_conservation_at(s, f, nullptr, {0.0, 0.55 * T, 3.0 * T}, false);
  const ObservableSeries b = measure_charge_conservation(s, f, nullptr, {0, 3}, false);
  CHECK(a.values[0] < 1e-14);
  CHECK(std::abs(a.values[2] - b.values[1]) < 1e-12);
}

TEST_CASE("reconstruction identity") {
  DriveSpec s = floquet_spec(3, 6.0, 1.0);
  RenormOptions opt;
  opt.max_steps = 4;
  opt.grid = 16;
  const EffectiveDecomposition dec = run_floquet_renorm(floquet_problem(s), opt);
  REQUIRE(dec.steps() >= 2);
  const std::vector<double> times{0.37, 2.9, 3.0 * s.period() + 1.1};
  const double dt = default_dt(s) / 4;
  const auto direct = propagate(s, times, dt);
  const auto rec = reconstruct_propagator(s, dec, times, dt);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(spectral_norm(direct[i] - rec[i]) < 1e-8);

  // Dropping V: the difference is bounded by the Duhamel integral of ‖V‖.
  const auto trunc = reconstruct_propagator(s, dec, times, dt, true);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double dev = spectral_norm(direct[i] - trunc[i]);
    CHECK(dev <= duhamel_bound(s, dec, times[i]) * (1.0 + 1e-6) + 1e-9);
  }

  // Zero steps: reconstruction is the direct propagator.
  RenormOptions none = opt;
  none.max_steps = 0;
  const EffectiveDecomposition bare = run_floquet_renorm(floquet_problem(s), none);
  CHECK(bare.steps() == 0);
  const auto rec0 = reconstruct_propagator(s, bare, times, dt);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(spectral_norm(direct[i] - rec0[i]) < 1e-12);

  const TruncationSeries ts = compare_truncated_dynamics(s, dec, s.charge->full_matrix(), times, dt);
  CHECK(ts.deviation.values.size() == 3);
  CHECK(ts.symmetry.values.empty());
  const Matrix o = embed_operator(pauli_string({1}, "X"), *s.charge->graph());
  const TruncationSeries tx = compare_truncated_dynamics(s, dec, o, times, dt);
  for (std::size_t i = 0; i < times.size(); ++i)
    CHECK(tx.deviation.values[i] <= 2.0 * duhamel_bound(s, dec, times[i]) + 1e-9);
}

TEST_CASE("charge conservation series") {
  // [H, N] = 0: exactly conserved.
  const auto g = chain(3);
  DriveSpec s;
  s.charge = number_charge(g);
  s.H = ColoredPotential(g, 1);
  s.H.add(0b011, {1, 0}, Complex(0.5) * pauli_string({0, 1}, "ZZ"));
  s.H.add(0b011, {-1, 0}, Complex(0.5) * pauli_string({0, 1}, "ZZ"));
  s.H.add(0b110, {0, 0}, Complex(0.3) * (pauli_string({1, 2}, "XX") + pauli_string({1, 2}, "YY")));
  s.nu = 5.0;
  finalize_drive(s);
  const ObservableSeries z = measure_charge_conservation(s, nullptr, {0, 1, 10, 1000}, false);
  for (const double v : z.values) CHECK(v < 1e-12);
  CHECK(extract_lifetime(z, 0.1) == kNeverCrossed);

  // Dressed vs bare at t = 0.
  DriveSpec d = floquet_spec(2, 5.0);
  RenormOptions opt;
  opt.max_steps = 3;
  opt.grid = 16;
  const EffectiveDecomposition dec = run_floquet_renorm(floquet_problem(d), opt);
  const Matrix n = d.charge->full_matrix();
  const Matrix nd = dressed_charge(*d.charge, dec, d.angles(0.0));
  const double a = spectral_norm(dec.frame_log(d.angles(0.0)));
  CHECK(spectral_norm(n - nd) <= 2.0 * a * spectral_norm(n) + 4.0 * a * a * spectral_norm(n));
  const ObservableSeries bare = measure_charge_conservation(d, &dec, {0, 1, 2, 5}, false);
  const ObservableSeries dressed = measure_charge_conservation(d, &dec, {0, 1, 2, 5}, true);
  CHECK(bare.values[0] < 1e-14);
  CHECK(dressed.values[0] < 1e-14);
  CHECK(dressed.observable == "dressed_charge_deviation");
  // The dressed charge is conserved much better than the bare one.
  CHECK(dressed.values[3] < 0.5 * bare.values[3]);

  // Arbitrary-time variant agrees at stroboscopic times.
  const ObservableSeries at = measure_charge_conservation_at(d, &dec, {d.period(), 2.0 * d.period()}, true);
  CHECK(std::abs(at.values[0] - dressed.values[1]) < 1e-8);

  std::ostringstream csv;
  dressed.write_csv(csv, "run0");
  CHECK(csv.str().rfind("t,value,observable,run_id\n", 0) == 0);

  const double b = conservation_bound(d, 9, 2.0);
  CHECK(b == doctest::Approx(2.0 * 2.0 * d.nu0 * 1.0 * 1.0 / 512.0));
}

TEST_CASE("lifetime extraction") {
  ObservableSeries s;
  for (int i = 0; i <= 10; ++i) {
    s.times.push_back(i);
    s.values.push_back(0.02 * i);
  }
  CHECK(extract_lifetime(s, 0.1) == doctest::Approx(5.0));
  CHECK(extract_lifetime(s, 0.11) == doctest::Approx(5.5));
  CHECK(extract_lifetime(s, 1.0) == kNeverCrossed);
  // Running max: an early spike sets the crossing.
  s.values[2] = 0.5;
  CHECK(extract_lifetime(s, 0.1) == doctest::Approx(1.0 + 0.08 / 0.48));
  ObservableSeries empty;
  CHECK_THROWS_AS(extract_lifetime(empty, 0.1), ValidationError);
  ObservableSeries bad;
  bad.times = {0.0, 0.0};
  bad.values = {0.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("lemma bounds") {
  const LemmaReport r = verify_lemma_bounds(20, 42);
  REQUIRE(r.lemmas.size() == 3);
  for (const auto& l : r.lemmas) {
    MESSAGE(l.name << " max ratio " << l.max_ratio << " " << l.counterexample);
    CHECK(l.instances == 20);
    CHECK(l.violations == 0);
    CHECK(l.max_ratio > 0.0);
  }
  CHECK(r.ok());
}

TEST_CASE("quasiperiodic reconstruction") {
  const auto g = chain(2);
  DriveSpec s;
  s.charge = number_charge(g);
  s.H = ColoredPotential(g, 2);
  for (int i = 0; i < 2; ++i) {
    const SiteMask z = SiteMask{1} << i;
    s.H.add(z, {1, 0}, Complex(0.3) * pauli_string({i}, "X"));
    s.H.add(z, {-1, 0}, Complex(0.3) * pauli_string({i}, "X"));
    s.H.add(z, {0, 1}, Complex(0.2) * pauli_string({i}, "Z"));
    s.H.add(z, {0, -1}, Complex(0.2) * pauli_string({i}, "Z"));
  }
  s.H.add(0b11, {0, 0}, Complex(0.25) * pauli_string({0, 1}, "ZZ"));
  s.n = 2;
  s.nu = 1.0;
  s.theta0 = {0.2, 0.5};
  finalize_drive(s);
  s.omega = 0.7 * s.nu0;
  s.nu = 12.0 * s.nu0;
  RenormOptions opt;
  opt.max_steps = 3;
  opt.grid = 8;
  QuasiDecomposition dec = run_quasi_renorm(quasi_problem(s), opt);
  REQUIRE(dec.rotating.steps() >= 1);
  const std::vector<double> times{0.13, 0.9, 2.1};
  const double dt = default_dt(s) / 2;
  const auto direct = propagate(s, times, dt);
  const auto rec = reconstruct_propagator(s, dec, times, dt);
  for (std::size_t i = 0; i < times.size(); ++i) CHECK(spectral_norm(direct[i] - rec[i]) < 1e-8);

  // The rotation realizes g at multiples of the fast period, up to a phase.
  const double t1 = kTwoPi / s.nu;
  const Matrix env = exp_hermitian(s.charge->full_matrix(), s.nu * t1 / s.n);
  CHECK(max_abs(env - dec.g) < 1e-12);

  const Matrix o = s.charge->full_matrix();
  const TruncationSeries ts = compare_truncated_dynamics(s, dec, o, times, dt);
  CHECK(ts.symmetry.values.size() == times.size());
  for (const double v : ts.symmetry.values) CHECK(v < 1.0);
}
