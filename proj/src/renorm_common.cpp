#include "prethermal/renorm.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

namespace prethermal {

RenormMode parse_mode(const std::string& s) {
  if (s == "rigorous") return RenormMode::rigorous;
  if (s == "adaptive") return RenormMode::adaptive;
  throw ValidationError("unknown mode '" + s + "' (expected rigorous|adaptive)");
}

std::string to_string(RenormMode m) { return m == RenormMode::rigorous ? "rigorous" : "adaptive"; }

double quadratic_P(double x, double kappa0) {
  const double k1 = 0.5 * kappa0;
  const double e = std::exp(1.0);
  return (72.0 * kPi * k1 / e) * x * x + (108.0 * kPi + 2.0 * kPi * k1 / e) * x - 0.5;
}

RenormConstants compute_constants(double kappa0, double nu, double nu0) {
  if (!(kappa0 > 0.0)) throw ValidationError("kappa0 must be positive");
  if (!(nu0 > 0.0)) throw ValidationError("nu0 must be positive");
  const double e = std::exp(1.0);
  RenormConstants c;
  c.kappa0 = kappa0;
  c.nu = nu;
  c.nu0 = nu0;
  c.A = 216.0 * kPi / (kappa0 * kappa0) + (1.0 + 72.0 * kPi / (kappa0 * kappa0)) * 4.0 * kPi / (e * kappa0);

  const double b_closed = 108.0 * kPi + 4.0 * kPi * kappa0 / e;
  const double two_a_closed = 288.0 * kPi * kappa0 / e;
  c.x_closed = (-b_closed + std::sqrt(b_closed * b_closed + two_a_closed)) / two_a_closed;

  // P(x′) = a x′² + b x′ − ½, positive root in the cancellation-free form.
  const double k1 = 0.5 * kappa0;
  const double a = 72.0 * kPi * k1 / e;
  const double b = 108.0 * kPi + 2.0 * kPi * k1 / e;
  c.x_root = 1.0 / (b + std::sqrt(b * b + 2.0 * a));

  c.x_lemma = 1.0 / (6.0 * kPi * kappa0);
  c.x = std::min({c.x_closed, c.x_root, c.x_lemma});
  c.B = std::sqrt(2.0) / c.x;
  c.C_inv = std::min({1.0, kappa0 / (12.0 * kPi), 1.0 / (2.0 * c.A), c.x / (64.0 * std::sqrt(2.0)) * kappa0 * kappa0});
  c.C = 1.0 / c.C_inv;
  c.admissible = nu > c.C * nu0;
  c.n_star = c.admissible
                 ? static_cast<int>(std::floor(3.0 * c.x * kappa0 * kappa0 / (32.0 * std::sqrt(2.0)) * (nu / nu0)))
                 : 0;
  return c;
}

double RenormSchedule::kappa(int n) const {
  const double k0 = constants.kappa0;
  if (n <= 0) return k0;
  if (mode == RenormMode::adaptive) return k0 * std::pow(adaptive_factor, n);
  const double k1 = 0.5 * k0;
  const double sq = k1 * k1 - 2.0 * constants.B * (constants.nu0 / constants.nu) * (n - 1);
  if (sq <= 0.0) return 0.0;
  return std::sqrt(sq);
}

int RenormSchedule::planned_steps() const { return mode == RenormMode::rigorous ? constants.n_star : max_steps; }

RenormSchedule make_schedule(RenormMode mode, const RenormConstants& c, int max_steps, double factor) {
  RenormSchedule s;
  s.mode = mode;
  s.constants = c;
  s.max_steps = max_steps;
  s.adaptive_factor = factor;
  return s;
}

FrameKernel::FrameKernel(const Matrix& a) {
  const Matrix h = kI * a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
  u_ = es.eigenvectors();
  mu_ = es.eigenvalues();
}

Matrix FrameKernel::gamma(const Matrix& o) const {
  Matrix t = u_.adjoint() * o * u_;
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) *= std::polar(1.0, mu_(r) - mu_(c));
  return u_ * t * u_.adjoint();
}

Matrix FrameKernel::alpha(const Matrix& o) const {
  Matrix t = u_.adjoint() * o * u_;
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      // ∫₀¹ e^{isx} ds with x = μ_r − μ_c.
      const double x = mu_(r) - mu_(c);
      Complex w;
      if (std::abs(x) < 1e-4)
        w = Complex(1.0 - x * x / 6.0, x / 2.0 - x * x * x / 24.0);
      else
        w = (std::polar(1.0, x) - 1.0) / Complex(0.0, x);
      t(r, c) *= w;
    }
  return u_ * t * u_.adjoint();
}

Matrix FrameKernel::exp(double s) const {
  const Vector phases = (mu_ * (-s)).unaryExpr([](double x) { return std::polar(1.0, x); });
  return u_ * phases.asDiagonal() * u_.adjoint();
}

Matrix EffectiveDecomposition::frame(const Angles& theta) const {
  const Eigen::Index dim = H.dim();
  Matrix f = Matrix::Identity(dim, dim);
  for (const auto& a : generators) f = f * exp_antihermitian(a.at(theta));
  return f;
}

Matrix EffectiveDecomposition::frame_log(const Angles& theta) const {
  const Matrix f = frame(theta);
  Eigen::ComplexSchur<Matrix> schur(f);
  const Matrix& t = schur.matrixT();
  Vector logs(t.rows());
  for (Eigen::Index i = 0; i < t.rows(); ++i) logs(i) = Complex(0.0, std::arg(t(i, i)));
  Matrix l = schur.matrixU() * logs.asDiagonal() * schur.matrixU().adjoint();
  return 0.5 * (l - l.adjoint());
}

GridFamily EffectiveDecomposition::frame_grid(std::array<int, 2> sizes) const {
  GridFamily g(num_angles, sizes, H.dim());
  for (std::size_t i = 0; i < g.count(); ++i) g[i] = frame(g.angle(i));
  return g;
}

GridFamily EffectiveDecomposition::frame_log_grid(std::array<int, 2> sizes) const {
  GridFamily g(num_angles, sizes, H.dim());
  for (std::size_t i = 0; i < g.count(); ++i) g[i] = frame_log(g.angle(i));
  return g;
}

double compute_nu0(const ColoredPotential& H, double kappa0, double omega_max) {
  return std::max(2.0 * H.kappa_norm(kappa0), omega_max);
}

ColoredPotential canonical_potential(const ColoredPotential& H, const ChargeOperator* charge) {
  DecomposeOptions opt;
  opt.charge = charge;
  return decompose_modes(ModeFamily::from_potential(H), H.graph(), opt);
}

void write_ledger_csv(const EffectiveDecomposition& dec, std::ostream& os, bool quasi_columns) {
  os << "n,kappa_n,norm_D,norm_V,norm_A,hypothesis_ok,halving_ok";
  if (quasi_columns) os << ",twist_residual,d_theta1_variation,g_commutator_residual";
  os << "\n" << std::scientific << std::setprecision(12);
  for (const auto& s : dec.trace) {
    os << s.n << "," << s.kappa << "," << s.norm_D << "," << s.norm_V << "," << s.norm_A << ","
       << (s.hypothesis_ok ? 1 : 0) << "," << (s.halving_ok ? 1 : 0);
    if (quasi_columns) os << "," << s.twist_residual << "," << s.d_theta1_variation << "," << s.g_commutator_residual;
    os << "\n";
  }
  os << std::defaultfloat;
}

} // namespace prethermal
