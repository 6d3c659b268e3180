#include "prethermal/charge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace prethermal {

namespace {

struct ShiftFit {
  double shift = 0.0;     // subtract from the spectrum
  double deviation = 0.0; // max distance to an integer afterwards
};

// Uniform shift s minimizing max_i dist(λ_i − s, Z): the fractional parts lie
// on a circle; the best s is the midpoint of the arc left after removing the
// largest gap.
ShiftFit best_integer_shift(const RealVector& values) {
  std::vector<double> frac(static_cast<std::size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) frac[static_cast<std::size_t>(i)] = values(i) - std::floor(values(i));
  std::sort(frac.begin(), frac.end());
  if (frac.empty()) return {};
  double best_gap = frac.front() + 1.0 - frac.back();
  std::size_t start = 0; // first point after the largest gap
  for (std::size_t i = 1; i < frac.size(); ++i) {
    const double gap = frac[i] - frac[i - 1];
    if (gap > best_gap) {
      best_gap = gap;
      start = i;
    }
  }
  const double width = 1.0 - best_gap;
  double centre = frac[start] + 0.5 * width;
  centre -= std::round(centre);
  return {centre, 0.5 * width};
}

double max_integer_deviation(const RealVector& values) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) dev = std::max(dev, std::abs(values(i) - std::round(values(i))));
  return dev;
}

} // namespace

ChargeOperator validate_charge(std::vector<LocalOperator> terms, GraphPtr graph, double tol) {
  if (!graph) throw ValidationError("charge needs a graph");
  ChargeOperator out;
  out.graph_ = graph;
  const SiteMask all = graph->all_sites();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    if ((t.mask() & ~all) != 0) throw ValidationError("charge term " + std::to_string(i) + " lies outside the graph");
    if (t.local_dim() != graph->local_dim()) throw ValidationError("charge term local dimension mismatch");
    if ((t.matrix() - t.matrix().adjoint()).norm() > tol)
      throw ValidationError("charge term " + std::to_string(i) + " is not Hermitian");
  }
  for (std::size_t i = 0; i < terms.size(); ++i)
    for (std::size_t j = i + 1; j < terms.size(); ++j) {
      const double r = op_norm(commutator(terms[i], terms[j]));
      if (r > 1e-12 * std::max(1.0, op_norm(terms[i]) * op_norm(terms[j]))) {
        std::ostringstream msg;
        msg << "charge terms " << i << " and " << j << " do not commute (residual " << r << ")";
        throw ValidationError(msg.str());
      }
    }

  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    Eigen::SelfAdjointEigenSolver<Matrix> es(t.matrix(), Eigen::EigenvaluesOnly);
    const RealVector& ev = es.eigenvalues();
    double shift = 0.0;
    if (max_integer_deviation(ev) > tol) {
      out.integer_spectrum_ = false;
      const ShiftFit fit = best_integer_shift(ev);
      if (fit.deviation > tol) {
        std::ostringstream msg;
        msg << "charge term " << i << " has non-integer eigenvalue spacings (deviation " << fit.deviation << ")";
        throw ValidationError(msg.str());
      }
      shift = fit.shift;
    }
    LocalOperator shifted = t;
    if (shift != 0.0) shifted = t - shift * LocalOperator::identity(t.support(), t.local_dim());
    const double norm = op_norm(shifted);
    out.term_bound_ = std::max(out.term_bound_, norm);
    if (norm > tol) out.range_ = std::max(out.range_, graph->diameter(t.mask()) + 1);
    out.offset_ += shift;
    out.shifts_.push_back(shift);
    out.terms_.push_back(std::move(shifted));
  }
  out.raw_terms_ = std::move(terms);

  const auto dim = static_cast<Eigen::Index>(graph->hilbert_dim());
  out.full_ = Matrix::Zero(dim, dim);
  for (const auto& t : out.terms_) out.full_ += embed_operator(t, *graph);
  return out;
}

ChargeOperator charge_preset(const std::string& name, GraphPtr graph) {
  if (graph->local_dim() != 2) throw ValidationError("charge presets are defined for qubits");
  std::vector<LocalOperator> terms;
  if (name == "number") {
    for (int i = 0; i < graph->num_sites(); ++i) terms.emplace_back(std::vector<int>{i}, pauli('u'));
  } else if (name == "domain-wall") {
    const Matrix bond = 0.5 * (Matrix::Identity(4, 4) - kron(pauli('Z'), pauli('Z')));
    for (auto [a, b] : graph->edges()) terms.emplace_back(std::vector<int>{std::min(a, b), std::max(a, b)}, bond);
  } else if (name == "rydberg-bond") {
    const Matrix bond = kron(pauli('n'), pauli('n'));
    for (auto [a, b] : graph->edges()) terms.emplace_back(std::vector<int>{std::min(a, b), std::max(a, b)}, bond);
  } else {
    throw ValidationError("unknown charge preset '" + name + "'");
  }
  return validate_charge(std::move(terms), std::move(graph));
}

ChargeBasis::ChargeBasis(const ChargeOperator& charge) {
  const Matrix& n = charge.full_matrix();
  const Eigen::Index dim = n.rows();
  Matrix off = n;
  off.diagonal().setZero();
  diagonal_ = off.cwiseAbs().maxCoeff() < 1e-14;
  RealVector ev;
  if (diagonal_) {
    ev = n.diagonal().real();
    unitary_ = Matrix::Identity(dim, dim);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(n);
    ev = es.eigenvalues();
    unitary_ = es.eigenvectors();
  }
  values_.resize(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double r = std::round(ev(i));
    if (std::abs(ev(i) - r) > 1e-8) throw ValidationError("charge spectrum is not integer");
    values_[static_cast<std::size_t>(i)] = static_cast<int>(r);
  }
}

Matrix ChargeBasis::to_eigenbasis(const Matrix& op) const {
  return diagonal_ ? op : Matrix(unitary_.adjoint() * op * unitary_);
}

Matrix ChargeBasis::from_eigenbasis(const Matrix& op) const {
  return diagonal_ ? op : Matrix(unitary_ * op * unitary_.adjoint());
}

Matrix ChargeBasis::filter(const Matrix& op, const std::function<Complex(int)>& f) const {
  const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
  const int span = *hi - *lo;
  std::vector<Complex> table(static_cast<std::size_t>(2 * span + 1));
  for (int m = -span; m <= span; ++m) table[static_cast<std::size_t>(m + span)] = f(m);
  Matrix t = to_eigenbasis(op);
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      t(r, c) *= table[static_cast<std::size_t>(values_[static_cast<std::size_t>(r)] - values_[static_cast<std::size_t>(c)] + span)];
  return from_eigenbasis(t);
}

Matrix ChargeBasis::symmetrize(const Matrix& op) const {
  return filter(op, [](int m) { return m == 0 ? Complex{1.0} : Complex{}; });
}

std::map<int, Matrix> ChargeBasis::components(const Matrix& op) const {
  std::map<int, Matrix> out;
  const Matrix t = to_eigenbasis(op);
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      if (t(r, c) == Complex{}) continue;
      const int m = values_[static_cast<std::size_t>(r)] - values_[static_cast<std::size_t>(c)];
      auto it = out.find(m);
      if (it == out.end()) it = out.emplace(m, Matrix::Zero(t.rows(), t.cols())).first;
      it->second(r, c) = t(r, c);
    }
  for (auto& [m, mat] : out) mat = from_eigenbasis(mat);
  return out;
}

AdChargeDecomposition ad_charge_decompose(const LocalOperator& op, const ChargeOperator& charge, double tol) {
  SiteMask region = op.mask();
  std::vector<const LocalOperator*> overlapping;
  for (const auto& t : charge.terms())
    if ((t.mask() & op.mask()) != 0) {
      overlapping.push_back(&t);
      region |= t.mask();
    }
  const auto sites = SiteGraph::sites_of(region);
  const int d = op.local_dim();
  const LocalOperator ext = op.extended_to(region);
  Matrix n_local = Matrix::Zero(ext.matrix().rows(), ext.matrix().cols());
  for (const auto* t : overlapping) n_local += t->extended_to(region).matrix();

  Eigen::SelfAdjointEigenSolver<Matrix> es(n_local);
  const RealVector& ev = es.eigenvalues();
  if (max_integer_deviation(ev) > 1e-8) throw ValidationError("local charge spectrum is not integer");
  const Matrix& u = es.eigenvectors();
  const Matrix t = u.adjoint() * ext.matrix() * u;

  const int cap = static_cast<int>(std::ceil(charge.term_bound() * static_cast<double>(overlapping.size()) - 1e-9));
  AdChargeDecomposition out;
  std::map<int, Matrix> blocks;
  for (Eigen::Index c = 0; c < t.cols(); ++c)
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      const int m = static_cast<int>(std::lround(ev(r) - ev(c)));
      auto it = blocks.find(m);
      if (it == blocks.end()) it = blocks.emplace(m, Matrix::Zero(t.rows(), t.cols())).first;
      it->second(r, c) = t(r, c);
    }
  for (auto& [m, block] : blocks) {
    Matrix back = u * block * u.adjoint();
    if (back.norm() <= tol) continue;
    if (std::abs(m) > 2 * cap + 1) throw NumericalError("ad_N component outside the expected range");
    out.components.emplace(m, LocalOperator(sites, std::move(back), d));
  }
  return out;
}

StrongSupportCertificate validate_strong_support(const LocalOperator& op, const ChargeOperator& charge, double tol) {
  StrongSupportCertificate cert{op, {}, true};
  const auto& terms = charge.terms();
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if ((terms[i].mask() & ~op.mask()) == 0) continue; // S′ ⊆ S
    const double r = op_norm(commutator(op, terms[i]));
    cert.residuals.emplace_back(i, r);
    if (r > tol) cert.valid = false;
  }
  return cert;
}

SiteMask strong_support_zone(const LocalOperator& op, const ChargeOperator& charge, double tol) {
  SiteMask zone = op.mask();
  for (const auto& t : charge.terms()) {
    if ((t.mask() & op.mask()) == 0 || (t.mask() & ~op.mask()) == 0) continue;
    if (op_norm(commutator(op, t)) > tol) zone |= t.mask();
  }
  return zone;
}

Matrix group_generator(const ChargeOperator& charge, int n, double tol) {
  if (n < 1) throw ValidationError("group order must be positive");
  const Matrix g = exp_hermitian(charge.full_matrix(), -kTwoPi / n);
  Matrix power = Matrix::Identity(g.rows(), g.cols());
  for (int k = 0; k < n; ++k) power = power * g;
  const double residual = spectral_norm(power - Matrix::Identity(g.rows(), g.cols()));
  if (residual > tol) {
    std::ostringstream msg;
    msg << "g^" << n << " differs from identity by " << residual;
    throw NumericalError(msg.str());
  }
  return g;
}

Matrix dress_charge(const ChargeOperator& charge, const Matrix& frame, double tol) {
  if (spectral_norm(frame + frame.adjoint()) > tol * std::max(1.0, spectral_norm(frame)))
    throw ValidationError("dressing frame is not antihermitian");
  const Matrix u = exp_antihermitian(frame);
  Matrix out = u * charge.full_matrix() * u.adjoint();
  return 0.5 * (out + out.adjoint());
}

} // namespace prethermal
