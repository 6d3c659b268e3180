#include "prethermal/colored_potential.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace prethermal {

ColoredPotential::ColoredPotential(GraphPtr graph, int num_angles)
    : graph_(std::move(graph)), num_angles_(num_angles) {
  if (!graph_) throw ValidationError("potential needs a graph");
  if (num_angles_ != 1 && num_angles_ != 2) throw ValidationError("potentials carry one or two angles");
}

void ColoredPotential::add(SiteMask zone, const Fourier& n, const LocalOperator& op) {
  if ((op.mask() & ~zone) != 0) throw ValidationError("term support must lie inside its zone");
  if (zone == 0) throw ValidationError("empty zone; add scalars with add_constant");
  if ((zone & ~graph_->all_sites()) != 0) throw ValidationError("zone outside the graph");
  if (!graph_->is_connected(zone)) throw ValidationError("zone is not connected");
  if (num_angles_ == 1 && n[1] != 0) throw ValidationError("second Fourier component on a one-angle potential");
  const ColoredSet key{zone, n};
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    LocalOperator ext = op.extended_to(zone);
    const double norm = op_norm(ext);
    terms_.emplace(key, Term{std::move(ext), norm});
  } else {
    it->second.op += op;
    it->second.norm = op_norm(it->second.op);
  }
}

void ColoredPotential::add_constant(const Fourier& n, Complex c) { constants_[n] += c; }

double ColoredPotential::kappa_norm(double kappa) const {
  if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
  std::vector<double> per_site(static_cast<std::size_t>(graph_->num_sites()), 0.0);
  for (const auto& [key, term] : terms_) {
    const double w = std::exp(kappa * key.size()) * term.norm;
    for (int s : term.op.support()) per_site[static_cast<std::size_t>(s)] += w;
  }
  double best = 0.0;
  for (double v : per_site) best = std::max(best, v);
  return best;
}

ColoredPotential ColoredPotential::theta_derivative(int component) const {
  if (component < 0 || component >= num_angles_) throw ValidationError("invalid angle component");
  ColoredPotential out(graph_, num_angles_);
  for (const auto& [key, term] : terms_) {
    const int k = key.fourier[static_cast<std::size_t>(component)];
    if (k == 0) continue;
    out.terms_.emplace(key, Term{Complex(0.0, k) * term.op, std::abs(k) * term.norm});
  }
  for (const auto& [n, c] : constants_) {
    const int k = n[static_cast<std::size_t>(component)];
    if (k != 0) out.constants_[n] = Complex(0.0, k) * c;
  }
  return out;
}

bool ColoredPotential::is_hermitian(double tol) const {
  for (const auto& [key, term] : terms_) {
    auto it = terms_.find(ColoredSet{key.zone, negate(key.fourier)});
    const double scale = std::max(1.0, term.norm);
    if (it == terms_.end()) {
      if (term.norm > tol * scale) return false;
      continue;
    }
    if ((it->second.op.matrix() - term.op.matrix().adjoint()).cwiseAbs().maxCoeff() > tol * scale) return false;
  }
  for (const auto& [n, c] : constants_) {
    auto it = constants_.find(negate(n));
    const Complex partner = it == constants_.end() ? Complex{} : it->second;
    if (std::abs(partner - std::conj(c)) > tol * std::max(1.0, std::abs(c))) return false;
  }
  return true;
}

Matrix ColoredPotential::assemble(const Angles& theta) const {
  const auto dim = static_cast<Eigen::Index>(graph_->hilbert_dim());
  Matrix out = Matrix::Zero(dim, dim);
  for (const auto& [key, term] : terms_) {
    const Complex phase = std::polar(1.0, key.fourier[0] * theta[0] + key.fourier[1] * theta[1]);
    out += phase * embed_operator(term.op, *graph_);
  }
  for (const auto& [n, c] : constants_)
    out.diagonal().array() += c * std::polar(1.0, n[0] * theta[0] + n[1] * theta[1]);
  return out;
}

Matrix ColoredPotential::mode_matrix(const Fourier& n) const {
  const auto dim = static_cast<Eigen::Index>(graph_->hilbert_dim());
  Matrix out = Matrix::Zero(dim, dim);
  for (const auto& [key, term] : terms_)
    if (key.fourier == n) out += embed_operator(term.op, *graph_);
  if (auto it = constants_.find(n); it != constants_.end()) out.diagonal().array() += it->second;
  return out;
}

int ColoredPotential::max_order(int component) const {
  int best = 0;
  for (const auto& [key, term] : terms_) best = std::max(best, std::abs(key.fourier[static_cast<std::size_t>(component)]));
  for (const auto& [n, c] : constants_) best = std::max(best, std::abs(n[static_cast<std::size_t>(component)]));
  return best;
}

ColoredPotential& ColoredPotential::operator+=(const ColoredPotential& o) {
  if (!graph_) {
    *this = o;
    return *this;
  }
  for (const auto& [key, term] : o.terms_) add(key.zone, key.fourier, term.op);
  for (const auto& [n, c] : o.constants_) constants_[n] += c;
  return *this;
}

ColoredPotential& ColoredPotential::operator*=(Complex s) {
  for (auto& [key, term] : terms_) {
    term.op *= s;
    term.norm *= std::abs(s);
  }
  for (auto& [n, c] : constants_) c *= s;
  return *this;
}

ColoredPotential operator+(ColoredPotential a, const ColoredPotential& b) { return a += b; }
ColoredPotential operator*(Complex s, ColoredPotential a) { return a *= s; }

void ColoredPotential::write_csv(std::ostream& os) const {
  os << "zone,n1,n2,dim,entries\n";
  os << std::setprecision(17);
  for (const auto& [n, c] : constants_) os << "," << n[0] << "," << n[1] << ",1," << c.real() << ":" << c.imag() << "\n";
  for (const auto& [key, term] : terms_) {
    const auto& sites = term.op.support();
    for (std::size_t i = 0; i < sites.size(); ++i) os << (i ? " " : "") << sites[i];
    const Matrix& m = term.op.matrix();
    os << "," << key.fourier[0] << "," << key.fourier[1] << "," << m.rows() << ",";
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        os << ((r || c) ? " " : "") << m(r, c).real() << ":" << m(r, c).imag();
    os << "\n";
  }
}

ColoredPotential symmetrize_potential(const ColoredPotential& phi, const ChargeOperator& charge) {
  ColoredPotential out(phi.graph(), phi.num_angles());
  for (const auto& [key, term] : phi.terms()) {
    auto dec = ad_charge_decompose(term.op, charge, 0.0);
    auto it = dec.components.find(0);
    if (it == dec.components.end()) continue;
    // ⟨·⟩ preserves strong support, so the zero mode normally reduces back
    // onto the zone; otherwise the zone grows to cover it.
    SiteMask zone = key.zone;
    double residual = 0.0;
    LocalOperator zero = reduce_to(it->second, it->second.mask() & zone, &residual);
    if (residual > 1e-13 * std::max(1.0, term.norm)) {
      zero = it->second;
      zone = phi.graph()->connected_superset(zone | zero.mask());
    }
    out.add(zone, key.fourier, zero);
  }
  for (const auto& [n, c] : phi.constants()) out.add_constant(n, c);
  return out;
}

} // namespace prethermal
