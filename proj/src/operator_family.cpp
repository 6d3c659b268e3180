#include "prethermal/operator_family.hpp"

#include "prethermal/operator_basis.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <sstream>

namespace prethermal {

ModeFamily ModeFamily::from_potential(const ColoredPotential& phi) {
  const auto dim = static_cast<Eigen::Index>(phi.graph()->hilbert_dim());
  ModeFamily out(dim, phi.num_angles());
  for (const auto& [key, term] : phi.terms()) out.add(key.fourier, embed_operator(term.op, *phi.graph()));
  for (const auto& [n, c] : phi.constants()) out.add(n, c * Matrix::Identity(dim, dim));
  return out;
}

ModeFamily ModeFamily::constant(const Matrix& m, int num_angles) {
  ModeFamily out(m.rows(), num_angles);
  out.add({0, 0}, m);
  return out;
}

Matrix ModeFamily::mode(const Fourier& n) const {
  auto it = modes_.find(n);
  return it == modes_.end() ? Matrix::Zero(dim_, dim_) : it->second;
}

void ModeFamily::add(const Fourier& n, const Matrix& m) {
  if (m.rows() != dim_ || m.cols() != dim_) throw ValidationError("mode matrix dimension mismatch");
  if (num_angles_ == 1 && n[1] != 0) throw ValidationError("second Fourier component on a one-angle family");
  auto it = modes_.find(n);
  if (it == modes_.end())
    modes_.emplace(n, m);
  else
    it->second += m;
}

Matrix ModeFamily::at(const Angles& theta) const {
  Matrix out = Matrix::Zero(dim_, dim_);
  for (const auto& [n, m] : modes_) out += std::polar(1.0, n[0] * theta[0] + n[1] * theta[1]) * m;
  return out;
}

ModeFamily ModeFamily::derivative(int component) const {
  if (component < 0 || component >= num_angles_) throw ValidationError("invalid angle component");
  ModeFamily out(dim_, num_angles_);
  for (const auto& [n, m] : modes_) {
    const int k = n[static_cast<std::size_t>(component)];
    if (k != 0) out.modes_.emplace(n, Complex(0.0, k) * m);
  }
  return out;
}

int ModeFamily::max_order(int component) const {
  int best = 0;
  for (const auto& [n, m] : modes_) best = std::max(best, std::abs(n[static_cast<std::size_t>(component)]));
  return best;
}

double ModeFamily::weighted_norm(double kappa) const {
  double sum = 0.0;
  for (const auto& [n, m] : modes_) sum += std::exp(kappa * fourier_l1(n)) * m.norm();
  return sum;
}

double ModeFamily::coefficient_sum() const {
  double sum = 0.0;
  for (const auto& [n, m] : modes_) sum += m.norm();
  return sum;
}

void ModeFamily::prune(double tol) {
  for (auto it = modes_.begin(); it != modes_.end();) {
    if (it->second.norm() <= tol)
      it = modes_.erase(it);
    else
      ++it;
  }
}

ModeFamily& ModeFamily::operator+=(const ModeFamily& o) {
  if (dim_ == 0) {
    *this = o;
    return *this;
  }
  for (const auto& [n, m] : o.modes_) add(n, m);
  return *this;
}

ModeFamily& ModeFamily::operator-=(const ModeFamily& o) {
  if (dim_ == 0) {
    *this = o;
    return *this *= -1.0;
  }
  for (const auto& [n, m] : o.modes_) add(n, -m);
  return *this;
}

ModeFamily& ModeFamily::operator*=(Complex s) {
  for (auto& [n, m] : modes_) m *= s;
  return *this;
}

ModeFamily operator+(ModeFamily a, const ModeFamily& b) { return a += b; }
ModeFamily operator-(ModeFamily a, const ModeFamily& b) { return a -= b; }
ModeFamily operator*(Complex s, ModeFamily a) { return a *= s; }

GridFamily::GridFamily(int num_angles, std::array<int, 2> sizes, Eigen::Index dim)
    : num_angles_(num_angles), sizes_(sizes) {
  if (num_angles_ == 1) sizes_[1] = 1;
  if (sizes_[0] < 1 || sizes_[1] < 1) throw ValidationError("grid sizes must be positive");
  samples_.assign(static_cast<std::size_t>(sizes_[0]) * static_cast<std::size_t>(sizes_[1]), Matrix::Zero(dim, dim));
}

Angles GridFamily::angle(std::size_t idx) const {
  const auto i = static_cast<double>(idx / static_cast<std::size_t>(sizes_[1]));
  const auto j = static_cast<double>(idx % static_cast<std::size_t>(sizes_[1]));
  return {kTwoPi * i / sizes_[0], num_angles_ == 2 ? kTwoPi * j / sizes_[1] : 0.0};
}

GridFamily GridFamily::subsample() const {
  std::array<int, 2> step{1, 1}, half = sizes_;
  for (int a = 0; a < 2; ++a)
    if (sizes_[static_cast<std::size_t>(a)] > 1 && sizes_[static_cast<std::size_t>(a)] % 2 == 0) {
      step[static_cast<std::size_t>(a)] = 2;
      half[static_cast<std::size_t>(a)] /= 2;
    }
  const Eigen::Index dim = samples_.empty() ? 0 : samples_.front().rows();
  GridFamily out(num_angles_, half, dim);
  for (int i = 0; i < half[0]; ++i)
    for (int j = 0; j < half[1]; ++j)
      out.samples_[static_cast<std::size_t>(i * half[1] + j)] =
          samples_[static_cast<std::size_t>(i * step[0] * sizes_[1] + j * step[1])];
  return out;
}

namespace {

// In-place 1D transform of every matrix entry along one grid axis.
void transform_axis(std::vector<Matrix>& samples, const std::array<int, 2>& sizes, int axis, bool forward) {
  const int n = sizes[static_cast<std::size_t>(axis)];
  if (n == 1 || samples.empty()) return;
  const Eigen::Index entries = samples.front().size();
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<Complex> in(static_cast<std::size_t>(n)), out(static_cast<std::size_t>(n));
  const int other = sizes[static_cast<std::size_t>(1 - axis)];
  for (int line = 0; line < other; ++line) {
    auto index = [&](int k) {
      return static_cast<std::size_t>(axis == 0 ? k * sizes[1] + line : line * sizes[1] + k);
    };
    for (Eigen::Index e = 0; e < entries; ++e) {
      for (int k = 0; k < n; ++k) in[static_cast<std::size_t>(k)] = samples[index(k)].data()[e];
      if (forward)
        fft.fwd(out, in);
      else
        fft.inv(out, in);
      for (int k = 0; k < n; ++k) samples[index(k)].data()[e] = out[static_cast<std::size_t>(k)];
    }
  }
}

int wrap_index(int k, int n) { return ((k % n) + n) % n; }

} // namespace

GridFamily sample_grid(const ModeFamily& family, std::array<int, 2> sizes) {
  GridFamily grid(family.num_angles(), sizes, family.dim());
  const auto& sz = grid.sizes();
  for (int a = 0; a < family.num_angles(); ++a) {
    // Nyquist-order modes are representable (split evenly by grid_to_modes).
    const int need = 2 * family.max_order(a);
    if (sz[static_cast<std::size_t>(a)] < need && family.max_order(a) > 0) {
      std::ostringstream msg;
      msg << "grid of " << sz[static_cast<std::size_t>(a)] << " points along angle " << a
          << " cannot resolve Fourier order " << family.max_order(a);
      throw ValidationError(msg.str());
    }
  }
  for (const auto& [n, m] : family.modes()) {
    const int i = wrap_index(n[0], sz[0]);
    const int j = sz[1] == 1 ? 0 : wrap_index(n[1], sz[1]);
    grid[static_cast<std::size_t>(i * sz[1] + j)] += m;
  }
  transform_axis(grid.samples(), sz, 0, false);
  transform_axis(grid.samples(), sz, 1, false);
  return grid;
}

ModeFamily grid_to_modes(const GridFamily& grid) {
  std::vector<Matrix> data = grid.samples();
  const auto& sz = grid.sizes();
  transform_axis(data, sz, 0, true);
  transform_axis(data, sz, 1, true);
  const double scale = 1.0 / static_cast<double>(grid.count());
  const Eigen::Index dim = data.empty() ? 0 : data.front().rows();
  ModeFamily out(dim, grid.num_angles());
  // Frequencies for index k on an axis of n points; the Nyquist index maps to
  // both ±n/2 with half weight.
  auto freqs = [](int k, int n) -> std::vector<std::pair<int, double>> {
    if (n == 1) return {{0, 1.0}};
    if (2 * k == n) return {{n / 2, 0.5}, {-n / 2, 0.5}};
    return {{2 * k < n ? k : k - n, 1.0}};
  };
  for (int i = 0; i < sz[0]; ++i)
    for (int j = 0; j < sz[1]; ++j) {
      const Matrix& m = data[static_cast<std::size_t>(i * sz[1] + j)];
      for (auto [fi, wi] : freqs(i, sz[0]))
        for (auto [fj, wj] : freqs(j, sz[1])) out.add({fi, grid.num_angles() == 2 ? fj : 0}, (scale * wi * wj) * m);
    }
  return out;
}

ColoredPotential decompose_modes(const ModeFamily& family, GraphPtr graph, const DecomposeOptions& opt) {
  ColoredPotential phi(graph, family.num_angles());
  const int num_sites = graph->num_sites();
  const int d = graph->local_dim();
  const std::size_t d2 = static_cast<std::size_t>(d * d);
  const OperatorBasis basis(d);
  std::map<SiteMask, SiteMask> connected_cache;
  auto connect = [&](SiteMask m) {
    auto it = connected_cache.find(m);
    if (it == connected_cache.end()) it = connected_cache.emplace(m, graph->connected_superset(m)).first;
    return it->second;
  };

  double scale = opt.scale;
  if (scale <= 0.0)
    for (const auto& [n, m] : family.modes()) scale = std::max(scale, m.norm());
  const double prune_abs = opt.prune_rel * scale;

  for (const auto& [n, full] : family.modes()) {
    const std::vector<Complex> coeffs = basis.forward(full, num_sites);
    // support mask → (reduced index on the support, coefficient)
    std::map<SiteMask, std::vector<std::pair<std::size_t, Complex>>> groups;
    for (std::size_t idx = 0; idx < coeffs.size(); ++idx) {
      const Complex c = coeffs[idx];
      if (std::abs(c) <= prune_abs || c == Complex{}) continue;
      std::size_t rem = idx, reduced = 0, weight = 1;
      SiteMask mask = 0;
      for (int site = num_sites - 1; site >= 0; --site) {
        const std::size_t digit = rem % d2;
        rem /= d2;
        if (digit != 0) {
          mask |= SiteMask{1} << site;
          reduced += digit * weight;
          weight *= d2;
        }
      }
      groups[mask].emplace_back(reduced, c);
    }

    std::map<SiteMask, LocalOperator> zones;
    for (auto& [mask, entries] : groups) {
      if (mask == 0) {
        phi.add_constant(n, entries.front().second);
        continue;
      }
      const int k = popcount(mask);
      std::size_t size = 1;
      for (int i = 0; i < k; ++i) size *= d2;
      std::vector<Complex> local(size, Complex{});
      for (auto [r, c] : entries) local[r] = c;
      LocalOperator op(SiteGraph::sites_of(mask), basis.inverse(local, k), d);
      SiteMask zone = mask;
      if (opt.charge) zone = strong_support_zone(op, *opt.charge, opt.strong_support_tol * std::max(1.0, op_norm(op)));
      zone = connect(zone);
      auto it = zones.find(zone);
      if (it == zones.end())
        zones.emplace(zone, op.extended_to(zone));
      else
        it->second += op;
    }
    for (const auto& [zone, op] : zones) {
      if (op_norm(op) <= prune_abs) continue;
      phi.add(zone, n, op);
    }
  }
  return phi;
}

ColoredPotential decompose_to_potential(const GridFamily& grid, GraphPtr graph, const DecomposeOptions& opt,
                                        double kappa, double eps_alias, double alias_scale) {
  ColoredPotential phi = decompose_modes(grid_to_modes(grid), graph, opt);
  const GridFamily half = grid.subsample();
  if (half.count() < grid.count()) {
    const ColoredPotential coarse = decompose_modes(grid_to_modes(half), graph, opt);
    const double fine_norm = phi.kappa_norm(kappa);
    const double change = std::abs(fine_norm - coarse.kappa_norm(kappa));
    if (change > eps_alias * std::max(alias_scale, fine_norm)) {
      std::ostringstream msg;
      msg << "aliasing check failed: kappa-norm changes by " << change << " between grid and subsample";
      throw NumericalError(msg.str());
    }
  }
  return phi;
}

GridFamily assemble_grid(const ColoredPotential& phi, std::array<int, 2> sizes) {
  for (int a = 0; a < phi.num_angles(); ++a)
    if (phi.max_order(a) > 0 && sizes[static_cast<std::size_t>(a)] < 2 * phi.max_order(a) + 2)
      throw ValidationError("grid too small for the potential's Fourier content");
  return sample_grid(ModeFamily::from_potential(phi), sizes);
}

} // namespace prethermal
