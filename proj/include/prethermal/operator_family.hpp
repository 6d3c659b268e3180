#pragma once

#include "prethermal/charge.hpp"
#include "prethermal/colored_potential.hpp"
#include "prethermal/common.hpp"

#include <map>
#include <vector>

namespace prethermal {

/// Full-space Fourier representation H(θ⃗) = Σ_n⃗ M_n⃗ e^{i n⃗·θ⃗}. This is the
/// working form of the renormalization engines; colored potentials are
/// derived from it for norm bookkeeping.
class ModeFamily {
public:
  ModeFamily() = default;
  ModeFamily(Eigen::Index dim, int num_angles) : dim_(dim), num_angles_(num_angles) {}

  static ModeFamily from_potential(const ColoredPotential& phi);
  static ModeFamily constant(const Matrix& m, int num_angles);

  Eigen::Index dim() const { return dim_; }
  int num_angles() const { return num_angles_; }
  const std::map<Fourier, Matrix>& modes() const { return modes_; }
  bool empty() const { return modes_.empty(); }

  /// Coefficient of mode n (zero if absent).
  Matrix mode(const Fourier& n) const;
  void add(const Fourier& n, const Matrix& m);

  Matrix at(const Angles& theta) const;
  ModeFamily derivative(int component) const;
  int max_order(int component) const;

  /// Σ_n⃗ e^{κ|n⃗|₁} ‖M_n⃗‖_F — cheap Fourier-decay proxy used for aliasing checks.
  double weighted_norm(double kappa) const;
  /// max_θ ‖H(θ)‖ bounded by Σ‖M_n⃗‖ (Frobenius).
  double coefficient_sum() const;

  /// Drop modes whose Frobenius norm is below `tol`.
  void prune(double tol);

  ModeFamily& operator+=(const ModeFamily& o);
  ModeFamily& operator-=(const ModeFamily& o);
  ModeFamily& operator*=(Complex s);

private:
  Eigen::Index dim_ = 0;
  int num_angles_ = 1;
  std::map<Fourier, Matrix> modes_;
};

ModeFamily operator+(ModeFamily a, const ModeFamily& b);
ModeFamily operator-(ModeFamily a, const ModeFamily& b);
ModeFamily operator*(Complex s, ModeFamily a);

/// Samples on the uniform grid θ_j = 2π j / N per angle. Index (i, j) is
/// stored at i·sizes[1] + j; one-angle grids have sizes[1] = 1.
class GridFamily {
public:
  GridFamily() = default;
  GridFamily(int num_angles, std::array<int, 2> sizes, Eigen::Index dim);

  int num_angles() const { return num_angles_; }
  const std::array<int, 2>& sizes() const { return sizes_; }
  std::size_t count() const { return samples_.size(); }
  Angles angle(std::size_t idx) const;

  Matrix& operator[](std::size_t idx) { return samples_[idx]; }
  const Matrix& operator[](std::size_t idx) const { return samples_[idx]; }
  std::vector<Matrix>& samples() { return samples_; }
  const std::vector<Matrix>& samples() const { return samples_; }

  /// Every other grid point along each angle with more than one point.
  GridFamily subsample() const;

private:
  int num_angles_ = 1;
  std::array<int, 2> sizes_{1, 1};
  std::vector<Matrix> samples_;
};

/// Evaluate a mode family on the grid (inverse FFT). Throws if the grid does
/// not resolve the family's Fourier content (N < 2·max|n|).
GridFamily sample_grid(const ModeFamily& family, std::array<int, 2> sizes);

/// Fourier coefficients of a sampled family (forward FFT). The Nyquist mode is
/// split evenly between ±N/2 so Hermitian families stay Hermitian.
ModeFamily grid_to_modes(const GridFamily& grid);

struct DecomposeOptions {
  /// Basis coefficients and zone terms below prune_rel·scale are dropped;
  /// scale ≤ 0 means the largest mode's Frobenius norm.
  double prune_rel = 1e-14;
  double scale = 0.0;
  /// If set, zones are enlarged to a strong support of this charge.
  const ChargeOperator* charge = nullptr;
  double strong_support_tol = 1e-12;
};

/// Basis-string expansion per mode, strings grouped by support, each group
/// assigned to a connected (and optionally strongly supported) zone.
ColoredPotential decompose_modes(const ModeFamily& family, GraphPtr graph, const DecomposeOptions& opt = {});

/// Grid → potential. The aliasing check compares κ-norms of the potential
/// from the full grid and from its subsample; a change above
/// eps_alias·max(alias_scale, norm) throws NumericalError.
ColoredPotential decompose_to_potential(const GridFamily& grid, GraphPtr graph, const DecomposeOptions& opt = {},
                                        double kappa = 1.0, double eps_alias = 1e-9, double alias_scale = 1.0);

/// H_Φ on the grid. Throws if the grid is too small for the potential.
GridFamily assemble_grid(const ColoredPotential& phi, std::array<int, 2> sizes);

} // namespace prethermal
