#pragma once

#include "prethermal/common.hpp"

#include <vector>

namespace prethermal {

/// Expansion of lattice operators in products of single-site clock-and-shift
/// operators X^a Z^b (X|j⟩ = |j+1 mod d⟩, Z|j⟩ = e^{2πij/d}|j⟩). For d = 2
/// these are I, Z, X and XZ = -iY.
///
/// Coefficients are indexed by one base-d² digit per site, most significant
/// digit for site 0; digit 0 is the identity, so the support of a basis
/// string is the set of sites with a nonzero digit.
class OperatorBasis {
public:
  explicit OperatorBasis(int local_dim);

  int local_dim() const { return d_; }

  /// Coefficients of a d^L × d^L matrix.
  std::vector<Complex> forward(const Matrix& op, int num_sites) const;

  /// Matrix with the given coefficients; inverse of `forward`.
  Matrix inverse(const std::vector<Complex>& coeffs, int num_sites) const;

private:
  void transform(std::vector<Complex>& data, int num_sites, const Matrix& site_map) const;

  int d_;
  Matrix forward_site_;
  Matrix inverse_site_;
};

} // namespace prethermal
