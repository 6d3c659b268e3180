#pragma once

#include "prethermal/charge.hpp"
#include "prethermal/common.hpp"
#include "prethermal/local_operator.hpp"

#include <compare>
#include <iosfwd>
#include <map>

namespace prethermal {

/// (Z, n⃗): a connected zone of sites together with a Fourier index.
struct ColoredSet {
  SiteMask zone = 0;
  Fourier fourier{0, 0};

  auto operator<=>(const ColoredSet&) const = default;

  /// |Z| + |n⃗|₁.
  int size() const { return popcount(zone) + fourier_l1(fourier); }
  ColoredSet operator|(const ColoredSet& o) const {
    return {zone | o.zone, {fourier[0] + o.fourier[0], fourier[1] + o.fourier[1]}};
  }
  bool disjoint(const ColoredSet& o) const { return (zone & o.zone) == 0; }
};

/// Φ = {Φ_{Z,n⃗}}: operator family H(θ⃗) = Σ Φ_{Z,n⃗} e^{i n⃗·θ⃗}. Each term is
/// stored as a matrix on its full zone. Pure scalars (identity parts) are
/// kept separately per Fourier mode and do not enter the κ-norm.
class ColoredPotential {
public:
  struct Term {
    LocalOperator op;
    double norm = 0.0;
  };

  ColoredPotential() = default;
  ColoredPotential(GraphPtr graph, int num_angles);

  const GraphPtr& graph() const { return graph_; }
  int num_angles() const { return num_angles_; }
  const std::map<ColoredSet, Term>& terms() const { return terms_; }
  const std::map<Fourier, Complex>& constants() const { return constants_; }
  bool empty() const { return terms_.empty(); }

  /// Adds `op` to the term at (zone, n⃗). The zone must be connected and
  /// contain the operator's support.
  void add(SiteMask zone, const Fourier& n, const LocalOperator& op);
  void add_constant(const Fourier& n, Complex c);

  /// sup_x Σ_{(Z,n⃗): x∈Z} e^{κ(|Z|+|n⃗|)} ‖Φ_{Z,n⃗}‖.
  double kappa_norm(double kappa) const;

  /// Term (Z, n⃗) ↦ i n_c Φ_{Z,n⃗}.
  ColoredPotential theta_derivative(int component) const;

  /// Φ_{Z,−n⃗} = Φ_{Z,n⃗}† for all terms (and scalars).
  bool is_hermitian(double tol = 1e-12) const;

  /// Full-space matrix H(θ⃗).
  Matrix assemble(const Angles& theta) const;

  /// Full-space matrix of the n⃗ Fourier coefficient Σ_Z Φ_{Z,n⃗}.
  Matrix mode_matrix(const Fourier& n) const;

  int max_order(int component) const;

  ColoredPotential& operator+=(const ColoredPotential& o);
  ColoredPotential& operator*=(Complex s);

  /// CSV dump: header `zone,n1,n2,dim,entries`; `zone` is a space-separated
  /// site list (empty for scalars), `entries` the row-major matrix as
  /// space-separated `re:im` pairs.
  void write_csv(std::ostream& os) const;

private:
  GraphPtr graph_;
  int num_angles_ = 1;
  std::map<ColoredSet, Term> terms_;
  std::map<Fourier, Complex> constants_;
};

ColoredPotential operator+(ColoredPotential a, const ColoredPotential& b);
ColoredPotential operator*(Complex s, ColoredPotential a);

/// Termwise ⟨·⟩: keeps the ad_N zero modes of each term.
ColoredPotential symmetrize_potential(const ColoredPotential& phi, const ChargeOperator& charge);

} // namespace prethermal
