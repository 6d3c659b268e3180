#pragma once

#include "prethermal/common.hpp"
#include "prethermal/local_operator.hpp"
#include "prethermal/site_graph.hpp"

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace prethermal {

using GraphPtr = std::shared_ptr<const SiteGraph>;

/// A sum of mutually commuting local terms with integer spectrum (after a
/// per-term shift). Build one with `validate_charge`.
class ChargeOperator {
public:
  const GraphPtr& graph() const { return graph_; }

  /// Shifted terms N_S − s_S·I, each with integer spectrum when
  /// `integer_spectrum()` holds.
  const std::vector<LocalOperator>& terms() const { return terms_; }
  /// Terms exactly as supplied.
  const std::vector<LocalOperator>& raw_terms() const { return raw_terms_; }
  const std::vector<double>& term_shifts() const { return shifts_; }

  /// Number of sites spanned by the widest term (diameter + 1).
  int range() const { return range_; }
  /// sup_S ‖N_S‖ over the shifted terms.
  double term_bound() const { return term_bound_; }
  /// Σ_S s_S: the full raw operator equals `full_matrix()` + offset·I.
  double spectrum_offset() const { return offset_; }

  /// Every raw term already has integer eigenvalues.
  bool integer_spectrum() const { return integer_spectrum_; }
  /// Every term has integer eigenvalue spacings (integer after its shift).
  bool integer_spacings() const { return integer_spacings_; }

  /// Embedded shifted charge on the full lattice.
  const Matrix& full_matrix() const { return full_; }

private:
  friend ChargeOperator validate_charge(std::vector<LocalOperator>, GraphPtr, double);

  GraphPtr graph_;
  std::vector<LocalOperator> raw_terms_;
  std::vector<LocalOperator> terms_;
  std::vector<double> shifts_;
  int range_ = 0;
  double term_bound_ = 0.0;
  double offset_ = 0.0;
  bool integer_spectrum_ = true;
  bool integer_spacings_ = true;
  Matrix full_;
};

/// Checks mutual commutation and integer spectrum, and computes R, n₀ and the
/// spectrum offset. Throws ValidationError naming the offending term(s).
ChargeOperator validate_charge(std::vector<LocalOperator> terms, GraphPtr graph, double tol = 1e-10);

/// "number" Σ(1+σz)/2, "domain-wall" Σ_⟨ij⟩(1−σzσz)/2, "rydberg-bond" Σ_⟨ij⟩ n_i n_j.
ChargeOperator charge_preset(const std::string& name, GraphPtr graph);

/// Simultaneous eigenbasis of the full charge: N = U diag(n) U†.
class ChargeBasis {
public:
  explicit ChargeBasis(const ChargeOperator& charge);

  /// True when N is diagonal in the computational basis (U = I).
  bool diagonal() const { return diagonal_; }
  const std::vector<int>& eigenvalues() const { return values_; }
  const Matrix& unitary() const { return unitary_; }

  Matrix to_eigenbasis(const Matrix& op) const;
  Matrix from_eigenbasis(const Matrix& op) const;

  /// Σ_m f(m) O^{(m)} where [N, O^{(m)}] = m O^{(m)}.
  Matrix filter(const Matrix& op, const std::function<Complex(int)>& f) const;
  /// ⟨O⟩: the m = 0 component.
  Matrix symmetrize(const Matrix& op) const;
  std::map<int, Matrix> components(const Matrix& op) const;

private:
  bool diagonal_ = true;
  std::vector<int> values_;
  Matrix unitary_;
};

/// ad_N eigencomponents V^{(m)}, computed on the region covered by the
/// operator and every charge term overlapping it.
struct AdChargeDecomposition {
  std::map<int, LocalOperator> components;
};

AdChargeDecomposition ad_charge_decompose(const LocalOperator& op, const ChargeOperator& charge, double tol = 1e-12);

struct StrongSupportCertificate {
  LocalOperator op;
  /// (charge term index, ‖[O, N_S′]‖) for every term with S′ ⊄ S.
  std::vector<std::pair<std::size_t, double>> residuals;
  bool valid = true;
};

StrongSupportCertificate validate_strong_support(const LocalOperator& op, const ChargeOperator& charge,
                                                 double tol = 1e-12);

/// Smallest zone ⊇ `mask` in which `op` (supported on `mask`) is strongly
/// supported: adds every charge term that overlaps and fails to commute.
SiteMask strong_support_zone(const LocalOperator& op, const ChargeOperator& charge, double tol);

/// g = e^{i2πN/n}; checks g^n = I.
Matrix group_generator(const ChargeOperator& charge, int n, double tol = 1e-10);

/// e^{A} N e^{−A}; A must be antihermitian.
Matrix dress_charge(const ChargeOperator& charge, const Matrix& frame, double tol = 1e-12);

} // namespace prethermal
