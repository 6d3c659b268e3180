#pragma once

#include "prethermal/common.hpp"
#include "prethermal/site_graph.hpp"

#include <string_view>
#include <vector>

namespace prethermal {

/// Dense operator acting on an explicit, ascending list of sites.
class LocalOperator {
public:
  LocalOperator() = default;
  LocalOperator(std::vector<int> support, Matrix matrix, int local_dim = 2);

  static LocalOperator zero(std::vector<int> support, int local_dim = 2);
  static LocalOperator identity(std::vector<int> support, int local_dim = 2);

  const std::vector<int>& support() const { return support_; }
  SiteMask mask() const { return mask_; }
  const Matrix& matrix() const { return matrix_; }
  int local_dim() const { return local_dim_; }

  /// Same operator written on a superset of its support (identity on the rest).
  LocalOperator extended_to(SiteMask target) const;
  LocalOperator adjoint() const { return {support_, matrix_.adjoint(), local_dim_}; }

  LocalOperator& operator+=(const LocalOperator& other);
  LocalOperator& operator*=(Complex s) {
    matrix_ *= s;
    return *this;
  }

private:
  std::vector<int> support_;
  SiteMask mask_ = 0;
  Matrix matrix_;
  int local_dim_ = 2;
};

LocalOperator operator+(LocalOperator a, const LocalOperator& b);
LocalOperator operator-(LocalOperator a, const LocalOperator& b);
LocalOperator operator*(Complex s, LocalOperator a);

/// Rewrites `m`, given on `support`, as a matrix on `target` ⊇ `support`.
Matrix extend_matrix(const Matrix& m, const std::vector<int>& support,
                     const std::vector<int>& target, int local_dim);

/// Normalized partial trace onto `target` ⊆ support: the X with
/// op ≈ X ⊗ I. If `residual` is given it receives ‖op − X ⊗ I‖_max.
LocalOperator reduce_to(const LocalOperator& op, SiteMask target, double* residual = nullptr);

/// `op ⊗ I` on the full lattice in the graph's site order.
Matrix embed_operator(const LocalOperator& op, const SiteGraph& graph);

/// [a, b] on the union of supports; disjoint supports give zero without
/// forming any product.
LocalOperator commutator(const LocalOperator& a, const LocalOperator& b);

double op_norm(const LocalOperator& op);

/// Single-site Pauli matrix for 'I', 'X', 'Y', 'Z', '+', '-', 'n' (|1⟩⟨1| with
/// |0⟩ = spin up, so n = (1 - σz)/2), 'u' ((1 + σz)/2).
Matrix pauli(char label);

/// Tensor product of single-site Paulis, e.g. ({0, 2}, "XZ").
LocalOperator pauli_string(const std::vector<int>& sites, std::string_view labels);

/// Kronecker product a ⊗ b.
Matrix kron(const Matrix& a, const Matrix& b);

} // namespace prethermal
