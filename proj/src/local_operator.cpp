#include "prethermal/local_operator.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace prethermal {

namespace {

std::size_t ipow(int base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

} // namespace

LocalOperator::LocalOperator(std::vector<int> support, Matrix matrix, int local_dim)
    : support_(std::move(support)), matrix_(std::move(matrix)), local_dim_(local_dim) {
  if (!std::is_sorted(support_.begin(), support_.end()) ||
      std::adjacent_find(support_.begin(), support_.end()) != support_.end())
    throw ValidationError("operator support must be strictly increasing");
  for (int s : support_)
    if (s < 0 || s >= 31) throw ValidationError("site index out of range");
  const std::size_t dim = ipow(local_dim_, support_.size());
  if (static_cast<std::size_t>(matrix_.rows()) != dim || static_cast<std::size_t>(matrix_.cols()) != dim) {
    std::ostringstream msg;
    msg << "operator matrix is " << matrix_.rows() << "x" << matrix_.cols() << ", support needs " << dim;
    throw ValidationError(msg.str());
  }
  mask_ = SiteGraph::mask_of(support_);
}

LocalOperator LocalOperator::zero(std::vector<int> support, int local_dim) {
  const auto dim = static_cast<Eigen::Index>(ipow(local_dim, support.size()));
  return {std::move(support), Matrix::Zero(dim, dim), local_dim};
}

LocalOperator LocalOperator::identity(std::vector<int> support, int local_dim) {
  const auto dim = static_cast<Eigen::Index>(ipow(local_dim, support.size()));
  return {std::move(support), Matrix::Identity(dim, dim), local_dim};
}

LocalOperator LocalOperator::extended_to(SiteMask target) const {
  if ((mask_ & ~target) != 0) throw ValidationError("extension target must contain the support");
  if (target == mask_) return *this;
  auto sites = SiteGraph::sites_of(target);
  Matrix m = extend_matrix(matrix_, support_, sites, local_dim_);
  return {std::move(sites), std::move(m), local_dim_};
}

LocalOperator& LocalOperator::operator+=(const LocalOperator& other) {
  if (local_dim_ != other.local_dim_) throw ValidationError("local dimension mismatch");
  if (other.mask_ == mask_) {
    matrix_ += other.matrix_;
    return *this;
  }
  const SiteMask u = mask_ | other.mask_;
  LocalOperator lhs = extended_to(u);
  lhs.matrix_ += other.extended_to(u).matrix_;
  *this = std::move(lhs);
  return *this;
}

LocalOperator operator+(LocalOperator a, const LocalOperator& b) { return a += b; }
LocalOperator operator-(LocalOperator a, const LocalOperator& b) {
  LocalOperator nb = b;
  nb *= -1.0;
  return a += nb;
}
LocalOperator operator*(Complex s, LocalOperator a) { return a *= s; }

Matrix extend_matrix(const Matrix& m, const std::vector<int>& support, const std::vector<int>& target,
                     int local_dim) {
  const std::size_t nt = target.size();
  // Position of each support site inside `target`, and the digit weights of
  // target positions (most significant first).
  std::vector<int> in_support(nt, -1);
  for (std::size_t k = 0; k < support.size(); ++k) {
    auto it = std::find(target.begin(), target.end(), support[k]);
    if (it == target.end()) throw ValidationError("support not contained in target");
    in_support[static_cast<std::size_t>(it - target.begin())] = static_cast<int>(k);
  }
  const std::size_t ns = support.size();
  const std::size_t dim_t = ipow(local_dim, nt);
  const std::size_t dim_s = ipow(local_dim, ns);
  const std::size_t dim_c = dim_t / dim_s;

  // sub[i]: support digits of target index i; comp[i]: complement digits.
  std::vector<std::size_t> sub(dim_t), comp(dim_t);
  std::vector<std::size_t> compose(dim_c * dim_s);
  for (std::size_t idx = 0; idx < dim_t; ++idx) {
    std::size_t rem = idx, s = 0, c = 0;
    std::array<int, 32> digits{};
    for (std::size_t p = nt; p-- > 0;) {
      digits[p] = static_cast<int>(rem % local_dim);
      rem /= local_dim;
    }
    for (std::size_t p = 0; p < nt; ++p) {
      if (in_support[p] >= 0)
        s = s * local_dim + digits[p];
      else
        c = c * local_dim + digits[p];
    }
    // The support digits are accumulated in target order; support is sorted
    // and so is target, hence this matches the operator's own digit order.
    sub[idx] = s;
    comp[idx] = c;
    compose[c * dim_s + s] = idx;
  }
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dim_t), static_cast<Eigen::Index>(dim_t));
  for (std::size_t col = 0; col < dim_t; ++col) {
    const std::size_t c = comp[col], cs = sub[col];
    for (std::size_t rs = 0; rs < dim_s; ++rs) {
      const Complex v = m(static_cast<Eigen::Index>(rs), static_cast<Eigen::Index>(cs));
      if (v != Complex{}) out(static_cast<Eigen::Index>(compose[c * dim_s + rs]), static_cast<Eigen::Index>(col)) = v;
    }
  }
  return out;
}

LocalOperator reduce_to(const LocalOperator& op, SiteMask target, double* residual) {
  if ((target & ~op.mask()) != 0) throw ValidationError("reduction target must lie inside the support");
  const auto tsites = SiteGraph::sites_of(target);
  const int d = op.local_dim();
  const std::size_t ns = op.support().size();
  const std::size_t dim_s = ipow(d, ns);
  const std::size_t dim_t = ipow(d, tsites.size());
  const std::size_t dim_c = dim_s / dim_t;
  std::vector<std::size_t> tpart(dim_s), cpart(dim_s);
  for (std::size_t idx = 0; idx < dim_s; ++idx) {
    std::size_t rem = idx, weight_t = 1, weight_c = 1, t = 0, c = 0;
    for (std::size_t p = ns; p-- > 0;) {
      const std::size_t digit = rem % static_cast<std::size_t>(d);
      rem /= static_cast<std::size_t>(d);
      if ((target >> op.support()[p]) & 1u) {
        t += digit * weight_t;
        weight_t *= static_cast<std::size_t>(d);
      } else {
        c += digit * weight_c;
        weight_c *= static_cast<std::size_t>(d);
      }
    }
    tpart[idx] = t;
    cpart[idx] = c;
  }
  const Matrix& m = op.matrix();
  Matrix x = Matrix::Zero(static_cast<Eigen::Index>(dim_t), static_cast<Eigen::Index>(dim_t));
  for (std::size_t col = 0; col < dim_s; ++col)
    for (std::size_t row = 0; row < dim_s; ++row)
      if (cpart[row] == cpart[col])
        x(static_cast<Eigen::Index>(tpart[row]), static_cast<Eigen::Index>(tpart[col])) +=
            m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
  x /= static_cast<double>(dim_c);
  LocalOperator out(tsites, std::move(x), d);
  if (residual) *residual = (out.extended_to(op.mask()).matrix() - m).cwiseAbs().maxCoeff();
  return out;
}

Matrix embed_operator(const LocalOperator& op, const SiteGraph& graph) {
  graph.hilbert_dim();
  if ((op.mask() & ~graph.all_sites()) != 0) throw ValidationError("operator support not inside the graph");
  if (op.local_dim() != graph.local_dim()) throw ValidationError("local dimension mismatch");
  std::vector<int> all(static_cast<std::size_t>(graph.num_sites()));
  for (int i = 0; i < graph.num_sites(); ++i) all[static_cast<std::size_t>(i)] = i;
  return extend_matrix(op.matrix(), op.support(), all, op.local_dim());
}

LocalOperator commutator(const LocalOperator& a, const LocalOperator& b) {
  const SiteMask u = a.mask() | b.mask();
  if ((a.mask() & b.mask()) == 0) return LocalOperator::zero(SiteGraph::sites_of(u), a.local_dim());
  const Matrix ma = a.extended_to(u).matrix();
  const Matrix mb = b.extended_to(u).matrix();
  return {SiteGraph::sites_of(u), ma * mb - mb * ma, a.local_dim()};
}

double op_norm(const LocalOperator& op) { return spectral_norm(op.matrix()); }

Matrix pauli(char label) {
  Matrix m = Matrix::Zero(2, 2);
  switch (label) {
  case 'I': m << 1, 0, 0, 1; break;
  case 'X': m << 0, 1, 1, 0; break;
  case 'Y': m << 0, Complex(0, -1), Complex(0, 1), 0; break;
  case 'Z': m << 1, 0, 0, -1; break;
  case '+': m << 0, 1, 0, 0; break;
  case '-': m << 0, 0, 1, 0; break;
  case 'n': m << 0, 0, 0, 1; break;
  case 'u': m << 1, 0, 0, 0; break;
  default: throw ValidationError(std::string("unknown Pauli label '") + label + "'");
  }
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

LocalOperator pauli_string(const std::vector<int>& sites, std::string_view labels) {
  if (sites.size() != labels.size()) throw ValidationError("Pauli string length must match its sites");
  std::vector<std::pair<int, char>> pairs;
  for (std::size_t k = 0; k < sites.size(); ++k) pairs.emplace_back(sites[k], labels[k]);
  std::sort(pairs.begin(), pairs.end());
  Matrix m = Matrix::Identity(1, 1);
  std::vector<int> sorted;
  for (const auto& [s, l] : pairs) {
    m = kron(m, pauli(l));
    sorted.push_back(s);
  }
  return {std::move(sorted), std::move(m), 2};
}

} // namespace prethermal
