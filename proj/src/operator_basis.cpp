#include "prethermal/operator_basis.hpp"

namespace prethermal {

OperatorBasis::OperatorBasis(int local_dim) : d_(local_dim) {
  const int d2 = d_ * d_;
  inverse_site_ = Matrix::Zero(d2, d2);
  for (int a = 0; a < d_; ++a)
    for (int b = 0; b < d_; ++b) {
      const int basis = a * d_ + b;
      for (int c = 0; c < d_; ++c) {
        const int r = (c + a) % d_;
        Complex phase = std::polar(1.0, kTwoPi * b * c / d_);
        // Snap exact roots of unity so d = 2, 4 transforms carry no roundoff.
        if (std::abs(phase.real()) < 1e-15) phase.real(0.0);
        if (std::abs(phase.imag()) < 1e-15) phase.imag(0.0);
        inverse_site_(r * d_ + c, basis) = phase;
      }
    }
  // Basis is orthogonal with Tr(P†P) = d.
  forward_site_ = inverse_site_.adjoint() / static_cast<double>(d_);
}

void OperatorBasis::transform(std::vector<Complex>& data, int num_sites, const Matrix& site_map) const {
  const std::size_t d2 = static_cast<std::size_t>(d_ * d_);
  std::vector<Complex> gathered(d2), mapped(d2);
  std::size_t stride = data.size();
  for (int site = 0; site < num_sites; ++site) {
    stride /= d2;
    const std::size_t block = stride * d2;
    for (std::size_t base = 0; base < data.size(); base += block) {
      for (std::size_t inner = 0; inner < stride; ++inner) {
        for (std::size_t k = 0; k < d2; ++k) gathered[k] = data[base + inner + k * stride];
        for (std::size_t out = 0; out < d2; ++out) {
          Complex acc{};
          for (std::size_t k = 0; k < d2; ++k)
            acc += site_map(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(k)) * gathered[k];
          mapped[out] = acc;
        }
        for (std::size_t k = 0; k < d2; ++k) data[base + inner + k * stride] = mapped[k];
      }
    }
  }
}

namespace {

// Offsets that place row/column digits into the interleaved pair layout.
void pair_offsets(int d, int num_sites, std::vector<std::size_t>& row_part, std::vector<std::size_t>& col_part) {
  std::size_t dim = 1;
  for (int i = 0; i < num_sites; ++i) dim *= static_cast<std::size_t>(d);
  row_part.assign(dim, 0);
  col_part.assign(dim, 0);
  const std::size_t d2 = static_cast<std::size_t>(d * d);
  for (std::size_t idx = 0; idx < dim; ++idx) {
    std::size_t rem = idx, weight = 1, rp = 0, cp = 0;
    for (int site = num_sites - 1; site >= 0; --site) {
      const std::size_t digit = rem % static_cast<std::size_t>(d);
      rem /= static_cast<std::size_t>(d);
      rp += digit * static_cast<std::size_t>(d) * weight;
      cp += digit * weight;
      weight *= d2;
    }
    row_part[idx] = rp;
    col_part[idx] = cp;
  }
}

} // namespace

std::vector<Complex> OperatorBasis::forward(const Matrix& op, int num_sites) const {
  std::vector<std::size_t> row_part, col_part;
  pair_offsets(d_, num_sites, row_part, col_part);
  if (static_cast<std::size_t>(op.rows()) != row_part.size() || op.rows() != op.cols())
    throw ValidationError("basis transform: matrix size does not match site count");
  std::vector<Complex> data(row_part.size() * row_part.size());
  for (Eigen::Index c = 0; c < op.cols(); ++c)
    for (Eigen::Index r = 0; r < op.rows(); ++r)
      data[row_part[static_cast<std::size_t>(r)] + col_part[static_cast<std::size_t>(c)]] = op(r, c);
  transform(data, num_sites, forward_site_);
  return data;
}

Matrix OperatorBasis::inverse(const std::vector<Complex>& coeffs, int num_sites) const {
  std::vector<std::size_t> row_part, col_part;
  pair_offsets(d_, num_sites, row_part, col_part);
  if (coeffs.size() != row_part.size() * row_part.size())
    throw ValidationError("basis transform: coefficient count does not match site count");
  std::vector<Complex> data = coeffs;
  transform(data, num_sites, inverse_site_);
  const auto dim = static_cast<Eigen::Index>(row_part.size());
  Matrix out(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c)
    for (Eigen::Index r = 0; r < dim; ++r)
      out(r, c) = data[row_part[static_cast<std::size_t>(r)] + col_part[static_cast<std::size_t>(c)]];
  return out;
}

} // namespace prethermal
