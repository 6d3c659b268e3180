#include "prethermal/common.hpp"

#include <bit>

namespace prethermal {

int popcount(SiteMask mask) { return std::popcount(mask); }

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  if (m.rows() <= 32 && m.cols() <= 32) {
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
  }
  // Gram route for larger blocks: sqrt(λmax(M†M)).
  const Matrix gram = m.adjoint() * m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

double hermitian_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix exp_hermitian(const Matrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Vector phases = (es.eigenvalues() * (-t)).unaryExpr([](double x) { return std::polar(1.0, x); }).cast<Complex>();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

Matrix exp_antihermitian(const Matrix& a) {
  // A = -iH with H = iA Hermitian, so e^{A} = e^{-iH}.
  const Matrix h = kI * a;
  return exp_hermitian(0.5 * (h + h.adjoint()));
}

double unitarity_defect(const Matrix& u) {
  return spectral_norm(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols()));
}

} // namespace prethermal
