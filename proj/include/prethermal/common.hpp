#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace prethermal {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

/// Bit i set means site i belongs to the set. Lattices stay below 32 sites
/// because the dense Hilbert space is capped far lower.
using SiteMask = std::uint32_t;

/// Fourier index over at most two angles. Floquet potentials leave the
/// second component at zero.
using Fourier = std::array<int, 2>;
using Angles = std::array<double, 2>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr Complex kI{0.0, 1.0};

inline int fourier_l1(const Fourier& n) { return std::abs(n[0]) + std::abs(n[1]); }
inline int fourier_linf(const Fourier& n) { return std::max(std::abs(n[0]), std::abs(n[1])); }
inline Fourier negate(const Fourier& n) { return {-n[0], -n[1]}; }

int popcount(SiteMask mask);

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Hilbert dimension above the configured cap.
class DimensionCapError : public Error {
public:
  using Error::Error;
};

/// Input rejected by a domain check (bad support, non-commuting charge, ...).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A numerical certificate failed (aliasing, unitarity, periodicity, ...).
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Largest singular value.
double spectral_norm(const Matrix& m);

/// Largest |eigenvalue| of a Hermitian matrix; cheaper than an SVD.
double hermitian_norm(const Matrix& m);

/// e^{-i t H} for Hermitian H, via eigendecomposition.
Matrix exp_hermitian(const Matrix& h, double t = 1.0);

/// e^{A} for antihermitian A.
Matrix exp_antihermitian(const Matrix& a);

/// ‖M†M − I‖.
double unitarity_defect(const Matrix& u);

} // namespace prethermal
