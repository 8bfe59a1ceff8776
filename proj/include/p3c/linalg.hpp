#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace p3c {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Standard normal CDF; accepts +-infinity.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Standard normal quantile for p in (0, 1).
double normal_quantile(double p);

struct Factorization {
  Matrix factor;       // lower-triangular or eigen-based square root F with F F^T ~ A
  double jitter = 0.0; // relative diagonal jitter that was needed
};

/// Symmetric PSD square root with diagonal jitter escalation 1e-12 .. 1e-8
/// (relative to the mean diagonal). Falls back to an eigen square root when
/// the matrix is PSD within 1e-10 of its largest eigenvalue. Throws NotPsdError.
Factorization psd_factor(const Matrix& a);

/// Extreme eigenvalues of a symmetric matrix.
struct EigenRange {
  double min = 0.0;
  double max = 0.0;
};
EigenRange eigen_range(const Matrix& a);

/// True if every eigenvalue >= -1e-10 * max eigenvalue.
bool is_psd(const Matrix& a);

}  // namespace p3c
