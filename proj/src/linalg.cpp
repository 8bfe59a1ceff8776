#include "p3c/linalg.hpp"

#include "p3c/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <sstream>

namespace p3c {

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("normal_quantile: probability outside (0,1)");
  }
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

EigenRange eigen_range(const Matrix& a) {
  if (a.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

bool is_psd(const Matrix& a) {
  const EigenRange r = eigen_range(a);
  return r.min >= -1e-10 * std::max(r.max, 0.0);
}

Factorization psd_factor(const Matrix& a) {
  const Eigen::Index n = a.rows();
  if (n == 0) return {Matrix(0, 0), 0.0};
  const double scale = std::max(a.diagonal().cwiseAbs().mean(), 1e-300);

  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return {llt.matrixL(), 0.0};

  for (double jitter = 1e-12; jitter <= 1.0000001e-8; jitter *= 10.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += jitter * scale;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  const double top = es.eigenvalues().maxCoeff();
  const double low = es.eigenvalues().minCoeff();
  if (low < -1e-10 * std::max(top, 0.0)) {
    std::ostringstream msg;
    msg << "matrix is not positive semi-definite (min eigenvalue " << low
        << ", max " << top << ")";
    throw NotPsdError(msg.str());
  }
  Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return {es.eigenvectors() * root.asDiagonal(), 0.0};
}

}  // namespace p3c
