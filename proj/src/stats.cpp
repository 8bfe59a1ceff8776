#include "p3c/stats.hpp"

#include "p3c/error.hpp"
#include "p3c/simd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace p3c {

SampleStore::SampleStore(std::size_t p, bool track_joint)
    : count_(p, 0), mean_(p, 0.0), m2_(p, 0.0), track_joint_(track_joint) {
  if (track_joint_) {
    joint_mean_ = Vector::Zero(static_cast<Eigen::Index>(p));
    joint_m2_ = Matrix::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  }
}

void SampleStore::observe(std::size_t i, double x) {
  const std::int64_t n = ++count_[i];
  const double delta = x - mean_[i];
  mean_[i] += delta / static_cast<double>(n);
  m2_[i] += delta * (x - mean_[i]);
}

void SampleStore::observe_row(std::span<const double> row) {
  for (std::size_t i = 0; i < row.size(); ++i) observe(i, row[i]);
  add_joint_row(row);
}

void SampleStore::add_joint_row(std::span<const double> row) {
  if (!track_joint_) return;
  const auto p = static_cast<Eigen::Index>(row.size());
  const std::int64_t n = ++joint_n_;
  Vector delta(p);
  for (Eigen::Index i = 0; i < p; ++i) delta[i] = row[static_cast<std::size_t>(i)] - joint_mean_[i];
  joint_mean_ += delta / static_cast<double>(n);
  const double c = static_cast<double>(n - 1) / static_cast<double>(n);
  const auto& k = simd::kernels();
  for (Eigen::Index j = 0; j < p; ++j) {
    k.axpy(c * delta[j], delta.data(), joint_m2_.col(j).data(), static_cast<std::size_t>(p));
  }
}

void SampleStore::merge(const SampleStore& other) {
  if (other.p() != p()) throw ConfigError("SampleStore::merge: dimension mismatch");
  for (std::size_t i = 0; i < p(); ++i) {
    const auto na = static_cast<double>(count_[i]);
    const auto nb = static_cast<double>(other.count_[i]);
    if (nb == 0.0) continue;
    const double n = na + nb;
    const double delta = other.mean_[i] - mean_[i];
    mean_[i] += delta * nb / n;
    m2_[i] += other.m2_[i] + delta * delta * na * nb / n;
    count_[i] += other.count_[i];
  }
  if (track_joint_ && other.track_joint_ && other.joint_n_ > 0) {
    const auto na = static_cast<double>(joint_n_);
    const auto nb = static_cast<double>(other.joint_n_);
    const double n = na + nb;
    const Vector delta = other.joint_mean_ - joint_mean_;
    joint_mean_ += delta * (nb / n);
    joint_m2_ += other.joint_m2_ + delta * delta.transpose() * (na * nb / n);
    joint_n_ += other.joint_n_;
  }
}

std::int64_t SampleStore::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : count_) t += c;
  return t;
}

double SampleStore::mean(std::size_t i) const {
  if (count_[i] < 1) throw DegenerateError("mean requested for unobserved alternative " + std::to_string(i));
  return mean_[i];
}

double SampleStore::variance(std::size_t i) const {
  if (count_[i] < 2) {
    throw DegenerateError("variance needs >= 2 observations (alternative " + std::to_string(i) + ")");
  }
  return m2_[i] / static_cast<double>(count_[i] - 1);
}

std::vector<double> SampleStore::means() const {
  std::vector<double> out(p());
  for (std::size_t i = 0; i < p(); ++i) out[i] = mean(i);
  return out;
}

std::vector<double> SampleStore::variances() const {
  std::vector<double> out(p());
  for (std::size_t i = 0; i < p(); ++i) out[i] = variance(i);
  return out;
}

double SampleStore::mean_covariance(std::size_t i, std::size_t j, double cov_ij) const {
  return cov_ij / static_cast<double>(std::max(count_[i], count_[j]));
}

void update(SampleStore& store, const ObservationBatch& batch) {
  for (const auto& row : batch.full_rows) store.observe_row(row);
  for (const auto& [i, x] : batch.partial) store.observe(i, x);
}

CovMethod parse_cov_method(const std::string& name) {
  if (name == "sample") return CovMethod::sample;
  if (name == "shrinkage") return CovMethod::shrinkage;
  throw ConfigError("unknown covariance estimator '" + name + "'");
}

const char* cov_method_name(CovMethod m) { return m == CovMethod::sample ? "sample" : "shrinkage"; }

CovarianceEstimate sample_covariance(const SampleStore& store) {
  if (!store.tracks_joint() || store.joint_rows() < 2) {
    throw DegenerateError("sample covariance needs >= 2 full-vector replications");
  }
  CovarianceEstimate est;
  est.method = CovMethod::sample;
  est.n = store.joint_rows();
  est.matrix = store.joint_comoment() / static_cast<double>(est.n - 1);
  est.matrix = 0.5 * (est.matrix + est.matrix.transpose()).eval();
  return est;
}

Matrix sample_covariance(const Matrix& data) {
  if (data.rows() < 2) throw DegenerateError("sample covariance needs >= 2 rows");
  const Matrix centered = data.rowwise() - data.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(data.rows() - 1);
}

CovarianceEstimate shrink_covariance(const Matrix& sample, std::int64_t n) {
  const auto p = sample.rows();
  if (n < 4) throw DegenerateError("shrinkage needs n >= 4");
  CovarianceEstimate est;
  est.method = CovMethod::shrinkage;
  est.n = n;
  est.p_exceeds_n = p > n;
  if (p == 1) {
    // One eigenvalue: nothing to shrink towards.
    est.matrix = sample;
    est.sample_eigenvalues = est.eigenvalues = Vector::Constant(1, sample(0, 0));
    est.eigenvectors = Matrix::Identity(1, 1);
    return est;
  }
  if (sample.cwiseAbs().maxCoeff() == 0.0) throw DegenerateError("shrinkage of an all-zero covariance");

  Eigen::SelfAdjointEigenSolver<Matrix> es(sample);
  const Vector lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  const double tiny = 1e-12 * top;
  const double pn = static_cast<double>(p) / static_cast<double>(n);
  const double h = std::pow(static_cast<double>(n), -1.0 / 3.0);
  const double sqrt5 = std::sqrt(5.0);
  const double pi = std::numbers::pi;

  Vector shrunk(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double li = lam[i];
    if (li <= tiny) {
      shrunk[i] = 0.0;
      continue;
    }
    double f = 0.0;
    double hilbert = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double lj = lam[j];
      if (lj <= tiny) continue;  // zero-width kernel
      const double hj = lj * h;
      const double u = (li - lj) / hj;
      const double bump = 1.0 - u * u / 5.0;
      f += 3.0 / (4.0 * sqrt5 * hj) * std::max(bump, 0.0);
      hilbert += -3.0 * (li - lj) / (10.0 * pi * hj * hj);
      const double num = sqrt5 * hj - li + lj;
      const double den = sqrt5 * hj + li - lj;
      const double ratio = std::abs(num / den);
      if (num != 0.0 && den != 0.0 && std::isfinite(ratio) && ratio > 0.0) {
        hilbert += 3.0 * bump / (4.0 * sqrt5 * pi * hj) * std::log(ratio);
      }
    }
    f /= static_cast<double>(p);
    hilbert /= static_cast<double>(p);
    const double a = pi * pn * li * f;
    const double b = 1.0 - pn - pi * pn * li * hilbert;
    shrunk[i] = std::max(li / (a * a + b * b), 0.0);
  }
  est.sample_eigenvalues = lam;
  est.eigenvalues = shrunk;
  est.eigenvectors = es.eigenvectors();
  const Matrix m = es.eigenvectors() * shrunk.asDiagonal() * es.eigenvectors().transpose();
  est.matrix = 0.5 * (m + m.transpose());
  return est;
}

CovarianceEstimate shrinkage_covariance(const SampleStore& store) {
  if (store.p() < 1) throw DegenerateError("shrinkage of an empty store");
  const CovarianceEstimate s = sample_covariance(store);
  return shrink_covariance(s.matrix, s.n);
}

CovarianceEstimate estimate_covariance(const SampleStore& store, CovMethod method) {
  return method == CovMethod::sample ? sample_covariance(store) : shrinkage_covariance(store);
}

Matrix correlation_from_covariance(const Matrix& cov) {
  const auto p = cov.rows();
  Matrix r(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (i == j) {
        r(i, j) = 1.0;
      } else {
        const double d = std::sqrt(std::max(cov(i, i), 1e-15) * std::max(cov(j, j), 1e-15));
        r(i, j) = std::clamp(cov(i, j) / d, -1.0, 1.0);
      }
    }
  }
  return r;
}

double fisher_z(double r) {
  if (!(std::abs(r) < 1.0)) throw ConfigError("fisher_z: |r| must be < 1");
  return 0.5 * std::log((1.0 + r) / (1.0 - r));
}

MengTerms meng_terms(double r_ab, double r_ac, double r_bc, std::int64_t n) {
  if (n <= 3) throw ConfigError("meng_variance: n must exceed 3");
  for (double r : {r_ab, r_ac, r_bc}) {
    if (!(std::abs(r) < 1.0)) throw ConfigError("meng_variance: correlations must lie in (-1, 1)");
  }
  MengTerms t{};
  t.r_bar_sq = 0.5 * (r_ab * r_ab + r_bc * r_bc);
  t.f = std::min(1.0, (1.0 - r_bc) / (2.0 * (1.0 - t.r_bar_sq)));
  t.h = (1.0 - t.f * t.r_bar_sq) / (1.0 - t.r_bar_sq);
  t.variance = 2.0 * (1.0 - r_bc) * t.h / static_cast<double>(n - 3);
  return t;
}

double meng_variance(double r_ab, double r_ac, double r_bc, std::int64_t n) {
  return meng_terms(r_ab, r_ac, r_bc, n).variance;
}

}  // namespace p3c
