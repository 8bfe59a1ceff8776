#pragma once

#include "p3c/linalg.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace p3c {

/// Per-alternative running moments plus joint co-moments accrued only from
/// full-vector replications.
class SampleStore {
 public:
  explicit SampleStore(std::size_t p = 0, bool track_joint = true);

  std::size_t p() const { return count_.size(); }
  bool tracks_joint() const { return track_joint_; }

  /// Univariate update (partial replication).
  void observe(std::size_t i, double x);
  /// Full-vector replication: univariate and joint update.
  void observe_row(std::span<const double> row);
  /// Joint update only, for a replication whose entries were already
  /// recorded one by one through observe().
  void add_joint_row(std::span<const double> row);

  /// Combine with a store built from disjoint replications.
  void merge(const SampleStore& other);

  std::int64_t count(std::size_t i) const { return count_[i]; }
  std::span<const std::int64_t> counts() const { return count_; }
  std::int64_t total() const;
  double mean(std::size_t i) const;
  /// Unbiased variance; needs count >= 2.
  double variance(std::size_t i) const;
  std::vector<double> means() const;
  std::vector<double> variances() const;

  std::int64_t joint_rows() const { return joint_n_; }
  const Vector& joint_mean() const { return joint_mean_; }
  /// Sum of outer products of centered full-vector rows.
  const Matrix& joint_comoment() const { return joint_m2_; }

  /// cov(xbar_i, xbar_j) = cov(X_i, X_j) / max(N_i, N_j).
  double mean_covariance(std::size_t i, std::size_t j, double cov_ij) const;

 private:
  std::vector<std::int64_t> count_;
  std::vector<double> mean_;
  std::vector<double> m2_;
  bool track_joint_;
  std::int64_t joint_n_ = 0;
  Vector joint_mean_;
  Matrix joint_m2_;
};

struct ObservationBatch {
  std::vector<std::vector<double>> full_rows;
  std::vector<std::pair<std::size_t, double>> partial;
};

void update(SampleStore& store, const ObservationBatch& batch);

enum class CovMethod { sample, shrinkage };

CovMethod parse_cov_method(const std::string& name);
const char* cov_method_name(CovMethod m);

struct CovarianceEstimate {
  CovMethod method = CovMethod::sample;
  Matrix matrix;
  std::int64_t n = 0;
  Vector sample_eigenvalues;  // ascending, shrinkage only
  Vector eigenvalues;         // shrunk, paired with sample_eigenvalues, shrinkage only
  Matrix eigenvectors;        // shrinkage only
  bool p_exceeds_n = false;
};

/// Unbiased covariance over full-vector replications.
CovarianceEstimate sample_covariance(const SampleStore& store);
/// Nonlinear shrinkage of the sample covariance of the full-vector rows.
CovarianceEstimate shrinkage_covariance(const SampleStore& store);
CovarianceEstimate estimate_covariance(const SampleStore& store, CovMethod method);

/// Shrinkage applied to a sample covariance computed from n rows.
CovarianceEstimate shrink_covariance(const Matrix& sample, std::int64_t n);

/// Sample covariance of the rows of `data` (n x p).
Matrix sample_covariance(const Matrix& data);

/// Unit diagonal, entries clipped to [-1, 1], denominators floored at 1e-15.
Matrix correlation_from_covariance(const Matrix& cov);

double fisher_z(double r);

struct MengTerms {
  double r_bar_sq;
  double f;
  double h;
  double variance;
};

/// Variance of z(r_ab) - z(r_ac), two correlations sharing alternative a,
/// with Rbar^2 = (r_ab^2 + r_bc^2)/2 and f capped at 1. r_ac enters only
/// through the domain check.
MengTerms meng_terms(double r_ab, double r_ac, double r_bc, std::int64_t n);
double meng_variance(double r_ab, double r_ac, double r_bc, std::int64_t n);

}  // namespace p3c
