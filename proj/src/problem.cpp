#include "p3c/problem.hpp"

#include "p3c/error.hpp"
#include "p3c/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace p3c {

using nlohmann::json;

class ProblemBuilder {
 public:
  explicit ProblemBuilder(ModelKind kind, std::size_t factor_count) {
    spec_.kind_ = kind;
    spec_.factor_count_ = factor_count;
  }

  void add(double mean, std::vector<Loading> loads, double idio_var, int label) {
    std::sort(loads.begin(), loads.end(),
              [](const Loading& a, const Loading& b) { return a.factor < b.factor; });
    spec_.mu_.push_back(mean);
    for (const Loading& l : loads) {
      if (l.weight != 0.0) spec_.entries_.push_back(l);
    }
    spec_.offsets_.push_back(spec_.entries_.size());
    spec_.idio_sd_.push_back(std::sqrt(std::max(idio_var, 0.0)));
    spec_.partition_.push_back(label);
  }

  void set_dense(Matrix sigma) { spec_.dense_sigma_ = std::move(sigma); }
  void set_params(json params) { spec_.params_ = std::move(params); }

  ProblemSpec finish() {
    ProblemSpec& s = spec_;
    if (s.mu_.empty()) throw ConfigError("problem has no alternatives");
    const int top = *std::max_element(s.partition_.begin(), s.partition_.end());
    std::vector<bool> used(static_cast<std::size_t>(top) + 1, false);
    for (int g : s.partition_) {
      if (g < 0) throw ConfigError("negative cluster label");
      used[static_cast<std::size_t>(g)] = true;
    }
    if (!std::all_of(used.begin(), used.end(), [](bool b) { return b; })) {
      throw ConfigError("cluster labels must cover 0..k-1");
    }
    s.k_ = top + 1;
    s.best_ = static_cast<std::size_t>(std::max_element(s.mu_.begin(), s.mu_.end()) - s.mu_.begin());
    double second = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.mu_.size(); ++i) {
      if (i != s.best_) second = std::max(second, s.mu_[i]);
    }
    s.ambiguous_ = s.mu_.size() > 1 && s.mu_[s.best_] - second < 1e-12;
    return std::move(s);
  }

 private:
  ProblemSpec spec_;
};

double ProblemSpec::covariance(std::size_t i, std::size_t j) const {
  if (dense_sigma_) return (*dense_sigma_)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  const auto a = loadings(i);
  const auto b = loadings(j);
  double s = 0.0;
  std::size_t u = 0, v = 0;
  while (u < a.size() && v < b.size()) {
    if (a[u].factor == b[v].factor) {
      s += a[u].weight * b[v].weight;
      ++u;
      ++v;
    } else if (a[u].factor < b[v].factor) {
      ++u;
    } else {
      ++v;
    }
  }
  if (i == j) s += idio_sd_[i] * idio_sd_[i];
  return s;
}

double ProblemSpec::correlation(std::size_t i, std::size_t j) const {
  const double d = std::sqrt(std::max(variance(i), 1e-15) * std::max(variance(j), 1e-15));
  return std::clamp(covariance(i, j) / d, -1.0, 1.0);
}

Matrix ProblemSpec::covariance_matrix(std::size_t limit) const {
  if (p() > limit) {
    throw ConfigError("dense covariance requested for p=" + std::to_string(p()) + " above limit");
  }
  if (dense_sigma_) return *dense_sigma_;
  std::vector<std::size_t> idx(p());
  std::iota(idx.begin(), idx.end(), 0);
  return covariance_submatrix(idx);
}

Matrix ProblemSpec::covariance_submatrix(std::span<const std::size_t> idx) const {
  const auto m = static_cast<Eigen::Index>(idx.size());
  Matrix out(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b <= a; ++b) {
      out(a, b) = out(b, a) = covariance(idx[a], idx[b]);
    }
  }
  return out;
}

EigenRange ProblemSpec::eigenvalue_range() const {
  if (kind_ == ModelKind::block) {
    const auto sizes = params_.at("cluster_sizes").get<std::vector<std::size_t>>();
    const double big_r = params_.at("intra_corr").get<double>();
    const double small_r = params_.at("inter_corr").get<double>();
    const double var = params_.at("variance").get<double>();
    const auto k = static_cast<Eigen::Index>(sizes.size());
    Matrix reduced(k, k);
    for (Eigen::Index c = 0; c < k; ++c) {
      for (Eigen::Index d = 0; d < k; ++d) {
        const double root = std::sqrt(static_cast<double>(sizes[c]) * static_cast<double>(sizes[d]));
        reduced(c, d) = var * (root * (c == d ? big_r : small_r) + (c == d ? 1.0 - big_r : 0.0));
      }
    }
    EigenRange r = eigen_range(reduced);
    if (p() > sizes.size()) {
      r.min = std::min(r.min, var * (1.0 - big_r));
      r.max = std::max(r.max, var * (1.0 - big_r));
    }
    return r;
  }
  const bool constant_idio =
      std::all_of(idio_sd_.begin(), idio_sd_.end(), [&](double s) { return s == idio_sd_.front(); });
  if (!dense_sigma_ && constant_idio && factor_count_ < p()) {
    const auto f = static_cast<Eigen::Index>(factor_count_);
    Matrix gram = Matrix::Zero(f, f);
    for (std::size_t i = 0; i < p(); ++i) {
      for (const Loading& a : loadings(i)) {
        for (const Loading& b : loadings(i)) gram(a.factor, b.factor) += a.weight * b.weight;
      }
    }
    const double c = idio_sd_.front() * idio_sd_.front();
    EigenRange r = eigen_range(gram);
    return {c, r.max + c};
  }
  return eigen_range(covariance_matrix());
}

// ---------------------------------------------------------------- Free-Wilson

std::size_t FreeWilsonSpec::total_count() const {
  std::size_t n = 1;
  for (const auto& s : sites) n *= s.atom_means.size();
  return sites.empty() ? 0 : n;
}

std::vector<std::size_t> free_wilson_digits(const FreeWilsonSpec& spec, std::size_t index) {
  std::vector<std::size_t> digits(spec.sites.size());
  for (std::size_t s = spec.sites.size(); s-- > 0;) {
    const std::size_t radix = spec.sites[s].atom_means.size();
    digits[s] = index % radix;
    index /= radix;
  }
  return digits;
}

namespace {

void validate_free_wilson(const FreeWilsonSpec& spec) {
  if (spec.sites.empty()) throw ConfigError("free_wilson: no sites");
  if (spec.noise_var < 0.0) throw ConfigError("free_wilson: noise_var must be >= 0");
  for (const auto& site : spec.sites) {
    if (site.atom_means.empty()) throw ConfigError("free_wilson: site " + site.name + " has no substituents");
    if (site.atom_means.size() != site.atom_vars.size()) {
      throw ConfigError("free_wilson: site " + site.name + " means/vars size mismatch");
    }
    for (std::size_t u = 0; u < site.atom_vars.size(); ++u) {
      if (!(site.atom_vars[u] > 0.0)) {
        std::ostringstream msg;
        msg << "free_wilson: non-positive atom variance at site " << site.name << " substituent " << u;
        throw ConfigError(msg.str());
      }
    }
  }
}

json free_wilson_params(const FreeWilsonSpec& spec, std::optional<IndexRange> subset) {
  json sites = json::array();
  for (const auto& s : spec.sites) {
    sites.push_back({{"name", s.name}, {"means", s.atom_means}, {"vars", s.atom_vars}});
  }
  json out = {{"model", "free_wilson"}, {"base_mean", spec.base_mean}, {"noise_var", spec.noise_var},
              {"sites", sites}};
  if (subset) out["subset"] = {subset->begin, subset->end};
  return out;
}

}  // namespace

ProblemSpec build_free_wilson(const FreeWilsonSpec& spec, std::optional<IndexRange> subset) {
  validate_free_wilson(spec);
  const std::size_t total = spec.total_count();
  IndexRange range{0, total};
  if (subset) {
    if (subset->begin >= subset->end || subset->end > total) {
      throw ConfigError("free_wilson: subset outside [0, " + std::to_string(total) + ")");
    }
    range = *subset;
  }

  std::vector<std::size_t> offsets;
  std::size_t factors = 0;
  std::size_t dominant = 0;
  double dominant_total = -1.0;
  for (std::size_t s = 0; s < spec.sites.size(); ++s) {
    offsets.push_back(factors);
    factors += spec.sites[s].atom_vars.size();
    const auto& v = spec.sites[s].atom_vars;
    const double t = std::accumulate(v.begin(), v.end(), 0.0);
    if (t > dominant_total) {
      dominant_total = t;
      dominant = s;
    }
  }

  ProblemBuilder b(ModelKind::free_wilson, factors);
  std::map<std::size_t, int> relabel;
  for (std::size_t t = range.begin; t < range.end; ++t) {
    const auto digits = free_wilson_digits(spec, t);
    double mean = spec.base_mean;
    std::vector<Loading> loads;
    loads.reserve(digits.size());
    for (std::size_t s = 0; s < digits.size(); ++s) {
      mean += spec.sites[s].atom_means[digits[s]];
      loads.push_back({static_cast<std::uint32_t>(offsets[s] + digits[s]),
                       std::sqrt(spec.sites[s].atom_vars[digits[s]])});
    }
    auto [it, inserted] = relabel.try_emplace(digits[dominant], static_cast<int>(relabel.size()));
    b.add(mean, std::move(loads), spec.noise_var, it->second);
  }
  b.set_params(free_wilson_params(spec, subset));
  return b.finish();
}

FreeWilsonSpec random_free_wilson(const std::vector<std::pair<std::string, std::size_t>>& sites,
                                  std::uint64_t seed, double mean_var, double var_var,
                                  double dominant_var_shift, double base_mean, double noise_var) {
  rng::NormalStream normal(seed);
  auto positive = [&](double v) {
    for (;;) {
      const double x = std::sqrt(v) * normal();
      if (x > 0.0) return x;
    }
  };
  FreeWilsonSpec out;
  out.base_mean = base_mean;
  out.noise_var = noise_var;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    FreeWilsonSite site{sites[s].first, {}, {}};
    for (std::size_t u = 0; u < sites[s].second; ++u) {
      site.atom_means.push_back(positive(mean_var));
      site.atom_vars.push_back(positive(var_var) + (s == 0 ? dominant_var_shift : 0.0));
    }
    out.sites.push_back(std::move(site));
  }
  return out;
}

// ---------------------------------------------------------------- block model

ProblemSpec build_block_model(const BlockModelSpec& spec) {
  const double big_r = spec.intra_corr;
  const double small_r = spec.inter_corr;
  std::ostringstream where;
  where << "(R=" << big_r << ", r=" << small_r << ", sizes=[";
  for (std::size_t c = 0; c < spec.cluster_sizes.size(); ++c) {
    where << (c ? "," : "") << spec.cluster_sizes[c];
  }
  where << "])";
  if (spec.cluster_sizes.empty()) throw ConfigError("block model: no clusters");
  for (std::size_t s : spec.cluster_sizes) {
    if (s == 0) throw ConfigError("block model: cluster sizes must be positive " + where.str());
  }
  if (!(spec.variance > 0.0)) throw ConfigError("block model: variance must be positive");
  if (small_r < 0.0 || big_r < small_r) {
    throw ConfigError("block model: need R >= r >= 0 " + where.str());
  }
  if (big_r > 1.0) throw NotPsdError("block model covariance is not PSD " + where.str());

  const std::size_t k = spec.cluster_sizes.size();
  const std::size_t p = std::accumulate(spec.cluster_sizes.begin(), spec.cluster_sizes.end(), std::size_t{0});
  if (!spec.means.empty() && spec.means.size() != p) {
    throw ConfigError("block model: means has wrong length");
  }
  ProblemBuilder b(ModelKind::block, k + 1);
  const double global_w = std::sqrt(spec.variance * small_r);
  const double cluster_w = std::sqrt(spec.variance * (big_r - small_r));
  const double idio = spec.variance * (1.0 - big_r);
  std::size_t i = 0;
  std::vector<double> means;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < spec.cluster_sizes[c]; ++j, ++i) {
      double mean;
      if (!spec.means.empty()) {
        mean = spec.means[i];
      } else if (j == 0) {
        mean = spec.local_best_mean - static_cast<double>(c) * spec.local_step + (c == 0 ? spec.best_bonus : 0.0);
      } else {
        mean = spec.other_mean;
      }
      means.push_back(mean);
      b.add(mean, {{0, global_w}, {static_cast<std::uint32_t>(c + 1), cluster_w}}, idio, static_cast<int>(c));
    }
  }
  b.set_params({{"model", "block"},
                {"cluster_sizes", spec.cluster_sizes},
                {"intra_corr", big_r},
                {"inter_corr", small_r},
                {"variance", spec.variance},
                {"means", means}});
  return b.finish();
}

// ---------------------------------------------------------------- dense

ProblemSpec build_dense(std::vector<double> mu, const Matrix& sigma, std::vector<int> partition) {
  const std::size_t p = mu.size();
  if (static_cast<std::size_t>(sigma.rows()) != p || static_cast<std::size_t>(sigma.cols()) != p) {
    throw ConfigError("dense model: sigma dimension does not match mu");
  }
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw ConfigError("dense model: sigma is not symmetric");
  }
  if (partition.empty()) partition.assign(p, 0);
  if (partition.size() != p) throw ConfigError("dense model: partition has wrong length");
  const Factorization f = psd_factor(sigma);

  ProblemBuilder b(ModelKind::dense, p);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<Loading> loads;
    for (std::size_t c = 0; c < p; ++c) {
      const double w = f.factor(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      if (w != 0.0) loads.push_back({static_cast<std::uint32_t>(c), w});
    }
    b.add(mu[i], std::move(loads), 0.0, partition[i]);
  }
  b.set_dense(sigma);
  json rows = json::array();
  for (Eigen::Index r = 0; r < sigma.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < sigma.cols(); ++c) row.push_back(sigma(r, c));
    rows.push_back(row);
  }
  b.set_params({{"model", "dense"}, {"mu", mu}, {"sigma", rows}, {"partition", partition}});
  return b.finish();
}

ProblemSpec illustrative_fixture(double x, double y, double mu1) {
  std::vector<double> mu{mu1, 2.0, 1.95, 1.9, 1.9};
  Matrix sigma = Matrix::Constant(5, 5, 0.0);
  for (int i = 0; i < 5; ++i) sigma(i, i) = 0.1;
  for (int i = 1; i < 5; ++i) sigma(0, i) = sigma(i, 0) = x;
  for (int i = 1; i < 4; ++i) {
    for (int j = 1; j < 4; ++j) {
      if (i != j) sigma(i, j) = 0.01;
    }
    sigma(i, 4) = sigma(4, i) = y;
  }
  ProblemSpec spec = build_dense(mu, sigma);
  return spec;
}

// ---------------------------------------------------------------- checks

Assumption1Report check_assumption1(const ProblemSpec& spec) {
  Assumption1Report rep;
  rep.min_intra = std::numeric_limits<double>::infinity();
  rep.max_inter = -std::numeric_limits<double>::infinity();
  if (spec.kind() == ModelKind::block) {
    const double big_r = spec.params().at("intra_corr").get<double>();
    const double small_r = spec.params().at("inter_corr").get<double>();
    const auto sizes = spec.params().at("cluster_sizes").get<std::vector<std::size_t>>();
    const bool any_pair = std::any_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s > 1; });
    if (any_pair) rep.min_intra = big_r;
    if (sizes.size() > 1) rep.max_inter = small_r;
  } else {
    if (spec.p() > 4096) throw ConfigError("check_assumption1: p too large for pairwise check");
    const auto g = spec.partition();
    for (std::size_t i = 0; i < spec.p(); ++i) {
      for (std::size_t j = i + 1; j < spec.p(); ++j) {
        const double r = spec.correlation(i, j);
        if (g[i] == g[j]) {
          rep.min_intra = std::min(rep.min_intra, r);
        } else {
          rep.max_inter = std::max(rep.max_inter, r);
        }
      }
    }
  }
  rep.holds = rep.min_intra > rep.max_inter;
  return rep;
}

// ---------------------------------------------------------------- JSON

json problem_to_json(const ProblemSpec& spec) {
  json out = spec.params();
  out["p"] = spec.p();
  out["k"] = spec.k();
  out["best_index"] = spec.best_index();
  out["best_ambiguous"] = spec.best_ambiguous();
  return out;
}

namespace {

FreeWilsonSpec free_wilson_from_json(const json& doc) {
  FreeWilsonSpec spec;
  spec.base_mean = doc.value("base_mean", 0.0);
  spec.noise_var = doc.value("noise_var", 0.01);
  const json& sites = doc.at("sites");
  const bool draw = doc.contains("draw");
  if (draw) {
    const json& d = doc.at("draw");
    std::vector<std::pair<std::string, std::size_t>> shape;
    for (const json& s : sites) shape.emplace_back(s.at("name").get<std::string>(), s.at("substituents").get<std::size_t>());
    return random_free_wilson(shape, d.at("seed").get<std::uint64_t>(), d.value("mean_var", 0.1),
                              d.value("var_var", 0.1), d.value("dominant_var_shift", 0.0), spec.base_mean,
                              spec.noise_var);
  }
  for (const json& s : sites) {
    FreeWilsonSite site;
    site.name = s.at("name").get<std::string>();
    site.atom_means = s.at("means").get<std::vector<double>>();
    site.atom_vars = s.at("vars").get<std::vector<double>>();
    spec.sites.push_back(std::move(site));
  }
  return spec;
}

}  // namespace

ProblemSpec problem_from_json(const json& doc) {
  try {
    const std::string model = doc.at("model").get<std::string>();
    if (model == "block") {
      BlockModelSpec spec;
      if (doc.contains("cluster_sizes")) {
        spec.cluster_sizes = doc.at("cluster_sizes").get<std::vector<std::size_t>>();
      } else {
        spec.cluster_sizes.assign(doc.at("k").get<std::size_t>(), doc.at("cluster_size").get<std::size_t>());
      }
      spec.intra_corr = doc.at("intra_corr").get<double>();
      spec.inter_corr = doc.at("inter_corr").get<double>();
      spec.variance = doc.value("variance", 1.0);
      if (doc.contains("means")) spec.means = doc.at("means").get<std::vector<double>>();
      spec.local_best_mean = doc.value("local_best_mean", 1.0);
      spec.local_step = doc.value("local_step", 0.0);
      spec.best_bonus = doc.value("best_bonus", 0.0);
      spec.other_mean = doc.value("other_mean", 0.0);
      return build_block_model(spec);
    }
    if (model == "free_wilson") {
      std::optional<IndexRange> subset;
      if (doc.contains("subset")) {
        const auto r = doc.at("subset").get<std::vector<std::size_t>>();
        if (r.size() != 2) throw ConfigError("free_wilson: subset must be [begin, end]");
        subset = IndexRange{r[0], r[1]};
      }
      return build_free_wilson(free_wilson_from_json(doc), subset);
    }
    if (model == "dense") {
      const auto mu = doc.at("mu").get<std::vector<double>>();
      const auto rows = doc.at("sigma").get<std::vector<std::vector<double>>>();
      Matrix sigma(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw ConfigError("dense model: sigma must be square");
        for (std::size_t c = 0; c < rows.size(); ++c) sigma(r, c) = rows[r][c];
      }
      std::vector<int> partition;
      if (doc.contains("partition")) partition = doc.at("partition").get<std::vector<int>>();
      return build_dense(mu, sigma, partition);
    }
    if (model == "fixture") {
      return illustrative_fixture(doc.value("x", 0.05), doc.value("y", 0.01), doc.value("mu1", 2.1));
    }
    throw ConfigError("unknown model kind '" + model + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("problem config: ") + e.what());
  }
}

// ---------------------------------------------------------------- sampling

SampleSource::SampleSource(const ProblemSpec& spec, std::uint64_t seed)
    : spec_(&spec), seed_(seed), factor_key_(rng::derive_seed(seed, 0xF0)), idio_key_(rng::derive_seed(seed, 0x1D)) {}

double SampleSource::factor_normal(std::uint64_t m, std::uint64_t f) const {
  return rng::counter_normal(factor_key_, m, f);
}

double SampleSource::idio_normal(std::uint64_t m, std::uint64_t i) const {
  return rng::counter_normal(idio_key_, m, i);
}

double SampleSource::observe(std::size_t i, std::uint64_t m) const {
  double x = spec_->mean(i);
  for (const Loading& l : spec_->loadings(i)) x += l.weight * factor_normal(m, l.factor);
  const double s = spec_->idio_sd(i);
  if (s != 0.0) x += s * idio_normal(m, i);
  return x;
}

void SampleSource::observe_many(std::span<const std::size_t> alts, std::uint64_t m, std::span<double> out) const {
  const std::size_t f = spec_->factor_count();
  if (f <= 4 * alts.size()) {
    std::vector<double> z(f);
    for (std::size_t c = 0; c < f; ++c) z[c] = factor_normal(m, c);
    for (std::size_t a = 0; a < alts.size(); ++a) {
      const std::size_t i = alts[a];
      double x = spec_->mean(i);
      for (const Loading& l : spec_->loadings(i)) x += l.weight * z[l.factor];
      const double s = spec_->idio_sd(i);
      if (s != 0.0) x += s * idio_normal(m, i);
      out[a] = x;
    }
  } else {
    for (std::size_t a = 0; a < alts.size(); ++a) out[a] = observe(alts[a], m);
  }
}

void SampleSource::observe_row(std::uint64_t m, std::span<double> out) const {
  std::vector<std::size_t> all(spec_->p());
  std::iota(all.begin(), all.end(), 0);
  observe_many(all, m, out);
}

Matrix simulate(const ProblemSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("simulate: n must be >= 1");
  const SampleSource src(spec, seed);
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.p()));
  std::vector<double> row(spec.p());
  for (std::size_t m = 0; m < n; ++m) {
    src.observe_row(m, row);
    for (std::size_t i = 0; i < spec.p(); ++i) out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(i)) = row[i];
  }
  return out;
}

}  // namespace p3c
