#include "gcos/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace gcos {

FeatureRing::FeatureRing(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), slots_(capacity * dim, 0.0) {
  if (capacity == 0) throw std::invalid_argument("FeatureRing: capacity must be positive");
}

void FeatureRing::push(std::span<const double> feature) {
  if (feature.size() != dim_) {
    throw std::invalid_argument("FeatureRing: feature width " + std::to_string(feature.size()) +
                                " != " + std::to_string(dim_));
  }
  std::copy(feature.begin(), feature.end(), slots_.begin() + static_cast<std::ptrdiff_t>(head_ * dim_));
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

Matrix FeatureRing::contents() const {
  Matrix out(size_, dim_);
  const std::size_t start = (head_ + capacity_ - size_) % capacity_;
  for (std::size_t i = 0; i < size_; ++i) {
    const std::size_t slot = (start + i) % capacity_;
    std::copy_n(slots_.begin() + static_cast<std::ptrdiff_t>(slot * dim_), dim_, out.row(i).begin());
  }
  return out;
}

FeatureQueue::FeatureQueue(std::size_t num_classes, std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), rings_(num_classes, FeatureRing(capacity, dim)) {}

void FeatureQueue::push(int label, std::span<const double> feature) {
  if (label < 0 || static_cast<std::size_t>(label) >= rings_.size()) {
    throw std::out_of_range("FeatureQueue: label " + std::to_string(label) + " out of range");
  }
  rings_[static_cast<std::size_t>(label)].push(feature);
}

void FeatureQueue::update(const Matrix& features, std::span<const int> labels) {
  for (std::size_t r = 0; r < features.rows(); ++r) push(labels[r], features.row(r));
}

bool FeatureQueue::is_full() const {
  return std::all_of(rings_.begin(), rings_.end(), [](const FeatureRing& r) { return r.full(); });
}

std::vector<double> Standardizer::apply(std::span<const double> z) const {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - mean[i]) / scale[i];
  return out;
}

std::vector<double> Standardizer::invert(std::span<const double> z) const {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] * scale[i] + mean[i];
  return out;
}

std::vector<double> SubspaceModel::to_model_space(std::span<const double> z) const {
  if (z.size() != dim()) {
    throw SubspaceError("feature width " + std::to_string(z.size()) + " does not match model dimension " +
                        std::to_string(dim()));
  }
  if (standardizer) return standardizer->apply(z);
  return {z.begin(), z.end()};
}

std::vector<double> SubspaceModel::raw_mean() const {
  if (standardizer) return standardizer->invert(mean);
  return mean;
}

std::vector<double> SubspaceModel::raw_direction(std::span<const double> model_direction) const {
  std::vector<double> dir(model_direction.begin(), model_direction.end());
  if (!standardizer) return dir;
  for (std::size_t i = 0; i < dir.size(); ++i) dir[i] *= standardizer->scale[i];
  const double n = norm(dir);
  for (double& x : dir) x /= n;
  return dir;
}

bool SubspaceModel::operator==(const SubspaceModel& other) const {
  auto same_std = [](const std::optional<Standardizer>& a, const std::optional<Standardizer>& b) {
    if (a.has_value() != b.has_value()) return false;
    return !a || (a->mean == b->mean && a->scale == b->scale);
  };
  return class_id == other.class_id && mean == other.mean && eigenvectors == other.eigenvectors &&
         eigenvalues == other.eigenvalues && epsilon == other.epsilon &&
         same_std(standardizer, other.standardizer);
}

namespace {

void validate_features(const Matrix& features) {
  if (features.rows() < 2) {
    throw SubspaceError("fit_pca: need at least 2 samples, got " + std::to_string(features.rows()));
  }
  for (double v : features.data())
    if (!std::isfinite(v)) throw SubspaceError("fit_pca: non-finite feature value");
}

Standardizer make_standardizer(std::vector<double> center, const Matrix& spread_source,
                               std::span<const double> spread_center) {
  Standardizer s;
  s.mean = std::move(center);
  const Matrix cov = covariance(spread_source, spread_center);
  s.scale.resize(cov.rows());
  for (std::size_t i = 0; i < cov.rows(); ++i) {
    const double sd = std::sqrt(std::max(cov(i, i), 0.0));
    s.scale[i] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Matrix standardize_rows(const Matrix& x, const Standardizer& s) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = s.apply(x.row(r));
    std::copy(row.begin(), row.end(), out.row(r).begin());
  }
  return out;
}

SubspaceModel from_covariance(int class_id, std::vector<double> mean, const Matrix& cov,
                              std::optional<Standardizer> standardizer, double epsilon) {
  EigenDecomposition eig = symmetric_eigen(cov);
  for (double& l : eig.values)
    if (l < kEigenClamp) l = 0.0;
  SubspaceModel model;
  model.class_id = class_id;
  model.mean = std::move(mean);
  model.eigenvectors = std::move(eig.vectors);
  model.eigenvalues = std::move(eig.values);
  model.standardizer = std::move(standardizer);
  model.epsilon = epsilon;
  return model;
}

}  // namespace

SubspaceModel fit_pca(const Matrix& features, int class_id, const PcaOptions& options) {
  validate_features(features);
  std::vector<double> mu = column_means(features);
  if (!options.standardize) {
    const Matrix cov = covariance(features, mu);
    return from_covariance(class_id, std::move(mu), cov, std::nullopt, options.epsilon);
  }
  Standardizer s = make_standardizer(mu, features, mu);
  const Matrix z = standardize_rows(features, s);
  std::vector<double> zmu = column_means(z);
  const Matrix cov = covariance(z, zmu);
  return from_covariance(class_id, std::move(zmu), cov, std::move(s), options.epsilon);
}

SubspaceModel fit_pca_shared(const Matrix& features, const Matrix& pooled_centered, int class_id,
                             const PcaOptions& options) {
  validate_features(features);
  validate_features(pooled_centered);
  if (pooled_centered.cols() != features.cols()) {
    throw SubspaceError("fit_pca_shared: pooled width " + std::to_string(pooled_centered.cols()) +
                        " != class width " + std::to_string(features.cols()));
  }
  std::vector<double> mu = column_means(features);
  const std::vector<double> zero(features.cols(), 0.0);
  if (!options.standardize) {
    const Matrix cov = covariance(pooled_centered, zero);
    return from_covariance(class_id, std::move(mu), cov, std::nullopt, options.epsilon);
  }
  Standardizer s = make_standardizer(mu, pooled_centered, zero);
  Matrix scaled(pooled_centered.rows(), pooled_centered.cols());
  for (std::size_t r = 0; r < scaled.rows(); ++r)
    for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) = pooled_centered(r, c) / s.scale[c];
  const Matrix cov = covariance(scaled, zero);
  return from_covariance(class_id, zero, cov, std::move(s), options.epsilon);
}

ComponentSplit split_components(const SubspaceModel& model, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw SubspaceError("split_components: eta must lie in (0, 1)");
  const auto& lambda = model.eigenvalues;
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  // Relative slack absorbs rounding in the prefix sum so that exact ratios
  // such as 9 / 10 at eta = 0.9 count as reaching the threshold.
  const double target = eta * total * (1.0 - 1e-12);
  ComponentSplit split;
  split.eta = eta;
  double prefix = 0.0;
  std::size_t cut = 0;
  while (cut < lambda.size() && prefix < target) prefix += lambda[cut++];
  for (std::size_t i = 0; i < lambda.size(); ++i) (i < cut ? split.large : split.small).push_back(i);
  return split;
}

std::vector<double> mean_direction(std::span<const std::vector<double>> directions) {
  if (directions.empty()) throw SubspaceError("no off-manifold directions");
  std::vector<double> avg(directions.front().size(), 0.0);
  for (const auto& d : directions)
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += d[i];
  for (double& x : avg) x /= static_cast<double>(directions.size());
  const double n = norm(avg);
  if (n < 1e-8) throw SubspaceError("degenerate average direction");
  for (double& x : avg) x /= n;
  return avg;
}

std::vector<std::size_t> sample_small_directions(const ComponentSplit& split, std::size_t count, Rng& rng) {
  if (split.small.empty()) throw SubspaceError("no off-manifold directions");
  if (count == 0) throw SubspaceError("num_directions must be positive");
  const std::size_t take = std::min(count, split.small.size());
  std::vector<std::size_t> picked;
  picked.reserve(take);
  std::sample(split.small.begin(), split.small.end(), std::back_inserter(picked), take, rng);
  return picked;
}

std::vector<double> average_direction(const SubspaceModel& model, const ComponentSplit& split,
                                      std::size_t num_directions, Rng& rng) {
  const auto picked = sample_small_directions(split, num_directions, rng);
  std::vector<std::vector<double>> dirs;
  dirs.reserve(picked.size());
  for (std::size_t i : picked) dirs.push_back(model.eigenvector(i));
  return mean_direction(dirs);
}

}  // namespace gcos
