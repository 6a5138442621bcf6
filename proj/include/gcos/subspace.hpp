#pragma once

// Per-class rolling feature queues (the Proposer's memory) and
// class-conditional PCA subspace models.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gcos/linalg.hpp"
#include "gcos/stats.hpp"

namespace gcos {

// Fixed-capacity FIFO over D-vectors; pushing into a full buffer evicts the
// oldest entry.
class FeatureRing {
 public:
  FeatureRing(std::size_t capacity, std::size_t dim);

  void push(std::span<const double> feature);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }
  // Oldest first.
  Matrix contents() const;

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
  std::vector<double> slots_;
};

class FeatureQueue {
 public:
  FeatureQueue(std::size_t num_classes, std::size_t capacity, std::size_t dim);

  void push(int label, std::span<const double> feature);
  // Rows of `features` pushed in order under their labels.
  void update(const Matrix& features, std::span<const int> labels);

  bool is_full() const;
  std::size_t num_classes() const { return rings_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t size(int label) const { return rings_.at(static_cast<std::size_t>(label)).size(); }
  Matrix contents(int label) const { return rings_.at(static_cast<std::size_t>(label)).contents(); }

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::vector<FeatureRing> rings_;
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // per-dimension std; constant dimensions use 1

  std::vector<double> apply(std::span<const double> z) const;
  std::vector<double> invert(std::span<const double> z) const;
};

inline constexpr double kEigenClamp = 1e-10;
inline constexpr double kDefaultEpsilon = 1e-6;

// M_k = (mu_k, V_k, Lambda_k) in the model's working space. When a
// standardizer is present, `mean`, `eigenvectors` and `eigenvalues` all
// live in standardized coordinates.
struct SubspaceModel {
  int class_id = 0;
  std::vector<double> mean;
  Matrix eigenvectors;  // D x D, column i is v_i
  std::vector<double> eigenvalues;  // descending, >= 0
  std::optional<Standardizer> standardizer;
  double epsilon = kDefaultEpsilon;

  std::size_t dim() const { return mean.size(); }
  std::vector<double> eigenvector(std::size_t i) const { return eigenvectors.column(i); }
  std::vector<double> to_model_space(std::span<const double> z) const;

  // Class mean and a unit direction (given in model space) mapped back to
  // raw feature coordinates.
  std::vector<double> raw_mean() const;
  std::vector<double> raw_direction(std::span<const double> model_direction) const;

  bool operator==(const SubspaceModel& other) const;
};

class SubspaceError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PcaOptions {
  bool standardize = false;
  double epsilon = kDefaultEpsilon;
};

// PCA of the (optionally standardized) sample covariance, denominator N-1.
SubspaceModel fit_pca(const Matrix& features, int class_id, const PcaOptions& options = {});

// Same, but the covariance comes from `pooled_centered` (class-centered
// features of all classes) while the mean stays class-specific.
SubspaceModel fit_pca_shared(const Matrix& features, const Matrix& pooled_centered, int class_id,
                             const PcaOptions& options = {});

struct ComponentSplit {
  std::vector<std::size_t> large;
  std::vector<std::size_t> small;
  double eta = 0.9;
};

// Large = minimal eigenvalue prefix whose sum reaches eta of the total.
ComponentSplit split_components(const SubspaceModel& model, double eta);

// Mean of the given unit directions, renormalized. Throws SubspaceError
// "degenerate average direction" if the mean has norm < 1e-8.
std::vector<double> mean_direction(std::span<const std::vector<double>> directions);

// Averages a uniform random subsample of min(num_directions, |small|) small
// eigenvectors (model space).
std::vector<double> average_direction(const SubspaceModel& model, const ComponentSplit& split,
                                      std::size_t num_directions, Rng& rng);

// Uniform random subsample of min(count, |small|) small indices, in
// ascending order.
std::vector<std::size_t> sample_small_directions(const ComponentSplit& split, std::size_t count, Rng& rng);

}  // namespace gcos
