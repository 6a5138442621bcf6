#pragma once

// Virtual outlier synthesis in feature space: boundary search along a
// direction, conformal-shell sampling, and the Gaussian-tail baseline.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gcos/linalg.hpp"
#include "gcos/stats.hpp"
#include "gcos/subspace.hpp"

namespace gcos {

using ScoreFn = std::function<double(std::span<const double>)>;

// Smallest alpha in [0, alpha_max] (up to alpha_max * 2^-n_steps) with
// score(mu + alpha * v) >= q_target, assuming the score increases along v.
// Returns 0 when mu already reaches the target and alpha_max when even the
// far end does not.
double find_boundary_alpha(std::span<const double> mu, std::span<const double> v, double q_target,
                           const ScoreFn& score, double alpha_max, int n_steps);

struct ShellSpec {
  int class_id = 0;
  double q_inner = 0.0;
  double q_outer = 0.0;

  bool operator==(const ShellSpec& other) const = default;
};

enum class DirectionPolicy { AvgDirection, PerDirection };

DirectionPolicy parse_direction_policy(const std::string& name);
std::string to_string(DirectionPolicy policy);

struct SynthConfig {
  DirectionPolicy policy = DirectionPolicy::AvgDirection;
  std::size_t num_directions = 4;
  std::size_t per_class = 16;
  double eta = 0.9;
  double alpha_max = 100.0;
  int n_steps = 20;
  bool random_sign = true;

  void validate() const;
};

struct SynthesizedOutlier {
  std::vector<double> feature;
  int class_id = 0;
  std::optional<std::size_t> direction;  // eigenvector index; empty for the averaged direction
  double alpha = 0.0;
  int sign = 1;
};

struct SynthStats {
  std::size_t synthesized = 0;
  std::size_t degenerate_shells = 0;
  std::size_t skipped_classes = 0;

  SynthStats& operator+=(const SynthStats& other);
};

// Outliers for one class: directions come from the Proposer's small
// components, shell radii from the Judge's Mahalanobis quantiles. Each
// outlier is proposer_mean + sign * alpha * v with alpha uniform on the
// shell found along sign * v. Returns an empty list (and counts a skipped
// class) when the Proposer has no usable small component.
std::vector<SynthesizedOutlier> synthesize_class(const SubspaceModel& proposer, const SubspaceModel& judge,
                                                 const ShellSpec& shell, const SynthConfig& config, Rng& rng,
                                                 SynthStats& stats);

struct VosResult {
  Matrix features;
  std::size_t draws = 0;
  bool budget_exhausted = false;
};

// Fits a Gaussian to `class_features` and rejection-samples `count` points
// whose Mahalanobis distance is at least the (1 - tail) quantile of the
// class's own distances. tail >= 1 accepts every draw. At most 10 * count
// draws are made.
VosResult vos_gaussian_baseline(const Matrix& class_features, std::size_t count, double tail, Rng& rng);

}  // namespace gcos
