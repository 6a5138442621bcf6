#include "gcos/shellsynth.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "gcos/scores.hpp"

namespace gcos {

double find_boundary_alpha(std::span<const double> mu, std::span<const double> v, double q_target,
                           const ScoreFn& score, double alpha_max, int n_steps) {
  if (!(alpha_max > 0)) throw std::invalid_argument("find_boundary_alpha: alpha_max must be positive");
  if (n_steps < 1) throw std::invalid_argument("find_boundary_alpha: n_steps must be >= 1");
  if (mu.size() != v.size()) throw std::invalid_argument("find_boundary_alpha: mu and v differ in size");
  std::vector<double> point(mu.begin(), mu.end());
  auto at = [&](double alpha) {
    for (std::size_t i = 0; i < point.size(); ++i) point[i] = mu[i] + alpha * v[i];
    return score(point);
  };
  if (at(0.0) >= q_target) return 0.0;
  if (at(alpha_max) < q_target) return alpha_max;
  double lo = 0.0, hi = alpha_max;
  for (int s = 0; s < n_steps; ++s) {
    const double mid = 0.5 * (lo + hi);
    if (at(mid) >= q_target) hi = mid;
    else lo = mid;
  }
  return hi;
}

DirectionPolicy parse_direction_policy(const std::string& name) {
  if (name == "avg_direction") return DirectionPolicy::AvgDirection;
  if (name == "per_direction") return DirectionPolicy::PerDirection;
  throw std::invalid_argument("unknown direction policy '" + name + "'");
}

std::string to_string(DirectionPolicy policy) {
  return policy == DirectionPolicy::AvgDirection ? "avg_direction" : "per_direction";
}

void SynthConfig::validate() const {
  if (num_directions == 0 || per_class == 0) throw std::invalid_argument("synthesis counts must be positive");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("synthesis eta must lie in (0, 1)");
  if (!(alpha_max > 0.0)) throw std::invalid_argument("synthesis alpha_max must be positive");
  if (n_steps < 1) throw std::invalid_argument("synthesis n_steps must be >= 1");
}

SynthStats& SynthStats::operator+=(const SynthStats& other) {
  synthesized += other.synthesized;
  degenerate_shells += other.degenerate_shells;
  skipped_classes += other.skipped_classes;
  return *this;
}

namespace {

struct Shell {
  double inner = 0.0;
  double outer = 0.0;
};

}  // namespace

std::vector<SynthesizedOutlier> synthesize_class(const SubspaceModel& proposer, const SubspaceModel& judge,
                                                 const ShellSpec& shell, const SynthConfig& config, Rng& rng,
                                                 SynthStats& stats) {
  config.validate();
  if (shell.q_inner > shell.q_outer) throw std::invalid_argument("shell: q_inner exceeds q_outer");

  const ComponentSplit split = split_components(proposer, config.eta);
  if (split.small.empty()) {
    ++stats.skipped_classes;
    return {};
  }

  // Candidate directions in raw feature coordinates.
  std::vector<std::vector<double>> directions;
  std::vector<std::optional<std::size_t>> tags;
  try {
    if (config.policy == DirectionPolicy::AvgDirection) {
      directions.push_back(proposer.raw_direction(average_direction(proposer, split, config.num_directions, rng)));
      tags.emplace_back(std::nullopt);
    } else {
      for (std::size_t idx : sample_small_directions(split, config.num_directions, rng)) {
        directions.push_back(proposer.raw_direction(proposer.eigenvector(idx)));
        tags.emplace_back(idx);
      }
    }
  } catch (const SubspaceError&) {
    ++stats.skipped_classes;
    return {};
  }

  const std::vector<double> mu = proposer.raw_mean();
  const ScoreFn judge_score = [&judge](std::span<const double> z) { return mahalanobis(z, judge); };
  std::map<std::pair<std::size_t, int>, Shell> shells;
  auto shell_for = [&](std::size_t d, int sign) -> Shell {
    auto it = shells.find({d, sign});
    if (it != shells.end()) return it->second;
    std::vector<double> v = directions[d];
    for (double& x : v) x *= sign;
    Shell s{find_boundary_alpha(mu, v, shell.q_inner, judge_score, config.alpha_max, config.n_steps),
            find_boundary_alpha(mu, v, shell.q_outer, judge_score, config.alpha_max, config.n_steps)};
    if (s.inner > s.outer) {
      ++stats.degenerate_shells;
      s.inner = s.outer;
    }
    shells.emplace(std::make_pair(d, sign), s);
    return s;
  };

  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<SynthesizedOutlier> out;
  out.reserve(config.per_class);
  for (std::size_t i = 0; i < config.per_class; ++i) {
    const std::size_t d = i % directions.size();
    const int sign = config.random_sign ? (coin(rng) ? 1 : -1) : 1;
    const Shell s = shell_for(d, sign);
    const double alpha = s.inner + (s.outer - s.inner) * unit(rng);
    SynthesizedOutlier o;
    o.feature.resize(mu.size());
    for (std::size_t j = 0; j < mu.size(); ++j) o.feature[j] = mu[j] + sign * alpha * directions[d][j];
    o.class_id = shell.class_id;
    o.direction = tags[d];
    o.alpha = alpha;
    o.sign = sign;
    out.push_back(std::move(o));
  }
  stats.synthesized += out.size();
  return out;
}

VosResult vos_gaussian_baseline(const Matrix& class_features, std::size_t count, double tail, Rng& rng) {
  if (class_features.rows() < 2) throw std::invalid_argument("vos: need at least 2 samples per class");
  if (!(tail > 0.0)) throw std::invalid_argument("vos: tail quantile must be positive");
  const SubspaceModel model = fit_pca(class_features, 0);
  const std::size_t d = model.dim();

  double threshold = 0.0;
  const bool accept_all = tail >= 1.0;
  if (!accept_all) {
    std::vector<double> own(class_features.rows());
    for (std::size_t r = 0; r < own.size(); ++r) own[r] = mahalanobis(class_features.row(r), model);
    threshold = quantile_unsorted(own, 100.0 * (1.0 - tail));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  VosResult result;
  result.features = Matrix(0, d);
  std::vector<double> x(d);
  const std::size_t budget = 10 * count;
  while (result.features.rows() < count && result.draws < budget) {
    ++result.draws;
    x = model.mean;
    for (std::size_t c = 0; c < d; ++c) {
      const double step = std::sqrt(model.eigenvalues[c]) * normal(rng);
      for (std::size_t r = 0; r < d; ++r) x[r] += step * model.eigenvectors(r, c);
    }
    if (accept_all || mahalanobis(x, model) >= threshold) result.features.append_row(x);
  }
  result.budget_exhausted = result.features.rows() < count;
  return result;
}

}  // namespace gcos
