#include "gcos/scores.hpp"

#include <algorithm>
#include <cmath>

namespace gcos {

ScoreKind parse_score_kind(const std::string& name) {
  if (name == "mahalanobis") return ScoreKind::Mahalanobis;
  if (name == "energy") return ScoreKind::Energy;
  if (name == "energy_strangeness") return ScoreKind::EnergyStrangeness;
  if (name == "msp") return ScoreKind::Msp;
  if (name == "maxlogit") return ScoreKind::MaxLogit;
  throw std::invalid_argument("unknown score kind '" + name + "'");
}

std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Mahalanobis: return "mahalanobis";
    case ScoreKind::Energy: return "energy";
    case ScoreKind::EnergyStrangeness: return "energy_strangeness";
    case ScoreKind::Msp: return "msp";
    case ScoreKind::MaxLogit: return "maxlogit";
  }
  return "?";
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("logsumexp of an empty vector");
  const double m = *std::max_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double energy(std::span<const double> logits) { return -logsumexp(logits); }

double mahalanobis(std::span<const double> z, const SubspaceModel& model) {
  const std::vector<double> x = model.to_model_space(z);
  const std::size_t d = model.dim();
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < d; ++i) centered[i] = x[i] - model.mean[i];
  double total = 0.0;
  for (std::size_t c = 0; c < d; ++c) {
    double proj = 0.0;
    for (std::size_t r = 0; r < d; ++r) proj += centered[r] * model.eigenvectors(r, c);
    total += proj * proj / (model.eigenvalues[c] + model.epsilon);
  }
  return total;
}

double energy_strangeness(std::span<const double> logits, std::span<const double> weights) {
  if (weights.empty()) return logsumexp(logits);
  if (weights.size() != logits.size()) throw std::invalid_argument("energy_strangeness: weight count mismatch");
  std::vector<double> shifted(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!(weights[i] > 0)) throw std::invalid_argument("energy_strangeness: weights must be positive");
    shifted[i] = logits[i] + std::log(weights[i]);
  }
  return logsumexp(shifted);
}

double msp(std::span<const double> logits) { return std::exp(maxlogit(logits) - logsumexp(logits)); }

double maxlogit(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("maxlogit of an empty vector");
  return *std::max_element(logits.begin(), logits.end());
}

}  // namespace gcos
