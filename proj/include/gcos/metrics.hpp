#pragma once

// Detection metrics with ID as the positive class. Scores are oriented
// higher = more OOD; a sample is called ID when its score is <= threshold.

#include <cstddef>
#include <span>
#include <vector>

namespace gcos {

struct ScoredSample {
  double score = 0.0;
  bool is_ood = false;
};

// P(score_ID < score_OOD) + 1/2 P(tie).
double auroc(std::span<const ScoredSample> samples);

// Step-wise area under precision/recall, thresholds at each distinct score
// in ascending order: sum_j (R_j - R_{j-1}) * P_j.
double aupr(std::span<const ScoredSample> samples);

// Fraction of OOD with score <= gamma, gamma the ceil(0.95 n_id)-th smallest
// ID score.
double fpr_at_95_tpr(std::span<const ScoredSample> samples);

struct MetricReport {
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

MetricReport evaluate(std::span<const ScoredSample> samples);

std::vector<ScoredSample> make_samples(std::span<const double> id_scores, std::span<const double> ood_scores);

}  // namespace gcos
