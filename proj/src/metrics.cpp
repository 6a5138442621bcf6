#include "gcos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace gcos {

namespace {

struct Counts {
  std::size_t n_id = 0, n_ood = 0;
};

Counts check(std::span<const ScoredSample> samples) {
  Counts c;
  for (const auto& s : samples) {
    if (!std::isfinite(s.score)) throw std::invalid_argument("metrics: non-finite score");
    (s.is_ood ? c.n_ood : c.n_id)++;
  }
  if (c.n_id == 0 || c.n_ood == 0) throw std::invalid_argument("metrics: need both ID and OOD samples");
  return c;
}

std::vector<ScoredSample> sorted(std::span<const ScoredSample> samples) {
  std::vector<ScoredSample> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end(), [](const ScoredSample& a, const ScoredSample& b) { return a.score < b.score; });
  return s;
}

}  // namespace

double auroc(std::span<const ScoredSample> samples) {
  const Counts c = check(samples);
  const auto s = sorted(samples);
  // Twice the count of (ID, OOD) pairs ordered correctly, ties once.
  std::uint64_t twice = 0, id_below = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    std::uint64_t id_here = 0, ood_here = 0;
    while (j < s.size() && s[j].score == s[i].score) (s[j++].is_ood ? ood_here : id_here)++;
    twice += 2 * ood_here * id_below + ood_here * id_here;
    id_below += id_here;
    i = j;
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(c.n_id) * static_cast<double>(c.n_ood));
}

double aupr(std::span<const ScoredSample> samples) {
  const Counts c = check(samples);
  const auto s = sorted(samples);
  double area = 0.0;
  std::uint64_t tp = 0, fp = 0, tp_prev = 0;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j].score == s[i].score) (s[j++].is_ood ? fp : tp)++;
    if (tp != tp_prev) {
      area += static_cast<double>(tp - tp_prev) / static_cast<double>(c.n_id) *
              (static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    tp_prev = tp;
    i = j;
  }
  return area;
}

double fpr_at_95_tpr(std::span<const ScoredSample> samples) {
  const Counts c = check(samples);
  std::vector<double> id;
  for (const auto& s : samples)
    if (!s.is_ood) id.push_back(s.score);
  std::sort(id.begin(), id.end());
  const std::size_t k = (95 * c.n_id + 99) / 100;  // ceil(0.95 n)
  const double gamma = id[k - 1];
  std::size_t accepted = 0;
  for (const auto& s : samples)
    if (s.is_ood && s.score <= gamma) ++accepted;
  return static_cast<double>(accepted) / static_cast<double>(c.n_ood);
}

MetricReport evaluate(std::span<const ScoredSample> samples) {
  const Counts c = check(samples);
  return {auroc(samples), aupr(samples), fpr_at_95_tpr(samples), c.n_id, c.n_ood};
}

std::vector<ScoredSample> make_samples(std::span<const double> id_scores, std::span<const double> ood_scores) {
  std::vector<ScoredSample> out;
  out.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) out.push_back({s, false});
  for (double s : ood_scores) out.push_back({s, true});
  return out;
}

}  // namespace gcos
