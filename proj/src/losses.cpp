#include "gcos/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gcos/stats.hpp"

namespace gcos {

using diff::Graph;
using diff::Tensor;
using diff::Var;

LossKind parse_loss_kind(const std::string& name) {
  if (name == "uncertainty") return LossKind::Uncertainty;
  if (name == "reg_energy") return LossKind::RegEnergy;
  if (name == "reg_mahalanobis") return LossKind::RegMahalanobis;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Uncertainty: return "uncertainty";
    case LossKind::RegEnergy: return "reg_energy";
    case LossKind::RegMahalanobis: return "reg_mahalanobis";
  }
  return "?";
}

Pairing parse_pairing(const std::string& name) {
  if (name == "all_pairs") return Pairing::AllPairs;
  if (name == "broadcast_mean") return Pairing::BroadcastMean;
  throw std::invalid_argument("unknown pairing '" + name + "'");
}

std::string to_string(Pairing pairing) { return pairing == Pairing::AllPairs ? "all_pairs" : "broadcast_mean"; }

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("loss.lambda must be nonnegative");
  if (!(p_low > 0.0 && p_low < p_high && p_high < 100.0)) {
    throw std::invalid_argument("margin percentiles need 0 < p_low < p_high < 100");
  }
  if (!std::isfinite(m_default)) throw std::invalid_argument("margin.default must be finite");
}

Var cross_entropy(Graph& g, Var logits, std::span<const int> labels) {
  return g.mean(g.sub(g.logsumexp(logits), g.pick(logits, labels)));
}

double adaptive_margin(std::span<const double> s_pos, double p_low, double p_high, double m_default) {
  if (s_pos.size() <= 1) return m_default;
  std::vector<double> sorted(s_pos.begin(), s_pos.end());
  std::sort(sorted.begin(), sorted.end());
  return std::max(0.0, quantile(sorted, p_high) - quantile(sorted, p_low));
}

Var reg_loss(Graph& g, Var s_pos, Var s_neg, double margin, Pairing pairing) {
  if (g.value(s_pos).size() == 0 || g.value(s_neg).size() == 0) {
    throw std::invalid_argument("reg_loss: empty score list");
  }
  const Var rhs = pairing == Pairing::AllPairs ? s_neg : g.mean(s_neg);
  return g.mean(g.hinge(g.pairwise_sub(s_pos, rhs), margin));
}

Var uncertainty_loss(Graph& g, Var phi_id, Var phi_ood) {
  return g.add(g.mean(g.sigmoid_logit_bce(phi_id, 1.0)), g.mean(g.sigmoid_logit_bce(phi_ood, 0.0)));
}

Var total_loss(Graph& g, Var ce, std::optional<Var> reg, double lambda) {
  if (!reg || lambda == 0.0) return ce;
  return g.add(ce, g.scale(*reg, lambda));
}

Var energy_scores(Graph& g, Var logits) { return g.neg(g.logsumexp(logits)); }

Var mahalanobis_scores(Graph& g, Var features, const SubspaceModel& model) {
  const std::size_t d = model.dim();
  // With a standardizer x = (z - m) / s, so (x - mu) = (z - (m + s * mu)) / s.
  std::vector<double> center(d), inv_scale(d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (model.standardizer) {
      center[i] = model.standardizer->mean[i] + model.standardizer->scale[i] * model.mean[i];
      inv_scale[i] = 1.0 / model.standardizer->scale[i];
    } else {
      center[i] = model.mean[i];
    }
  }
  std::vector<double> w(d * d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      w[r * d + c] = inv_scale[r] * model.eigenvectors(r, c) / std::sqrt(model.eigenvalues[c] + model.epsilon);
  for (double& x : center) x = -x;
  const Var shifted = g.add_bias(features, g.constant(Tensor::vector(std::move(center))));
  const Var projected = g.matmul(shifted, g.constant(Tensor::matrix(d, d, std::move(w))));
  return g.row_sum(g.mul(projected, projected));
}

Var own_class_mahalanobis(Graph& g, Var features, std::span<const int> labels, std::span<const SubspaceModel> models) {
  std::vector<Var> columns;
  for (const auto& m : models) columns.push_back(mahalanobis_scores(g, features, m));
  return g.pick(g.stack_columns(columns), labels);
}

Var min_class_mahalanobis(Graph& g, Var features, std::span<const SubspaceModel> models) {
  std::vector<Var> columns;
  for (const auto& m : models) columns.push_back(mahalanobis_scores(g, features, m));
  return g.row_min(g.stack_columns(columns));
}

}  // namespace gcos
