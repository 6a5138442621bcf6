#pragma once

// Training objectives built on the autodiff graph. Every score fed to a
// hinge is oriented so that higher means more OOD.

#include <optional>
#include <span>
#include <string>

#include "gcos/diffgraph.hpp"
#include "gcos/subspace.hpp"

namespace gcos {

enum class LossKind { Uncertainty, RegEnergy, RegMahalanobis };
enum class Pairing { AllPairs, BroadcastMean };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);
Pairing parse_pairing(const std::string& name);
std::string to_string(Pairing pairing);

struct LossConfig {
  LossKind kind = LossKind::RegEnergy;
  double lambda = 0.01;  // 0.1 diverges on the default blobs task
  double p_low = 50.0;
  double p_high = 95.0;
  double m_default = 1.0;
  Pairing pairing = Pairing::BroadcastMean;

  void validate() const;
};

// Mean over rows of logsumexp(logits) - logits[label].
diff::Var cross_entropy(diff::Graph& g, diff::Var logits, std::span<const int> labels);

// max(0, Q(p_high) - Q(p_low)) of s_pos when it has more than one entry,
// m_default otherwise. A plain number: the margin carries no gradient.
double adaptive_margin(std::span<const double> s_pos, double p_low, double p_high, double m_default);

// all_pairs: mean_ij max(0, s_pos_i - s_neg_j + m)
// broadcast_mean: mean_i max(0, s_pos_i - mean(s_neg) + m)
diff::Var reg_loss(diff::Graph& g, diff::Var s_pos, diff::Var s_neg, double margin, Pairing pairing);

// BCE on phi-logits with ID as target 1 and outliers as target 0, each side
// averaged separately.
diff::Var uncertainty_loss(diff::Graph& g, diff::Var phi_id, diff::Var phi_ood);

// ce + lambda * reg; exactly ce when there is no reg term or lambda is 0.
diff::Var total_loss(diff::Graph& g, diff::Var ce, std::optional<diff::Var> reg, double lambda);

// -logsumexp per row.
diff::Var energy_scores(diff::Graph& g, diff::Var logits);

// Row-wise Mahalanobis distance of raw features [B x D] under one model.
diff::Var mahalanobis_scores(diff::Graph& g, diff::Var features, const SubspaceModel& model);

// Row-wise Mahalanobis under each row's own class model.
diff::Var own_class_mahalanobis(diff::Graph& g, diff::Var features, std::span<const int> labels,
                                std::span<const SubspaceModel> models);

// Row-wise min over class models.
diff::Var min_class_mahalanobis(diff::Graph& g, diff::Var features, std::span<const SubspaceModel> models);

}  // namespace gcos
