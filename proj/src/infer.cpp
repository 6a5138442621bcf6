#include "gcos/infer.hpp"

#include <algorithm>

#include "gcos/stats.hpp"

namespace gcos {

Head parse_head(const std::string& name) {
  if (name == "energy") return Head::Energy;
  if (name == "conformal") return Head::Conformal;
  if (name == "risk") return Head::RiskControl;
  if (name == "msp") return Head::Msp;
  if (name == "maxlogit") return Head::MaxLogit;
  throw std::invalid_argument("unknown head '" + name + "'");
}

std::string to_string(Head head) {
  switch (head) {
    case Head::Energy: return "energy";
    case Head::Conformal: return "conformal";
    case Head::RiskControl: return "risk";
    case Head::Msp: return "msp";
    case Head::MaxLogit: return "maxlogit";
  }
  return "?";
}

double energy_inference(std::span<const double> logits) { return energy(logits); }

double baseline_score(std::span<const double> logits, ScoreKind kind) {
  switch (kind) {
    case ScoreKind::Energy: return energy(logits);
    case ScoreKind::EnergyStrangeness: return -energy_strangeness(logits);
    case ScoreKind::Msp: return -msp(logits);
    case ScoreKind::MaxLogit: return -maxlogit(logits);
    case ScoreKind::Mahalanobis: break;
  }
  throw std::invalid_argument("baseline_score: '" + to_string(kind) + "' is not a logit score");
}

ConformalPValue conformal_p_value(std::span<const double> scores_by_class, const FinalCalibration& final) {
  ConformalPValue out;
  out.per_class = final.p_values(scores_by_class);
  out.p_final = *std::max_element(out.per_class.begin(), out.per_class.end());
  return out;
}

ConformalHead::ConformalHead(Network network, FinalCalibration final, const std::string& checkpoint_hash)
    : network_(std::move(network)), final_(std::move(final)) {
  if (final_.checkpoint_hash != checkpoint_hash) {
    throw StaleCalibration("final calibration was made for checkpoint " + final_.checkpoint_hash +
                           ", model is " + checkpoint_hash);
  }
  if (final_.num_classes() != network_.num_classes()) {
    throw StaleCalibration("final calibration class count does not match the model");
  }
}

std::vector<ConformalPValue> ConformalHead::p_values(const Matrix& inputs) const {
  const Matrix scores = nonconformity(network_, inputs, final_.score_kind, final_.models);
  std::vector<ConformalPValue> out;
  out.reserve(inputs.rows());
  for (std::size_t i = 0; i < inputs.rows(); ++i) out.push_back(conformal_p_value(scores.row(i), final_));
  return out;
}

std::vector<OodDecision> ConformalHead::decide(const Matrix& inputs, double significance) const {
  std::vector<OodDecision> out;
  for (const auto& p : p_values(inputs)) out.push_back({1.0 - p.p_final, p.p_final, p.p_final < significance, Head::Conformal});
  return out;
}

std::vector<OodDecision> ConformalHead::decide_risk(const Matrix& inputs, double alpha_risk) const {
  const double tau = risk_threshold(final_, alpha_risk);
  std::vector<OodDecision> out;
  for (const auto& p : p_values(inputs)) out.push_back(risk_decide(p.p_final, tau));
  return out;
}

double risk_threshold(const FinalCalibration& final, double alpha_risk) {
  if (!(alpha_risk > 0.0 && alpha_risk < 1.0)) throw std::invalid_argument("alpha_risk must lie in (0, 1)");
  if (final.risk_scores.empty()) throw std::invalid_argument("risk_threshold: empty calibration");
  return quantile(final.risk_scores, 100.0 * (1.0 - alpha_risk));
}

OodDecision risk_decide(double p_final, double tau) {
  const double s = 1.0 - p_final;
  return {s, p_final, s > tau, Head::RiskControl};
}

}  // namespace gcos
