#pragma once

// Inference heads: raw energy, conformal p-values and the risk-controlled
// threshold. Every head reports a score oriented higher = more OOD.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcos/calibrate.hpp"
#include "gcos/netmodel.hpp"
#include "gcos/scores.hpp"

namespace gcos {

enum class Head { Energy, Conformal, RiskControl, Msp, MaxLogit };

Head parse_head(const std::string& name);
std::string to_string(Head head);

struct OodDecision {
  double score = 0.0;
  std::optional<double> p_value;
  bool is_ood = false;
  Head head = Head::Energy;
};

inline constexpr double kDefaultSignificance = 0.05;

class StaleCalibration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// E(z) = -logsumexp(logits).
double energy_inference(std::span<const double> logits);

// Logit-only heads: energy as is, MSP and MaxLogit negated.
double baseline_score(std::span<const double> logits, ScoreKind kind);

struct ConformalPValue {
  std::vector<double> per_class;
  double p_final = 1.0;
};

// p_k = (1 + #{s in S_k : s >= score_k}) / (1 + n_k), p_final = max_k p_k.
ConformalPValue conformal_p_value(std::span<const double> scores_by_class, const FinalCalibration& final);

// Binds a frozen network to its final calibration; construction fails with
// StaleCalibration when the hashes differ.
class ConformalHead {
 public:
  ConformalHead(Network network, FinalCalibration final, const std::string& checkpoint_hash);

  std::vector<ConformalPValue> p_values(const Matrix& inputs) const;
  std::vector<OodDecision> decide(const Matrix& inputs, double significance = kDefaultSignificance) const;
  // Risk-controlled decisions on S_OOD = 1 - p_final.
  std::vector<OodDecision> decide_risk(const Matrix& inputs, double alpha_risk) const;

  const FinalCalibration& calibration() const { return final_; }

 private:
  Network network_;
  FinalCalibration final_;
};

// (1 - alpha_risk) quantile of S_OOD over calib_final.
double risk_threshold(const FinalCalibration& final, double alpha_risk);
OodDecision risk_decide(double p_final, double tau);

}  // namespace gcos
