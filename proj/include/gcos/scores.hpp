#pragma once

// Scalar OOD scores over logits and features.

#include <span>
#include <stdexcept>
#include <string>

#include "gcos/subspace.hpp"

namespace gcos {

enum class ScoreKind { Mahalanobis, Energy, EnergyStrangeness, Msp, MaxLogit };

ScoreKind parse_score_kind(const std::string& name);
std::string to_string(ScoreKind kind);

// -logsumexp(logits). Lower is more ID-like.
double energy(std::span<const double> logits);

// sum_i ((z - mu) . v_i)^2 / (lambda_i + eps), with z taken into the
// model's working space first (raw features in, standardized if the model
// carries a standardizer).
double mahalanobis(std::span<const double> z, const SubspaceModel& model);

// log sum_i w_i exp(l_i). An empty `weights` span means all ones.
double energy_strangeness(std::span<const double> logits, std::span<const double> weights = {});

double msp(std::span<const double> logits);
double maxlogit(std::span<const double> logits);

double logsumexp(std::span<const double> values);

}  // namespace gcos
