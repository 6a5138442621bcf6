#pragma once

// Per-epoch Judge calibration on calib_online and the one-time final
// calibration on calib_final.

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcos/datasets.hpp"
#include "gcos/netmodel.hpp"
#include "gcos/scores.hpp"
#include "gcos/shellsynth.hpp"
#include "gcos/subspace.hpp"

namespace gcos {

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CalibrationConfig {
  double p_inner = 95.0;
  double p_outer = 99.0;
  bool standardize = true;
  double epsilon = kDefaultEpsilon;

  void validate() const;
};

struct EpochCalibration {
  std::vector<SubspaceModel> models;        // Judge, one per class
  std::vector<std::vector<double>> scores;  // own-class Mahalanobis scores, ascending
  std::vector<ShellSpec> shells;

  bool operator==(const EpochCalibration& other) const = default;
};

// Fits one Judge model per class on that class's features and scores the
// class's own features against it.
EpochCalibration calibrate_features(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                    const CalibrationConfig& config);

// Same, on features extracted by `network` (read only).
EpochCalibration run_epoch_calibration(const Network& network, const LabeledSet& calib_online,
                                       const CalibrationConfig& config);

// Oriented nonconformity of every input under every class, N x K, higher
// meaning more OOD. Only Mahalanobis depends on the class column; the
// logit-based kinds repeat one value across the row.
Matrix nonconformity(const Network& network, const Matrix& inputs, ScoreKind kind,
                     std::span<const SubspaceModel> models);

// (1 + #{s >= t}) / (1 + n) over an ascending calibration array.
double class_p_value(std::span<const double> sorted_scores, double test_score);

struct FinalCalibration {
  ScoreKind score_kind = ScoreKind::Mahalanobis;
  std::string checkpoint_hash;
  std::vector<std::vector<double>> class_scores;  // per class, ascending
  std::vector<SubspaceModel> models;              // empty unless Mahalanobis
  std::vector<double> risk_scores;                // 1 - p_final for each calib_final sample, ascending

  std::size_t num_classes() const { return class_scores.size(); }
  // p_k for each class and their max, for one row of class scores.
  std::vector<double> p_values(std::span<const double> scores_by_class) const;
  double p_final(std::span<const double> scores_by_class) const;

  bool operator==(const FinalCalibration& other) const = default;
};

// Scores calib_final under the frozen network. For Mahalanobis, `models`
// are the class models stored with the checkpoint.
FinalCalibration run_final_calibration(const Network& network, std::span<const SubspaceModel> models,
                                       const LabeledSet& calib_final, ScoreKind kind,
                                       const std::string& checkpoint_hash);

std::string to_json(const FinalCalibration& final);
FinalCalibration final_calibration_from_json(const std::string& text);
void save_final_calibration(const std::filesystem::path& path, const FinalCalibration& final);
FinalCalibration load_final_calibration(const std::filesystem::path& path);

}  // namespace gcos
