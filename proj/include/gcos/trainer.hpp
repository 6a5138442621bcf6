#pragma once

// The training loop: warm-up, per-epoch Judge calibration, per-batch
// outlier synthesis and the regularized objective.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcos/calibrate.hpp"
#include "gcos/datasets.hpp"
#include "gcos/losses.hpp"
#include "gcos/netmodel.hpp"
#include "gcos/shellsynth.hpp"

namespace gcos {

enum class SynthesisMode { Gcos, Vos, None };

SynthesisMode parse_synthesis_mode(const std::string& name);
std::string to_string(SynthesisMode mode);

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::invalid_argument(message), key(key) {}
  std::string key;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t start_epoch = 5;
  std::size_t batch_size = 64;
  double lr = 0.05;
  double weight_decay = 0.0;
  std::uint64_t seed = 1;
  std::size_t queue_capacity = 256;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t feature_dim = 16;

  SynthesisMode synthesis = SynthesisMode::Gcos;
  SynthConfig synth;
  LossConfig loss;
  CalibrationConfig calib;  // Judge
  bool proposer_standardize = false;
  bool shared_covariance = false;
  double vos_tail = 0.05;

  void validate() const;
};

// Flat key/value view. Unknown keys and unparsable values raise ConfigError
// naming the key.
TrainConfig config_from_map(const std::map<std::string, std::string>& kv, TrainConfig base = {});
std::map<std::string, std::string> config_to_map(const TrainConfig& config);
// "key = value" lines; '#' starts a comment.
std::map<std::string, std::string> parse_kv_text(const std::string& text);

struct EpochLog {
  std::size_t epoch = 0;
  double ce = 0.0;     // mean over batches
  double reg = 0.0;    // mean over batches that had a reg term, else 0
  double total = 0.0;  // mean over batches
  std::size_t reg_batches = 0;
  double train_ce = 0.0;  // full training split, weights at the end of the epoch
};

struct RunManifest {
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string synthesis;
  std::vector<EpochLog> epochs;
  std::string checkpoint_hash;
  double wall_time_seconds = 0.0;
  SynthStats synth_stats;
  std::size_t vos_budget_exhausted = 0;

  std::string to_json() const;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::size_t batch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + what),
        epoch(epoch),
        batch(batch) {}
  std::size_t epoch;
  std::size_t batch;
};

struct TrainResult {
  Network network;
  // Judge models refit on calib_online with the final weights; stored in
  // the checkpoint for Mahalanobis scoring at inference.
  std::vector<SubspaceModel> judge_models;
  RunManifest manifest;
  // Proposer queue contents per class at the end of training, oldest first.
  std::vector<Matrix> queue_contents;
};

// The seeded network train() starts from.
Network initial_network(const TrainConfig& config, std::size_t input_dim, std::size_t num_classes);

// Reads train and calib_online only.
TrainResult train(const SplitBundle& bundle, const TrainConfig& config);

// train() with VOS Gaussian-tail synthesis and the uncertainty loss.
TrainResult train_baseline_vos(const SplitBundle& bundle, TrainConfig config);

void save_run(const std::filesystem::path& dir, const TrainResult& result);

}  // namespace gcos
