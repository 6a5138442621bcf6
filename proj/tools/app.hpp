#pragma once

// Command-line front end. `run` is the whole program minus process exit so
// that tests can drive it in-process.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gcos/infer.hpp"
#include "gcos/metrics.hpp"

namespace gcos::app {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kTrainingFailed = 3,
  kCalibrationMismatch = 4,
};

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct EvalOptions {
  Head head = Head::Energy;
  double significance = kDefaultSignificance;
  double alpha_risk = 0.05;
};

struct EvalRow {
  bool is_ood = false;
  OodDecision decision;
};

struct EvalOutput {
  std::vector<EvalRow> rows;  // test_id rows first, then test_ood
  MetricReport metrics;
  std::uint64_t seed = 0;
};

// Scores test_id and test_ood of `data_dir` with the checkpoint in
// `run_dir`. Conformal and risk heads need final_calibration.json there.
EvalOutput evaluate_run(const std::filesystem::path& run_dir, const std::filesystem::path& data_dir,
                        const EvalOptions& options);

std::string metrics_json(const EvalOutput& output, Head head);
std::string scores_csv(const EvalOutput& output);

}  // namespace gcos::app
