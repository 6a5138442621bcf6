#include "app.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "gcos/calibrate.hpp"
#include "gcos/datasets.hpp"
#include "gcos/netmodel.hpp"
#include "gcos/shellsynth.hpp"
#include "gcos/trainer.hpp"

namespace gcos::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Maps onto the usage/config exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::map<std::string, std::string> parse_sets(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

// File values first, --set values win.
std::map<std::string, std::string> merged_kv(const std::string& file, const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  if (!file.empty()) kv = parse_kv_text(read_text(file));
  for (auto& [k, v] : parse_sets(sets)) kv[k] = v;
  return kv;
}

TrainConfig load_train_config(const std::string& file, const std::vector<std::string>& sets,
                              const std::string& baseline) {
  auto kv = merged_kv(file, sets);
  if (baseline == "vos") {
    kv["synthesis"] = "vos";
    kv["loss.kind"] = "uncertainty";
  } else if (baseline == "none") {
    kv["synthesis"] = "none";
  } else if (!baseline.empty()) {
    throw UsageError("--baseline must be 'vos' or 'none'");
  }
  return config_from_map(kv);
}

std::uint64_t run_seed(const fs::path& run_dir) {
  const fs::path manifest = run_dir / "manifest.json";
  if (!fs::exists(manifest)) return 0;
  return json::parse(read_text(manifest)).value("seed", std::uint64_t{0});
}

struct LoadedRun {
  Checkpoint checkpoint;
  std::string hash;
};

LoadedRun load_run(const fs::path& run_dir) {
  const fs::path path = run_dir / "checkpoint.bin";
  if (!fs::exists(path)) throw UsageError("no checkpoint.bin in '" + run_dir.string() + "'");
  const std::string bytes = read_text(path);
  return {deserialize_checkpoint(bytes), content_hash(bytes)};
}

std::vector<double> logit_scores(const Network& net, const Matrix& inputs, ScoreKind kind) {
  const Matrix logits = net.logits(net.features(inputs));
  std::vector<double> out(inputs.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = baseline_score(logits.row(i), kind);
  return out;
}

ScoreKind head_score_kind(Head head) {
  switch (head) {
    case Head::Msp: return ScoreKind::Msp;
    case Head::MaxLogit: return ScoreKind::MaxLogit;
    default: return ScoreKind::Energy;
  }
}

void warn_small_calibration(const SplitBundle& bundle, std::ostream& err) {
  for (const LabeledSet* set : {&bundle.calib_online, &bundle.calib_final}) {
    for (std::size_t k = 0; k < set->num_classes; ++k) {
      if (set->count(static_cast<int>(k)) < 100) {
        err << "warning: calibration split has " << set->count(static_cast<int>(k)) << " samples of class " << k
            << " (at least 100 recommended)\n";
        return;
      }
    }
  }
}

FinalCalibration calibrate_run(const fs::path& run_dir, const fs::path& data_dir, ScoreKind kind) {
  const LoadedRun run = load_run(run_dir);
  const SplitBundle bundle = load_bundle(data_dir);
  return run_final_calibration(run.checkpoint.network, run.checkpoint.subspaces, bundle.calib_final, kind, run.hash);
}

}  // namespace

EvalOutput evaluate_run(const fs::path& run_dir, const fs::path& data_dir, const EvalOptions& options) {
  const LoadedRun run = load_run(run_dir);
  const SplitBundle bundle = load_bundle(data_dir);
  const Network& net = run.checkpoint.network;
  Matrix inputs = bundle.test_id.inputs;
  for (std::size_t i = 0; i < bundle.test_ood.size(); ++i) inputs.append_row(bundle.test_ood.inputs.row(i));
  const std::size_t n_id = bundle.test_id.size();

  std::vector<OodDecision> decisions;
  if (options.head == Head::Conformal || options.head == Head::RiskControl) {
    const fs::path cal_path = run_dir / "final_calibration.json";
    if (!fs::exists(cal_path)) {
      throw StaleCalibration("no final_calibration.json in '" + run_dir.string() + "'; run calibrate-final first");
    }
    const ConformalHead head(net, load_final_calibration(cal_path), run.hash);
    decisions = options.head == Head::Conformal ? head.decide(inputs, options.significance)
                                                : head.decide_risk(inputs, options.alpha_risk);
  } else {
    const ScoreKind kind = head_score_kind(options.head);
    const std::vector<double> reference = logit_scores(net, bundle.calib_online.inputs, kind);
    const double tau = quantile_unsorted(reference, 95.0);
    for (double s : logit_scores(net, inputs, kind)) decisions.push_back({s, std::nullopt, s > tau, options.head});
  }

  EvalOutput out;
  out.seed = run_seed(run_dir);
  std::vector<ScoredSample> samples;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const bool is_ood = i >= n_id;
    out.rows.push_back({is_ood, decisions[i]});
    samples.push_back({decisions[i].score, is_ood});
  }
  out.metrics = evaluate(samples);
  return out;
}

std::string metrics_json(const EvalOutput& output, Head head) {
  const json j{{"auroc", output.metrics.auroc}, {"aupr", output.metrics.aupr}, {"fpr95", output.metrics.fpr95},
               {"n_id", output.metrics.n_id},   {"n_ood", output.metrics.n_ood}, {"head", to_string(head)},
               {"seed", output.seed}};
  return j.dump(1) + "\n";
}

std::string scores_csv(const EvalOutput& output) {
  std::string s = "id,truth,score,p_value,verdict\n";
  for (std::size_t i = 0; i < output.rows.size(); ++i) {
    const auto& r = output.rows[i];
    s += std::to_string(i) + (r.is_ood ? ",OOD," : ",ID,") + fmt(r.decision.score) + ",";
    if (r.decision.p_value) s += fmt(*r.decision.p_value);
    s += r.decision.is_ood ? ",OOD\n" : ",ID\n";
  }
  return s;
}

namespace {

int cmd_gen_data(const std::string& spec_file, const std::vector<std::string>& sets, const fs::path& out_dir,
                 const std::string& format, std::ostream& out, std::ostream& err) {
  const GeneratorSpec spec = spec_from_map(merged_kv(spec_file, sets));
  DataFormat fmt_kind;
  if (format == "csv") fmt_kind = DataFormat::Csv;
  else if (format == "binary") fmt_kind = DataFormat::Binary;
  else throw UsageError("--format must be 'csv' or 'binary'");
  const SplitBundle bundle = generate(spec);
  warn_small_calibration(bundle, err);
  save_bundle(bundle, out_dir, fmt_kind);
  json sizes;
  const LabeledSet* sets_in_order[] = {&bundle.train, &bundle.calib_online, &bundle.calib_final, &bundle.test_id,
                                       &bundle.test_ood};
  for (std::size_t i = 0; i < 5; ++i) sizes[kSplitNames[i]] = sets_in_order[i]->size();
  const json manifest{{"spec", spec_to_map(spec)}, {"format", format}, {"sizes", sizes}};
  write_text(out_dir / "bundle.json", manifest.dump(1) + "\n");
  out << "wrote 5 splits to " << out_dir.string() << "\n";
  return kOk;
}

int cmd_train(const std::string& config_file, const std::vector<std::string>& sets, const std::string& baseline,
              const fs::path& data_dir, const fs::path& out_dir, std::ostream& out) {
  const TrainConfig cfg = load_train_config(config_file, sets, baseline);
  const SplitBundle bundle = load_bundle(data_dir);
  const TrainResult result = train(bundle, cfg);
  save_run(out_dir, result);
  const auto& last = result.manifest.epochs.back();
  out << "trained " << cfg.epochs << " epochs (" << to_string(cfg.synthesis) << "), final ce " << fmt(last.ce)
      << ", checkpoint " << result.manifest.checkpoint_hash << "\n";
  return kOk;
}

int cmd_calibrate(const fs::path& run_dir, const fs::path& data_dir, const std::string& score,
                  const fs::path& out_dir, std::ostream& out) {
  const FinalCalibration final = calibrate_run(run_dir, data_dir, parse_score_kind(score));
  fs::create_directories(out_dir);
  save_final_calibration(out_dir / "final_calibration.json", final);
  out << "final calibration (" << score << ") bound to checkpoint " << final.checkpoint_hash << "\n";
  return kOk;
}

int cmd_eval(const fs::path& run_dir, const fs::path& data_dir, const fs::path& out_dir, const EvalOptions& options,
             std::ostream& out) {
  const EvalOutput result = evaluate_run(run_dir, data_dir, options);
  fs::create_directories(out_dir);
  write_text(out_dir / "scores.csv", scores_csv(result));
  write_text(out_dir / "metrics.json", metrics_json(result, options.head));
  out << "head " << to_string(options.head) << ": auroc " << fmt(result.metrics.auroc) << ", aupr "
      << fmt(result.metrics.aupr) << ", fpr95 " << fmt(result.metrics.fpr95) << "\n";
  return kOk;
}

int cmd_synth_dump(const fs::path& run_dir, const fs::path& data_dir, const std::string& config_file,
                   const std::vector<std::string>& sets, const fs::path& out_dir, std::ostream& out) {
  const TrainConfig cfg = load_train_config(config_file, sets, "");
  const LoadedRun run = load_run(run_dir);
  const SplitBundle bundle = load_bundle(data_dir);
  const Network& net = run.checkpoint.network;
  const EpochCalibration judge = run_epoch_calibration(net, bundle.calib_online, cfg.calib);

  // Proposer memory: the last queue.capacity training features of each class.
  const Matrix feats = net.features(bundle.train.inputs);
  FeatureQueue queue(net.num_classes(), cfg.queue_capacity, net.feature_dim());
  queue.update(feats, bundle.train.labels);

  LabeledSet dump;
  dump.inputs = Matrix(0, net.feature_dim());
  dump.num_classes = net.num_classes();
  json provenance = json::array();
  SynthStats stats;
  for (std::size_t k = 0; k < net.num_classes(); ++k) {
    const int label = static_cast<int>(k);
    Rng rng(derive_seed(cfg.seed, {0x64756d70, k}));
    const SubspaceModel proposer = fit_pca(queue.contents(label), label, {cfg.proposer_standardize, cfg.calib.epsilon});
    for (const auto& o : synthesize_class(proposer, judge.models[k], judge.shells[k], cfg.synth, rng, stats)) {
      dump.inputs.append_row(o.feature);
      dump.labels.push_back(o.class_id);
      json dir = o.direction ? json(*o.direction) : json("avg");
      provenance.push_back({{"class", o.class_id}, {"direction", dir}, {"alpha", o.alpha}, {"sign", o.sign}});
    }
  }
  fs::create_directories(out_dir);
  save(dump, out_dir / "outliers.csv", DataFormat::Csv);
  const json sidecar{{"checkpoint_hash", run.hash},
                     {"rows", provenance},
                     {"degenerate_shells", stats.degenerate_shells},
                     {"skipped_classes", stats.skipped_classes}};
  write_text(out_dir / "outliers.json", sidecar.dump(1) + "\n");
  out << "wrote " << dump.size() << " outliers to " << (out_dir / "outliers.csv").string() << "\n";
  return kOk;
}

struct SweepArgs {
  std::string config_file, spec_file, baseline, head = "energy", score = "mahalanobis";
  std::vector<std::string> sets, data_sets;
  fs::path data_dir, out_dir;
  std::size_t seeds = 3;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  if (a.seeds < 1) throw UsageError("--seeds must be >= 1");
  if (a.data_dir.empty() == a.spec_file.empty() && a.data_sets.empty()) {
    throw UsageError("sweep needs exactly one of --data or --spec");
  }
  EvalOptions options;
  options.head = parse_head(a.head);
  std::map<std::string, std::vector<double>> values;
  json per_seed = json::array();
  for (std::size_t s = 1; s <= a.seeds; ++s) {
    const fs::path dir = a.out_dir / ("seed_" + std::to_string(s));
    fs::path data = a.data_dir;
    if (data.empty()) {
      auto kv = merged_kv(a.spec_file, a.data_sets);
      kv["seed"] = std::to_string(s);
      data = dir / "data";
      cmd_gen_data("", [&] {
        std::vector<std::string> v;
        for (auto& [k, x] : kv) v.push_back(k + "=" + x);
        return v;
      }(), data, "csv", out, err);
    }
    std::vector<std::string> sets = a.sets;
    sets.push_back("seed=" + std::to_string(s));
    cmd_train(a.config_file, sets, a.baseline, data, dir, out);
    if (options.head == Head::Conformal || options.head == Head::RiskControl) {
      cmd_calibrate(dir, data, a.score, dir, out);
    }
    cmd_eval(dir, data, dir, options, out);
    const json m = json::parse(read_text(dir / "metrics.json"));
    for (const char* key : {"auroc", "aupr", "fpr95"}) values[key].push_back(m.at(key).get<double>());
    per_seed.push_back(m);
  }
  json aggregate{{"head", a.head}, {"seeds", a.seeds}, {"runs", per_seed}};
  out << "metric   mean      std\n";
  for (const char* key : {"auroc", "aupr", "fpr95"}) {
    const auto& v = values[key];
    aggregate[key] = {{"mean", mean(v)}, {"std", sample_stddev(v)}, {"values", v}};
    out << key << std::string(9 - std::string(key).size(), ' ') << fmt(mean(v)) << " +- " << fmt(sample_stddev(v))
        << "\n";
  }
  fs::create_directories(a.out_dir);
  write_text(a.out_dir / "aggregate.json", aggregate.dump(1) + "\n");
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Outlier synthesis and conformal OOD detection lab", "gcos"};
  app.require_subcommand(1);

  std::string spec_file, config_file, baseline, format = "csv", score = "mahalanobis", head = "energy";
  std::vector<std::string> sets;
  std::string data_dir, out_dir, run_dir;
  double significance = kDefaultSignificance, alpha_risk = 0.05;
  SweepArgs sweep;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic ID/OOD split bundle");
  gen->add_option("--spec", spec_file, "Generator spec file (key = value)");
  gen->add_option("--set", sets, "Override a spec key (key=value)");
  gen->add_option("--format", format, "csv or binary");
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* tr = app.add_subcommand("train", "Train a classifier with outlier synthesis");
  tr->add_option("--config", config_file, "Training config file (key = value)");
  tr->add_option("--set", sets, "Override a config key (key=value)");
  tr->add_option("--data", data_dir, "Split bundle directory")->required();
  tr->add_option("--out", out_dir, "Run directory")->required();
  tr->add_option("--baseline", baseline, "vos or none");

  auto* cal = app.add_subcommand("calibrate-final", "Final calibration on calib_final");
  cal->add_option("--run", run_dir, "Run directory holding checkpoint.bin")->required();
  cal->add_option("--data", data_dir, "Split bundle directory")->required();
  cal->add_option("--score", score, "mahalanobis, energy, energy_strangeness, msp or maxlogit");
  cal->add_option("--out", out_dir, "Output directory (default: the run directory)");

  auto* ev = app.add_subcommand("eval", "Score the test splits and report metrics");
  ev->add_option("--run", run_dir, "Run directory")->required();
  ev->add_option("--data", data_dir, "Split bundle directory")->required();
  ev->add_option("--head", head, "energy, conformal, risk, msp or maxlogit");
  ev->add_option("--significance", significance, "Conformal significance level");
  ev->add_option("--alpha-risk", alpha_risk, "Target ID false-negative rate for the risk head");
  ev->add_option("--out", out_dir, "Output directory (default: the run directory)");

  auto* sd = app.add_subcommand("synth-dump", "Write synthesized outliers of a trained model");
  sd->add_option("--run", run_dir, "Run directory")->required();
  sd->add_option("--data", data_dir, "Split bundle directory")->required();
  sd->add_option("--config", config_file, "Config file for synthesis keys");
  sd->add_option("--set", sets, "Override a config key (key=value)");
  sd->add_option("--out", out_dir, "Output directory")->required();

  auto* sw = app.add_subcommand("sweep", "Train and evaluate over several seeds");
  sw->add_option("--config", sweep.config_file, "Training config file");
  sw->add_option("--set", sweep.sets, "Override a config key (key=value)");
  sw->add_option("--data", sweep.data_dir, "Fixed split bundle directory");
  sw->add_option("--spec", sweep.spec_file, "Generator spec; data regenerated per seed");
  sw->add_option("--data-set", sweep.data_sets, "Override a spec key (key=value)");
  sw->add_option("--seeds", sweep.seeds, "Number of seeds (1..N)");
  sw->add_option("--baseline", sweep.baseline, "vos or none");
  sw->add_option("--head", sweep.head, "Inference head");
  sw->add_option("--score", sweep.score, "Score kind for conformal heads");
  sw->add_option("--out", sweep.out_dir, "Output directory")->required();

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(spec_file, sets, out_dir, format, out, err);
    if (*tr) return cmd_train(config_file, sets, baseline, data_dir, out_dir, out);
    if (*cal) return cmd_calibrate(run_dir, data_dir, score, out_dir.empty() ? run_dir : out_dir, out);
    if (*ev) {
      EvalOptions options{parse_head(head), significance, alpha_risk};
      return cmd_eval(run_dir, data_dir, out_dir.empty() ? run_dir : out_dir, options, out);
    }
    if (*sd) return cmd_synth_dump(run_dir, data_dir, config_file, sets, out_dir, out);
    if (*sw) return cmd_sweep(sweep, out, err);
  } catch (const TrainingError& e) {
    err << "training failed: " << e.what() << "\n";
    return kTrainingFailed;
  } catch (const StaleCalibration& e) {
    err << "calibration mismatch: " << e.what() << "\n";
    return kCalibrationMismatch;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const SpecError& e) {
    err << "spec error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace gcos::app
