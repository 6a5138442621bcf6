#include "gcos/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "gcos/scores.hpp"

namespace gcos {

using diff::Graph;
using diff::Tensor;
using diff::Var;

SynthesisMode parse_synthesis_mode(const std::string& name) {
  if (name == "gcos") return SynthesisMode::Gcos;
  if (name == "vos") return SynthesisMode::Vos;
  if (name == "none") return SynthesisMode::None;
  throw std::invalid_argument("unknown synthesis mode '" + name + "'");
}

std::string to_string(SynthesisMode mode) {
  switch (mode) {
    case SynthesisMode::Gcos: return "gcos";
    case SynthesisMode::Vos: return "vos";
    case SynthesisMode::None: return "none";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs", "epochs must be >= 1");
  if (start_epoch < 1) throw ConfigError("start_epoch", "start_epoch must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size", "batch_size must be >= 2");
  if (!(lr > 0.0)) throw ConfigError("lr", "lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "weight_decay must be nonnegative");
  if (queue_capacity < 2) throw ConfigError("queue.capacity", "queue.capacity must be >= 2");
  if (feature_dim < 1) throw ConfigError("net.feature_dim", "net.feature_dim must be >= 1");
  if (!(vos_tail > 0.0)) throw ConfigError("vos.tail", "vos.tail must be positive");
  try {
    synth.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("synth", e.what());
  }
  try {
    loss.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("loss", e.what());
  }
  try {
    calib.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("calib", e.what());
  }
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double as_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
    throw ConfigError(key, "config key '" + key + "': '" + v + "' is not a nonnegative integer");
  }
  return out;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "config key '" + key + "': '" + v + "' is not a boolean");
}

template <typename F>
auto as_enum(const std::string& key, const std::string& v, F parse) {
  try {
    return parse(v);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, "config key '" + key + "': " + e.what());
  }
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::vector<std::size_t> as_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = as_uint(key, item);
    if (x == 0) throw ConfigError(key, "config key '" + key + "': layer widths must be positive");
    out.push_back(static_cast<std::size_t>(x));
  }
  return out;
}

}  // namespace

TrainConfig config_from_map(const std::map<std::string, std::string>& kv, TrainConfig c) {
  for (const auto& [key, v] : kv) {
    if (key == "epochs") c.epochs = as_uint(key, v);
    else if (key == "start_epoch") c.start_epoch = as_uint(key, v);
    else if (key == "batch_size") c.batch_size = as_uint(key, v);
    else if (key == "lr") c.lr = as_double(key, v);
    else if (key == "weight_decay") c.weight_decay = as_double(key, v);
    else if (key == "seed") c.seed = as_uint(key, v);
    else if (key == "queue.capacity") c.queue_capacity = as_uint(key, v);
    else if (key == "net.hidden") c.hidden = as_list(key, v);
    else if (key == "net.feature_dim") c.feature_dim = as_uint(key, v);
    else if (key == "synthesis") c.synthesis = as_enum(key, v, parse_synthesis_mode);
    else if (key == "synth.policy") c.synth.policy = as_enum(key, v, parse_direction_policy);
    else if (key == "synth.num_directions") c.synth.num_directions = as_uint(key, v);
    else if (key == "synth.per_class") c.synth.per_class = as_uint(key, v);
    else if (key == "synth.eta") c.synth.eta = as_double(key, v);
    else if (key == "synth.alpha_max") c.synth.alpha_max = as_double(key, v);
    else if (key == "synth.n_steps") c.synth.n_steps = static_cast<int>(as_uint(key, v));
    else if (key == "synth.random_sign") c.synth.random_sign = as_bool(key, v);
    else if (key == "loss.kind") c.loss.kind = as_enum(key, v, parse_loss_kind);
    else if (key == "loss.lambda") c.loss.lambda = as_double(key, v);
    else if (key == "loss.pairing") c.loss.pairing = as_enum(key, v, parse_pairing);
    else if (key == "margin.p_low") c.loss.p_low = as_double(key, v);
    else if (key == "margin.p_high") c.loss.p_high = as_double(key, v);
    else if (key == "margin.default") c.loss.m_default = as_double(key, v);
    else if (key == "calib.p_inner") c.calib.p_inner = as_double(key, v);
    else if (key == "calib.p_outer") c.calib.p_outer = as_double(key, v);
    else if (key == "calib.epsilon") c.calib.epsilon = as_double(key, v);
    else if (key == "judge.standardize") c.calib.standardize = as_bool(key, v);
    else if (key == "proposer.standardize") c.proposer_standardize = as_bool(key, v);
    else if (key == "proposer.shared_covariance") c.shared_covariance = as_bool(key, v);
    else if (key == "vos.tail") c.vos_tail = as_double(key, v);
    else throw ConfigError(key, "unknown config key '" + key + "'");
  }
  c.validate();
  return c;
}

std::map<std::string, std::string> config_to_map(const TrainConfig& c) {
  return {
      {"epochs", std::to_string(c.epochs)},
      {"start_epoch", std::to_string(c.start_epoch)},
      {"batch_size", std::to_string(c.batch_size)},
      {"lr", fmt(c.lr)},
      {"weight_decay", fmt(c.weight_decay)},
      {"seed", std::to_string(c.seed)},
      {"queue.capacity", std::to_string(c.queue_capacity)},
      {"net.hidden", join(c.hidden)},
      {"net.feature_dim", std::to_string(c.feature_dim)},
      {"synthesis", to_string(c.synthesis)},
      {"synth.policy", to_string(c.synth.policy)},
      {"synth.num_directions", std::to_string(c.synth.num_directions)},
      {"synth.per_class", std::to_string(c.synth.per_class)},
      {"synth.eta", fmt(c.synth.eta)},
      {"synth.alpha_max", fmt(c.synth.alpha_max)},
      {"synth.n_steps", std::to_string(c.synth.n_steps)},
      {"synth.random_sign", c.synth.random_sign ? "true" : "false"},
      {"loss.kind", to_string(c.loss.kind)},
      {"loss.lambda", fmt(c.loss.lambda)},
      {"loss.pairing", to_string(c.loss.pairing)},
      {"margin.p_low", fmt(c.loss.p_low)},
      {"margin.p_high", fmt(c.loss.p_high)},
      {"margin.default", fmt(c.loss.m_default)},
      {"calib.p_inner", fmt(c.calib.p_inner)},
      {"calib.p_outer", fmt(c.calib.p_outer)},
      {"calib.epsilon", fmt(c.calib.epsilon)},
      {"judge.standardize", c.calib.standardize ? "true" : "false"},
      {"proposer.standardize", c.proposer_standardize ? "true" : "false"},
      {"proposer.shared_covariance", c.shared_covariance ? "true" : "false"},
      {"vos.tail", fmt(c.vos_tail)},
  };
}

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    s.erase(0, s.find_first_not_of(" \t\r"));
    s.erase(s.find_last_not_of(" \t\r") + 1);
    return s;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string RunManifest::to_json() const {
  using nlohmann::json;
  json epochs_json = json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back(
        {{"epoch", e.epoch}, {"ce", e.ce}, {"reg", e.reg}, {"total", e.total}, {"reg_batches", e.reg_batches}, {"train_ce", e.train_ce}});
  }
  json j{{"config", config},
         {"seed", seed},
         {"synthesis", synthesis},
         {"epochs", epochs_json},
         {"checkpoint_hash", checkpoint_hash},
         {"synthesized_outliers", synth_stats.synthesized},
         {"degenerate_shells", synth_stats.degenerate_shells},
         {"skipped_classes", synth_stats.skipped_classes},
         {"vos_budget_exhausted", vos_budget_exhausted},
         {"wall_time_seconds", wall_time_seconds}};
  return j.dump(1) + "\n";
}

namespace {

Matrix to_matrix(const Tensor& t) { return Matrix(t.rows(), t.cols(), t.values()); }

Tensor to_tensor(const Matrix& m) { return Tensor::matrix(m.rows(), m.cols(), m.storage()); }

double dataset_ce(const Network& net, const LabeledSet& data) {
  const Matrix logits = net.logits(net.features(data.inputs));
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i)
    sum += logsumexp(logits.row(i)) - logits(i, static_cast<std::size_t>(data.labels[i]));
  return sum / static_cast<double>(logits.rows());
}

// Outlier features for one batch, rows grouped by class.
Matrix synthesize_batch(const TrainConfig& cfg, const FeatureQueue& queue, const EpochCalibration* judge,
                        std::uint64_t stream, SynthStats& stats, std::size_t& vos_exhausted) {
  const std::size_t k_count = queue.num_classes();
  std::vector<Matrix> contents;
  for (std::size_t k = 0; k < k_count; ++k) contents.push_back(queue.contents(static_cast<int>(k)));
  Matrix out(0, cfg.feature_dim);

  Matrix pooled(0, cfg.feature_dim);
  if (cfg.synthesis == SynthesisMode::Gcos && cfg.shared_covariance) {
    for (const auto& c : contents) {
      const std::vector<double> mu = column_means(c);
      std::vector<double> row(c.cols());
      for (std::size_t r = 0; r < c.rows(); ++r) {
        for (std::size_t j = 0; j < c.cols(); ++j) row[j] = c(r, j) - mu[j];
        pooled.append_row(row);
      }
    }
  }

  for (std::size_t k = 0; k < k_count; ++k) {
    Rng rng(derive_seed(cfg.seed, {0x73796e7468, stream, k}));
    const int label = static_cast<int>(k);
    if (cfg.synthesis == SynthesisMode::Vos) {
      const VosResult r = vos_gaussian_baseline(contents[k], cfg.synth.per_class, cfg.vos_tail, rng);
      if (r.budget_exhausted) ++vos_exhausted;
      stats.synthesized += r.features.rows();
      for (std::size_t i = 0; i < r.features.rows(); ++i) out.append_row(r.features.row(i));
      continue;
    }
    const PcaOptions opts{cfg.proposer_standardize, cfg.calib.epsilon};
    const SubspaceModel proposer = cfg.shared_covariance ? fit_pca_shared(contents[k], pooled, label, opts)
                                                         : fit_pca(contents[k], label, opts);
    const auto outliers = synthesize_class(proposer, judge->models[k], judge->shells[k], cfg.synth, rng, stats);
    for (const auto& o : outliers) out.append_row(o.feature);
  }
  return out;
}

}  // namespace

Network initial_network(const TrainConfig& config, std::size_t input_dim, std::size_t num_classes) {
  return Network::create({input_dim, config.hidden, config.feature_dim, num_classes, derive_seed(config.seed, {0x696e6974})});
}

TrainResult train(const SplitBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const LabeledSet& data = bundle.train;
  const std::size_t k_count = data.num_classes;
  if (data.size() == 0 || k_count < 2) throw std::invalid_argument("train: empty training split");
  for (std::size_t k = 0; k < k_count; ++k) {
    if (data.count(static_cast<int>(k)) == 0) {
      throw std::invalid_argument("train: class " + std::to_string(k) + " missing from the training split");
    }
  }

  TrainResult result;
  result.network = initial_network(cfg, data.dim(), k_count);
  Network& net = result.network;
  FeatureQueue queue(k_count, cfg.queue_capacity, cfg.feature_dim);
  Rng shuffle_rng(derive_seed(cfg.seed, {0x73687566}));
  RunManifest& manifest = result.manifest;
  manifest.config = config_to_map(cfg);
  manifest.seed = cfg.seed;
  manifest.synthesis = to_string(cfg.synthesis);

  const bool regularize = cfg.synthesis != SynthesisMode::None && cfg.loss.lambda > 0.0;
  const bool needs_judge =
      regularize && (cfg.synthesis == SynthesisMode::Gcos || cfg.loss.kind == LossKind::RegMahalanobis);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t d = data.dim();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const bool active = regularize && epoch >= cfg.start_epoch;
    std::optional<EpochCalibration> judge;
    if (active && needs_judge) {
      try {
        judge = run_epoch_calibration(net, bundle.calib_online, cfg.calib);
      } catch (const std::exception& e) {
        throw TrainingError(epoch, 0, e.what());
      }
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochLog log{epoch, 0.0, 0.0, 0.0, 0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t b = end - start;
      std::vector<double> xs(b * d);
      std::vector<int> ys(b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto row = data.inputs.row(order[start + i]);
        std::copy(row.begin(), row.end(), xs.begin() + static_cast<std::ptrdiff_t>(i * d));
        ys[i] = data.labels[order[start + i]];
      }

      Graph g;
      const Network::Bound bound = net.bind(g);
      const Var feats = net.features(g, bound, g.constant(Tensor::matrix(b, d, std::move(xs))));
      const Var logits = net.logits(g, bound, feats);
      const Var ce = cross_entropy(g, logits, ys);
      queue.update(to_matrix(g.value(feats)), ys);

      std::optional<Var> reg;
      if (active && queue.is_full()) {
        const std::uint64_t stream = epoch * 1000003ULL + batches;
        const Matrix outliers = synthesize_batch(cfg, queue, judge ? &*judge : nullptr, stream,
                                                 manifest.synth_stats, manifest.vos_budget_exhausted);
        if (outliers.rows() > 0) {
          const Var ood_feats = g.constant(to_tensor(outliers));
          switch (cfg.loss.kind) {
            case LossKind::RegEnergy: {
              const Var s_pos = energy_scores(g, logits);
              const Var s_neg = energy_scores(g, net.logits(g, bound, ood_feats));
              const double m = adaptive_margin(g.value(s_pos).values(), cfg.loss.p_low, cfg.loss.p_high,
                                               cfg.loss.m_default);
              reg = reg_loss(g, s_pos, s_neg, m, cfg.loss.pairing);
              break;
            }
            case LossKind::RegMahalanobis: {
              const Var s_pos = own_class_mahalanobis(g, feats, ys, judge->models);
              const Var s_neg = min_class_mahalanobis(g, ood_feats, judge->models);
              const double m = adaptive_margin(g.value(s_pos).values(), cfg.loss.p_low, cfg.loss.p_high,
                                               cfg.loss.m_default);
              reg = reg_loss(g, s_pos, s_neg, m, cfg.loss.pairing);
              break;
            }
            case LossKind::Uncertainty: {
              const Var phi_id = net.phi_logit(g, bound, energy_scores(g, logits));
              const Var phi_ood = net.phi_logit(g, bound, energy_scores(g, net.logits(g, bound, ood_feats)));
              reg = uncertainty_loss(g, phi_id, phi_ood);
              break;
            }
          }
        }
      }

      const Var total = total_loss(g, ce, reg, cfg.loss.lambda);
      const double total_value = g.scalar(total);
      if (!std::isfinite(total_value)) throw TrainingError(epoch, batches, "non-finite loss");
      g.backward(total);
      net.zero_grad();
      net.collect_grads(g, bound);
      try {
        const auto params = net.parameters();
        diff::sgd_step(params, cfg.lr, cfg.weight_decay);
      } catch (const diff::NonFiniteGradient& e) {
        throw TrainingError(epoch, batches, e.what());
      }
      log.ce += g.scalar(ce);
      log.total += total_value;
      if (reg) {
        log.reg += g.scalar(*reg);
        ++log.reg_batches;
      }
    }
    log.ce /= static_cast<double>(batches);
    log.total /= static_cast<double>(batches);
    if (log.reg_batches) log.reg /= static_cast<double>(log.reg_batches);
    log.train_ce = dataset_ce(net, data);
    manifest.epochs.push_back(log);
  }

  try {
    result.judge_models = run_epoch_calibration(net, bundle.calib_online, cfg.calib).models;
  } catch (const std::exception& e) {
    throw TrainingError(cfg.epochs, 0, e.what());
  }
  for (std::size_t k = 0; k < k_count; ++k) result.queue_contents.push_back(queue.contents(static_cast<int>(k)));
  manifest.checkpoint_hash = checkpoint_hash(net, result.judge_models);
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

TrainResult train_baseline_vos(const SplitBundle& bundle, TrainConfig config) {
  config.synthesis = SynthesisMode::Vos;
  config.loss.kind = LossKind::Uncertainty;
  return train(bundle, config);
}

void save_run(const std::filesystem::path& dir, const TrainResult& result) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "checkpoint.bin", result.network, result.judge_models);
  detail::write_file((dir / "manifest.json").string(), result.manifest.to_json());
}

}  // namespace gcos
