#include "gcos/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "binary_io.hpp"

namespace gcos {

using nlohmann::json;

void CalibrationConfig::validate() const {
  if (!(p_inner > 0.0 && p_inner <= p_outer && p_outer < 100.0)) {
    throw std::invalid_argument("calibration percentiles need 0 < p_inner <= p_outer < 100");
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("calibration epsilon must be positive");
}

EpochCalibration calibrate_features(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                                    const CalibrationConfig& config) {
  config.validate();
  EpochCalibration cal;
  for (std::size_t k = 0; k < num_classes; ++k) {
    const int label = static_cast<int>(k);
    Matrix rows(0, features.cols());
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == label) rows.append_row(features.row(i));
    if (rows.rows() < 2) {
      throw CalibrationError("calibration: class " + std::to_string(k) + " has " + std::to_string(rows.rows()) +
                             " samples, need at least 2");
    }
    SubspaceModel model = fit_pca(rows, label, {config.standardize, config.epsilon});
    std::vector<double> scores(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) scores[i] = mahalanobis(rows.row(i), model);
    std::sort(scores.begin(), scores.end());
    cal.shells.push_back({label, quantile(scores, config.p_inner), quantile(scores, config.p_outer)});
    cal.models.push_back(std::move(model));
    cal.scores.push_back(std::move(scores));
  }
  return cal;
}

EpochCalibration run_epoch_calibration(const Network& network, const LabeledSet& calib_online,
                                       const CalibrationConfig& config) {
  return calibrate_features(network.features(calib_online.inputs), calib_online.labels, network.num_classes(),
                            config);
}

Matrix nonconformity(const Network& network, const Matrix& inputs, ScoreKind kind,
                     std::span<const SubspaceModel> models) {
  const std::size_t n = inputs.rows(), k_count = network.num_classes();
  const Matrix feats = network.features(inputs);
  Matrix out(n, k_count);
  if (kind == ScoreKind::Mahalanobis) {
    if (models.size() != k_count) {
      throw CalibrationError("mahalanobis scoring needs " + std::to_string(k_count) + " class models, have " +
                             std::to_string(models.size()));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < k_count; ++k) out(i, k) = mahalanobis(feats.row(i), models[k]);
    return out;
  }
  const Matrix logits = network.logits(feats);
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = logits.row(i);
    double s = 0.0;
    switch (kind) {
      case ScoreKind::Energy: s = energy(l); break;
      case ScoreKind::EnergyStrangeness: s = -energy_strangeness(l); break;
      case ScoreKind::Msp: s = -msp(l); break;
      case ScoreKind::MaxLogit: s = -maxlogit(l); break;
      case ScoreKind::Mahalanobis: break;
    }
    for (std::size_t k = 0; k < k_count; ++k) out(i, k) = s;
  }
  return out;
}

double class_p_value(std::span<const double> sorted_scores, double test_score) {
  const auto first = std::lower_bound(sorted_scores.begin(), sorted_scores.end(), test_score);
  const auto at_least = static_cast<double>(sorted_scores.end() - first);
  return (1.0 + at_least) / (1.0 + static_cast<double>(sorted_scores.size()));
}

std::vector<double> FinalCalibration::p_values(std::span<const double> scores_by_class) const {
  if (scores_by_class.size() != class_scores.size()) {
    throw CalibrationError("p-value: got " + std::to_string(scores_by_class.size()) + " class scores, calibration has " +
                           std::to_string(class_scores.size()));
  }
  std::vector<double> p(class_scores.size());
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = class_p_value(class_scores[k], scores_by_class[k]);
  return p;
}

double FinalCalibration::p_final(std::span<const double> scores_by_class) const {
  const std::vector<double> p = p_values(scores_by_class);
  return *std::max_element(p.begin(), p.end());
}

FinalCalibration run_final_calibration(const Network& network, std::span<const SubspaceModel> models,
                                       const LabeledSet& calib_final, ScoreKind kind,
                                       const std::string& checkpoint_hash) {
  const std::size_t k_count = network.num_classes();
  FinalCalibration final;
  final.score_kind = kind;
  final.checkpoint_hash = checkpoint_hash;
  if (kind == ScoreKind::Mahalanobis) final.models.assign(models.begin(), models.end());
  const Matrix scores = nonconformity(network, calib_final.inputs, kind, final.models);
  final.class_scores.resize(k_count);
  for (std::size_t i = 0; i < calib_final.size(); ++i) {
    const int label = calib_final.labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= k_count) {
      throw CalibrationError("calib_final row " + std::to_string(i) + " has label " + std::to_string(label));
    }
    final.class_scores[static_cast<std::size_t>(label)].push_back(scores(i, static_cast<std::size_t>(label)));
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    if (final.class_scores[k].empty()) {
      throw CalibrationError("final calibration: class " + std::to_string(k) + " absent from calib_final");
    }
    std::sort(final.class_scores[k].begin(), final.class_scores[k].end());
  }
  final.risk_scores.resize(calib_final.size());
  for (std::size_t i = 0; i < calib_final.size(); ++i) final.risk_scores[i] = 1.0 - final.p_final(scores.row(i));
  std::sort(final.risk_scores.begin(), final.risk_scores.end());
  return final;
}

namespace {

json model_to_json(const SubspaceModel& m) {
  json j{{"class", m.class_id},
         {"epsilon", m.epsilon},
         {"mean", m.mean},
         {"eigenvalues", m.eigenvalues},
         {"eigenvectors", m.eigenvectors.storage()}};
  if (m.standardizer) j["standardizer"] = {{"mean", m.standardizer->mean}, {"scale", m.standardizer->scale}};
  return j;
}

SubspaceModel model_from_json(const json& j) {
  SubspaceModel m;
  m.class_id = j.at("class").get<int>();
  m.epsilon = j.at("epsilon").get<double>();
  m.mean = j.at("mean").get<std::vector<double>>();
  m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
  const std::size_t d = m.mean.size();
  auto vecs = j.at("eigenvectors").get<std::vector<double>>();
  if (vecs.size() != d * d || m.eigenvalues.size() != d) throw CalibrationError("calibration model has bad shape");
  m.eigenvectors = Matrix(d, d, std::move(vecs));
  if (j.contains("standardizer")) {
    m.standardizer = Standardizer{j["standardizer"].at("mean").get<std::vector<double>>(),
                                  j["standardizer"].at("scale").get<std::vector<double>>()};
  }
  return m;
}

}  // namespace

std::string to_json(const FinalCalibration& final) {
  json classes = json::array();
  for (std::size_t k = 0; k < final.class_scores.size(); ++k)
    classes.push_back({{"class", k}, {"scores", final.class_scores[k]}});
  json models = json::array();
  for (const auto& m : final.models) models.push_back(model_to_json(m));
  json j{{"format", "gcos-final-calibration"},
         {"version", 1},
         {"score_kind", to_string(final.score_kind)},
         {"checkpoint_hash", final.checkpoint_hash},
         {"classes", classes},
         {"models", models},
         {"risk_scores", final.risk_scores}};
  return j.dump(1) + "\n";
}

FinalCalibration final_calibration_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "gcos-final-calibration") throw CalibrationError("not a final calibration file");
    FinalCalibration f;
    f.score_kind = parse_score_kind(j.at("score_kind").get<std::string>());
    f.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    for (const auto& c : j.at("classes")) f.class_scores.push_back(c.at("scores").get<std::vector<double>>());
    for (const auto& m : j.at("models")) f.models.push_back(model_from_json(m));
    f.risk_scores = j.at("risk_scores").get<std::vector<double>>();
    for (const auto& s : f.class_scores)
      if (s.empty() || !std::is_sorted(s.begin(), s.end())) throw CalibrationError("calibration scores not sorted");
    return f;
  } catch (const json::exception& e) {
    throw CalibrationError(std::string("malformed final calibration: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CalibrationError(std::string("malformed final calibration: ") + e.what());
  }
}

void save_final_calibration(const std::filesystem::path& path, const FinalCalibration& final) {
  detail::write_file(path.string(), to_json(final));
}

FinalCalibration load_final_calibration(const std::filesystem::path& path) {
  return final_calibration_from_json(detail::read_file(path.string()));
}

}  // namespace gcos
