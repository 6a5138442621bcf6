#include <doctest.h>

#include <filesystem>
#include <random>

#include "gcos/calibrate.hpp"
#include "gcos/datasets.hpp"
#include "gcos/netmodel.hpp"
#include "support.hpp"

using namespace gcos;

namespace {

struct Fixture {
  SplitBundle data;
  Network net;
  Fixture() {
    GeneratorSpec spec;
    spec.per_class = 200;
    data = generate(spec);
    net = Network::create({2, {16, 16}, 8, 3, 3});
  }
};

}  // namespace

TEST_CASE("identical features give a zero-width shell") {
  const Matrix f(6, 3, std::vector<double>(18, 1.5));
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const EpochCalibration cal = calibrate_features(f, y, 2, {});
  for (const auto& s : cal.scores)
    for (double v : s) CHECK(v == 0.0);
  for (const auto& sh : cal.shells) {
    CHECK(sh.q_inner == 0.0);
    CHECK(sh.q_outer == 0.0);
  }
}

TEST_CASE("a class with fewer than two samples is named") {
  std::mt19937_64 rng(1);
  const Matrix f = testing_support::gaussian_rows(5, 2, rng);
  const std::vector<int> y{0, 0, 0, 2, 0};
  try {
    calibrate_features(f, y, 3, {});
    FAIL("expected CalibrationError");
  } catch (const CalibrationError& e) {
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
}

TEST_CASE("epoch calibration is pure and shells are ordered") {
  const Fixture fx;
  const std::string before = checkpoint_hash(fx.net, {});
  const EpochCalibration a = run_epoch_calibration(fx.net, fx.data.calib_online, {});
  const EpochCalibration b = run_epoch_calibration(fx.net, fx.data.calib_online, {});
  CHECK(a == b);
  CHECK(checkpoint_hash(fx.net, {}) == before);
  REQUIRE(a.shells.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(a.shells[k].q_inner <= a.shells[k].q_outer);
    CHECK(std::is_sorted(a.scores[k].begin(), a.scores[k].end()));
    CHECK(a.scores[k].size() == fx.data.calib_online.count(static_cast<int>(k)));
    CHECK(a.shells[k].q_inner == quantile(a.scores[k], 95));
    CHECK(a.models[k].standardizer.has_value());
  }
  CalibrationConfig bad;
  bad.p_inner = 99;
  bad.p_outer = 95;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("p-value counts ties as at least") {
  const std::vector<double> s{1.0, 2.0, 3.0};
  CHECK(class_p_value(s, 2.0) == doctest::Approx(0.75));
  CHECK(class_p_value(s, 0.0) == 1.0);
  CHECK(class_p_value(s, 3.5) == doctest::Approx(0.25));
  const std::vector<double> tied{2.0, 2.0, 2.0};
  CHECK(class_p_value(tied, 2.0) == 1.0);
}

TEST_CASE("final calibration record") {
  const Fixture fx;
  const EpochCalibration judge = run_epoch_calibration(fx.net, fx.data.calib_online, {});
  const std::string hash = checkpoint_hash(fx.net, judge.models);
  for (ScoreKind kind : {ScoreKind::Mahalanobis, ScoreKind::Energy}) {
    const FinalCalibration a = run_final_calibration(fx.net, judge.models, fx.data.calib_final, kind, hash);
    const FinalCalibration b = run_final_calibration(fx.net, judge.models, fx.data.calib_final, kind, hash);
    CHECK(to_json(a) == to_json(b));
    CHECK(a.checkpoint_hash == hash);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(a.class_scores[k].size() == fx.data.calib_final.count(static_cast<int>(k)));
      CHECK(std::is_sorted(a.class_scores[k].begin(), a.class_scores[k].end()));
    }
    CHECK(a.risk_scores.size() == fx.data.calib_final.size());
    CHECK(std::is_sorted(a.risk_scores.begin(), a.risk_scores.end()));
    CHECK(a.models.empty() == (kind != ScoreKind::Mahalanobis));

    const FinalCalibration back = final_calibration_from_json(to_json(a));
    CHECK(back == a);
    const auto path = std::filesystem::temp_directory_path() / "gcos_final_cal.json";
    save_final_calibration(path, a);
    CHECK(load_final_calibration(path) == a);
    std::filesystem::remove(path);
  }
  CHECK_THROWS_AS(final_calibration_from_json("{\"format\":\"other\"}"), CalibrationError);
  CHECK_THROWS_AS(final_calibration_from_json("not json"), CalibrationError);
}

TEST_CASE("final calibration rejects unlabeled or missing classes") {
  const Fixture fx;
  const EpochCalibration judge = run_epoch_calibration(fx.net, fx.data.calib_online, {});
  CHECK_THROWS_AS(run_final_calibration(fx.net, judge.models, fx.data.test_ood, ScoreKind::Energy, "h"),
                  CalibrationError);
  LabeledSet two = fx.data.calib_final;
  LabeledSet only;
  only.num_classes = 3;
  only.inputs = Matrix(0, 2);
  for (std::size_t i = 0; i < two.size(); ++i)
    if (two.labels[i] != 2) {
      only.inputs.append_row(two.inputs.row(i));
      only.labels.push_back(two.labels[i]);
    }
  CHECK_THROWS_AS(run_final_calibration(fx.net, judge.models, only, ScoreKind::Energy, "h"), CalibrationError);
  CHECK_THROWS_AS(nonconformity(fx.net, two.inputs, ScoreKind::Mahalanobis, {}), CalibrationError);
}
