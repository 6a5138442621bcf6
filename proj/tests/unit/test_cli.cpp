#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "app.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path work_dir(const std::string& name) {
  const char* base = std::getenv("GCOS_TMP");
  const fs::path p = (base ? fs::path(base) : fs::temp_directory_path() / "gcos_cli_tests") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = gcos::app::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::vector<std::string> kQuick{"--set", "epochs=3",          "--set", "start_epoch=2",
                                      "--set", "net.hidden=16,16", "--set", "net.feature_dim=8",
                                      "--set", "queue.capacity=32"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("gen-data writes five splits and a manifest, reproducibly") {
  const fs::path dir = work_dir("gen");
  REQUIRE(cli({"gen-data", "--set", "per_class=200", "--out", (dir / "a").string()}).code == 0);
  REQUIRE(cli({"gen-data", "--set", "per_class=200", "--out", (dir / "b").string()}).code == 0);
  for (const char* f : {"train.csv", "calib_online.csv", "calib_final.csv", "test_id.csv", "test_ood.csv",
                        "bundle.json"}) {
    CHECK(fs::exists(dir / "a" / f));
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }
  REQUIRE(cli({"gen-data", "--format", "binary", "--out", (dir / "c").string()}).code == 0);
  CHECK(fs::exists(dir / "c" / "train.gcfs"));
}

TEST_CASE("usage and spec errors exit 2") {
  CHECK(cli({"gen-data"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  const fs::path dir = work_dir("bad");
  const Result r = cli({"gen-data", "--set", "classes=x", "--out", dir.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("classes") != std::string::npos);
  CHECK(cli({"gen-data", "--set", "nonsense", "--out", dir.string()}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("train reports config errors by key and training failures with exit 3") {
  const fs::path dir = work_dir("train_err");
  REQUIRE(cli({"gen-data", "--set", "per_class=100", "--out", (dir / "data").string()}).code == 0);
  const Result bad = cli({"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(), "--set",
                           "loss.lambdaa=1"});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("loss.lambdaa") != std::string::npos);
  const Result boom = cli(with({"train", "--data", (dir / "data").string(), "--out", (dir / "run").string(),
                                 "--set", "lr=1e300", "--set", "synthesis=none"},
                                kQuick));
  CHECK(boom.code == 3);
  CHECK(boom.err.find("epoch") != std::string::npos);
}

TEST_CASE("full pipeline with fixed-name artifacts") {
  const fs::path dir = work_dir("pipeline");
  const std::string data = (dir / "data").string(), run = (dir / "run").string();
  REQUIRE(cli({"gen-data", "--set", "per_class=200", "--out", data}).code == 0);
  REQUIRE(cli(with({"train", "--data", data, "--out", run}, kQuick)).code == 0);
  CHECK(fs::exists(dir / "run" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "run" / "manifest.json"));

  CHECK(cli({"eval", "--run", run, "--data", data, "--head", "conformal"}).code == 4);
  CHECK(cli({"eval", "--run", run, "--data", data, "--head", "risk"}).code == 4);

  REQUIRE(cli({"calibrate-final", "--run", run, "--data", data}).code == 0);
  CHECK(fs::exists(dir / "run" / "final_calibration.json"));
  const Result ev = cli({"eval", "--run", run, "--data", data, "--head", "conformal"});
  REQUIRE(ev.code == 0);
  const json m = json::parse(slurp(dir / "run" / "metrics.json"));
  for (const char* k : {"auroc", "aupr", "fpr95", "n_id", "n_ood", "head"}) CHECK(m.contains(k));
  CHECK(m.at("head") == "conformal");
  const std::string csv = slurp(dir / "run" / "scores.csv");
  CHECK(csv.rfind("id,truth,score,p_value,verdict\n", 0) == 0);

  for (const char* head : {"energy", "risk", "msp", "maxlogit"})
    CHECK(cli({"eval", "--run", run, "--data", data, "--head", head}).code == 0);
  CHECK(cli({"eval", "--run", run, "--data", data, "--head", "vote"}).code == 2);

  // Swapping in another checkpoint makes the stored calibration stale.
  const std::string run2 = (dir / "run2").string();
  REQUIRE(cli(with({"train", "--data", data, "--out", run2, "--set", "seed=9"}, kQuick)).code == 0);
  fs::copy_file(dir / "run" / "final_calibration.json", dir / "run2" / "final_calibration.json");
  CHECK(cli({"eval", "--run", run2, "--data", data, "--head", "conformal"}).code == 4);

  REQUIRE(cli({"synth-dump", "--run", run, "--data", data, "--out", (dir / "dump").string()}).code == 0);
  CHECK(fs::exists(dir / "dump" / "outliers.csv"));
  CHECK(fs::exists(dir / "dump" / "outliers.json"));
}

TEST_CASE("reruns are bitwise identical apart from wall time") {
  const fs::path dir = work_dir("rerun");
  const std::string data = (dir / "data").string();
  REQUIRE(cli({"gen-data", "--set", "per_class=150", "--out", data}).code == 0);
  for (const char* r : {"a", "b"}) {
    const std::string run = (dir / r).string();
    REQUIRE(cli(with({"train", "--data", data, "--out", run}, kQuick)).code == 0);
    REQUIRE(cli({"calibrate-final", "--run", run, "--data", data}).code == 0);
    REQUIRE(cli({"eval", "--run", run, "--data", data, "--head", "conformal"}).code == 0);
  }
  for (const char* f : {"checkpoint.bin", "final_calibration.json", "metrics.json", "scores.csv"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  json ma = json::parse(slurp(dir / "a" / "manifest.json")), mb = json::parse(slurp(dir / "b" / "manifest.json"));
  ma.erase("wall_time_seconds");
  mb.erase("wall_time_seconds");
  CHECK(ma == mb);
}

TEST_CASE("baseline switch is recorded") {
  const fs::path dir = work_dir("baseline");
  const std::string data = (dir / "data").string();
  REQUIRE(cli({"gen-data", "--set", "per_class=150", "--out", data}).code == 0);
  REQUIRE(cli(with({"train", "--data", data, "--out", (dir / "vos").string(), "--baseline", "vos"}, kQuick)).code == 0);
  CHECK(json::parse(slurp(dir / "vos" / "manifest.json")).at("synthesis") == "vos");
  REQUIRE(cli(with({"train", "--data", data, "--out", (dir / "none").string(), "--baseline", "none"}, kQuick)).code ==
          0);
  REQUIRE(cli(with({"train", "--data", data, "--out", (dir / "zero").string(), "--set", "loss.lambda=0"}, kQuick))
              .code == 0);
  CHECK(slurp(dir / "none" / "checkpoint.bin") == slurp(dir / "zero" / "checkpoint.bin"));
  CHECK(cli({"train", "--data", data, "--out", (dir / "x").string(), "--baseline", "odin"}).code == 2);
}

TEST_CASE("energy head separates a well-separated toy perfectly") {
  const fs::path dir = work_dir("toy");
  const std::string data = (dir / "data").string(), run = (dir / "run").string();
  // Classes 10 apart with spread 0.5; OOD is a tight cluster at the midpoint
  // between classes 0 and 1, on the decision boundary.
  REQUIRE(cli({"gen-data", "--set", "per_class=200", "--set", "separation=10", "--set", "spread=0.5", "--set",
                "ood.offset=8.660254", "--set", "ood.spread=0.01", "--out", data})
              .code == 0);
  REQUIRE(cli(with({"train", "--data", data, "--out", run, "--set", "synthesis=none"}, kQuick)).code == 0);
  REQUIRE(cli({"eval", "--run", run, "--data", data, "--head", "energy"}).code == 0);
  CHECK(json::parse(slurp(dir / "run" / "metrics.json")).at("auroc").get<double>() == 1.0);
}

TEST_CASE("sweep writes per-seed runs and an aggregate") {
  const fs::path dir = work_dir("sweep");
  REQUIRE(cli(with({"sweep", "--data-set", "per_class=120", "--seeds", "3", "--out", dir.string()}, kQuick)).code ==
          0);
  for (int s = 1; s <= 3; ++s) CHECK(fs::exists(dir / ("seed_" + std::to_string(s)) / "manifest.json"));
  const json agg = json::parse(slurp(dir / "aggregate.json"));
  for (const char* k : {"auroc", "aupr", "fpr95"}) {
    CHECK(agg.at(k).contains("mean"));
    CHECK(agg.at(k).contains("std"));
    CHECK(agg.at(k).at("values").size() == 3);
  }
}
