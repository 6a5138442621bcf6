#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcos/linalg.hpp"
#include "gcos/stats.hpp"

namespace gcos {

// Unlabeled rows (the OOD test split) carry label -1.
inline constexpr int kUnlabeled = -1;

struct LabeledSet {
  Matrix inputs;            // N x d
  std::vector<int> labels;  // N, in [0, K) or kUnlabeled
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return inputs.cols(); }
  std::size_t count(int label) const;
  // Rows of one class, in order.
  Matrix rows_of(int label) const;
  bool operator==(const LabeledSet& other) const = default;
};

struct SplitBundle {
  LabeledSet train;
  LabeledSet calib_online;
  LabeledSet calib_final;
  LabeledSet test_id;
  LabeledSet test_ood;  // all labels kUnlabeled
};

enum class GeneratorKind { GaussianBlobs, Moons3d, AnisotropicClusters };
enum class OodDirection { Radial, Between, Tangential };

struct SplitRatios {
  double train = 0.60;
  double calib_online = 0.15;
  double calib_final = 0.15;
  double test_id = 0.10;
};

// Class layout is a deterministic function of the geometry fields (the
// seed only drives sampling), so fresh exchangeable draws can be taken
// from the same distribution with another seed.
struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::GaussianBlobs;
  std::size_t num_classes = 3;
  std::size_t dim = 2;
  std::size_t per_class = 1000;
  double separation = 4.0;   // radius of the ring carrying the class means
  double spread = 1.0;       // per-axis std of a blob
  double anisotropy = 4.0;   // major/minor std ratio for anisotropic clusters
  // Optional explicit layout; when non-empty they replace the ring layout.
  std::vector<std::vector<double>> means;
  std::vector<Matrix> covariances;

  OodDirection ood_direction = OodDirection::Between;
  double ood_offset = 2.0;   // distance from the anchor class mean
  double ood_spread = 0.5;
  std::size_t ood_count = 0; // 0: same as the ID test split
  std::uint64_t seed = 1;
  SplitRatios ratios;
};

class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

GeneratorKind parse_generator_kind(const std::string& name);
std::string to_string(GeneratorKind kind);
OodDirection parse_ood_direction(const std::string& name);
std::string to_string(OodDirection direction);

// Flat key/value view of a spec (and the inverse), used by spec files.
GeneratorSpec spec_from_map(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> spec_to_map(const GeneratorSpec& spec);

struct ClassLayout {
  std::vector<std::vector<double>> means;
  std::vector<Matrix> covariances;
  std::vector<double> ood_center;
};

ClassLayout resolve_layout(const GeneratorSpec& spec);

// Per-class split sizes: floor(ratio * n) for the three held-out splits,
// remainder to train.
struct SplitSizes {
  std::size_t train, calib_online, calib_final, test_id;
};
SplitSizes split_sizes(std::size_t per_class, const SplitRatios& ratios);

SplitBundle generate(const GeneratorSpec& spec);

// n fresh ID samples of one class from the generator's distribution.
Matrix sample_class(const GeneratorSpec& spec, int label, std::size_t n, Rng& rng);
// Fresh labeled ID samples, `per_class` of each class.
LabeledSet sample_id(const GeneratorSpec& spec, std::size_t per_class, std::uint64_t seed);
Matrix sample_ood(const GeneratorSpec& spec, std::size_t n, Rng& rng);

// --- file formats ---

enum class DataErrorCode {
  Io,
  MissingHeader,
  MalformedHeader,
  DimMismatch,
  BadValue,
  BadLabel,
  TruncatedPayload,
};

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(message), code(code), line(line) {}
  DataErrorCode code;
  std::size_t line;  // 1-based line for CSV errors, 0 otherwise
};

enum class DataFormat { Csv, Binary };

// CSV: header "# gcos-csv v1 dim=d classes=K", rows "label,f1,...,fd" with
// shortest round-trip decimal formatting.
std::string to_csv(const LabeledSet& set);
LabeledSet from_csv(const std::string& text);
// Binary: "GCFS", u32 version, u32 dim, u32 count, rows of d LE f64 + i32 label.
std::string to_binary(const LabeledSet& set);
LabeledSet from_binary(const std::string& bytes);

void save(const LabeledSet& set, const std::filesystem::path& path, DataFormat format);
// Format inferred from the file's first bytes.
LabeledSet load(const std::filesystem::path& path);

inline constexpr const char* kSplitNames[] = {"train", "calib_online", "calib_final", "test_id", "test_ood"};

void save_bundle(const SplitBundle& bundle, const std::filesystem::path& dir, DataFormat format);
SplitBundle load_bundle(const std::filesystem::path& dir);

}  // namespace gcos
