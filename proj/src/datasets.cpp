#include "gcos/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "binary_io.hpp"

namespace gcos {

std::size_t LabeledSet::count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

Matrix LabeledSet::rows_of(int label) const {
  Matrix out(0, inputs.cols());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) out.append_row(inputs.row(i));
  return out;
}

GeneratorKind parse_generator_kind(const std::string& name) {
  if (name == "gaussian_blobs") return GeneratorKind::GaussianBlobs;
  if (name == "moons_3d") return GeneratorKind::Moons3d;
  if (name == "anisotropic_clusters") return GeneratorKind::AnisotropicClusters;
  throw SpecError("unknown generator kind '" + name + "'");
}

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::GaussianBlobs: return "gaussian_blobs";
    case GeneratorKind::Moons3d: return "moons_3d";
    case GeneratorKind::AnisotropicClusters: return "anisotropic_clusters";
  }
  return "?";
}

OodDirection parse_ood_direction(const std::string& name) {
  if (name == "radial") return OodDirection::Radial;
  if (name == "between") return OodDirection::Between;
  if (name == "tangential") return OodDirection::Tangential;
  throw SpecError("unknown ood direction '" + name + "'");
}

std::string to_string(OodDirection direction) {
  switch (direction) {
    case OodDirection::Radial: return "radial";
    case OodDirection::Between: return "between";
    case OodDirection::Tangential: return "tangential";
  }
  return "?";
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_list(std::span<const double> values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += format_double(values[i]);
  }
  return s;
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw SpecError("key '" + key + "': '" + text + "' is not a number");
  }
  return v;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (v < 0 || v != std::floor(v)) throw SpecError("key '" + key + "': '" + text + "' is not a count");
  return static_cast<std::size_t>(v);
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    out.push_back(parse_double(key, item));
  }
  return out;
}

}  // namespace

GeneratorSpec spec_from_map(const std::map<std::string, std::string>& kv) {
  GeneratorSpec spec;
  std::map<std::size_t, std::vector<double>> means, covs;
  for (const auto& [key, value] : kv) {
    if (key == "kind") spec.kind = parse_generator_kind(value);
    else if (key == "classes") spec.num_classes = parse_count(key, value);
    else if (key == "dim") spec.dim = parse_count(key, value);
    else if (key == "per_class") spec.per_class = parse_count(key, value);
    else if (key == "separation") spec.separation = parse_double(key, value);
    else if (key == "spread") spec.spread = parse_double(key, value);
    else if (key == "anisotropy") spec.anisotropy = parse_double(key, value);
    else if (key == "ood.direction") spec.ood_direction = parse_ood_direction(value);
    else if (key == "ood.offset") spec.ood_offset = parse_double(key, value);
    else if (key == "ood.spread") spec.ood_spread = parse_double(key, value);
    else if (key == "ood.count") spec.ood_count = parse_count(key, value);
    else if (key == "seed") spec.seed = parse_count(key, value);
    else if (key == "split.train") spec.ratios.train = parse_double(key, value);
    else if (key == "split.calib_online") spec.ratios.calib_online = parse_double(key, value);
    else if (key == "split.calib_final") spec.ratios.calib_final = parse_double(key, value);
    else if (key == "split.test_id") spec.ratios.test_id = parse_double(key, value);
    else if (key.starts_with("mean.")) means[parse_count(key, key.substr(5))] = parse_list(key, value);
    else if (key.starts_with("cov.")) covs[parse_count(key, key.substr(4))] = parse_list(key, value);
    else throw SpecError("unknown spec key '" + key + "'");
  }
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (!means.contains(k)) throw SpecError("spec: mean." + std::to_string(k) + " missing");
    spec.means.push_back(means[k]);
  }
  for (std::size_t k = 0; k < covs.size(); ++k) {
    if (!covs.contains(k)) throw SpecError("spec: cov." + std::to_string(k) + " missing");
    const std::size_t d = spec.dim;
    if (covs[k].size() != d * d) {
      throw SpecError("spec: cov." + std::to_string(k) + " needs " + std::to_string(d * d) + " entries");
    }
    spec.covariances.emplace_back(d, d, covs[k]);
  }
  return spec;
}

std::map<std::string, std::string> spec_to_map(const GeneratorSpec& spec) {
  std::map<std::string, std::string> kv{
      {"kind", to_string(spec.kind)},
      {"classes", std::to_string(spec.num_classes)},
      {"dim", std::to_string(spec.dim)},
      {"per_class", std::to_string(spec.per_class)},
      {"separation", format_double(spec.separation)},
      {"spread", format_double(spec.spread)},
      {"anisotropy", format_double(spec.anisotropy)},
      {"ood.direction", to_string(spec.ood_direction)},
      {"ood.offset", format_double(spec.ood_offset)},
      {"ood.spread", format_double(spec.ood_spread)},
      {"ood.count", std::to_string(spec.ood_count)},
      {"seed", std::to_string(spec.seed)},
      {"split.train", format_double(spec.ratios.train)},
      {"split.calib_online", format_double(spec.ratios.calib_online)},
      {"split.calib_final", format_double(spec.ratios.calib_final)},
      {"split.test_id", format_double(spec.ratios.test_id)},
  };
  for (std::size_t k = 0; k < spec.means.size(); ++k) kv["mean." + std::to_string(k)] = format_list(spec.means[k]);
  for (std::size_t k = 0; k < spec.covariances.size(); ++k)
    kv["cov." + std::to_string(k)] = format_list(spec.covariances[k].data());
  return kv;
}

namespace {

void validate_spec(const GeneratorSpec& spec) {
  if (spec.num_classes < 2) throw SpecError("spec: need at least 2 classes");
  if (spec.dim < 2) throw SpecError("spec: dim must be >= 2");
  if (spec.per_class < 2) throw SpecError("spec: per_class must be >= 2");
  if (!(spec.spread > 0) || !(spec.ood_spread >= 0) || !(spec.anisotropy >= 1)) {
    throw SpecError("spec: spread > 0, ood.spread >= 0 and anisotropy >= 1 required");
  }
  if (spec.kind == GeneratorKind::Moons3d && (spec.num_classes != 2 || spec.dim != 3)) {
    throw SpecError("spec: moons_3d needs classes=2 and dim=3");
  }
  const auto& r = spec.ratios;
  for (double x : {r.train, r.calib_online, r.calib_final, r.test_id})
    if (!(x >= 0.0)) throw SpecError("spec: split ratios must be nonnegative");
  if (r.train + r.calib_online + r.calib_final + r.test_id > 1.0 + 1e-9) {
    throw SpecError("spec: split ratios sum above 1");
  }
  if (!spec.means.empty() && spec.means.size() != spec.num_classes) {
    throw SpecError("spec: " + std::to_string(spec.means.size()) + " means given for " +
                    std::to_string(spec.num_classes) + " classes");
  }
  for (const auto& m : spec.means)
    if (m.size() != spec.dim) throw SpecError("spec: mean has wrong dimension");
  if (!spec.covariances.empty() && spec.covariances.size() != spec.num_classes) {
    throw SpecError("spec: covariance count does not match classes");
  }
  for (std::size_t k = 0; k < spec.covariances.size(); ++k) {
    const Matrix& c = spec.covariances[k];
    if (c.rows() != spec.dim || c.cols() != spec.dim) throw SpecError("spec: covariance has wrong shape");
    for (std::size_t i = 0; i < spec.dim; ++i)
      for (std::size_t j = 0; j < spec.dim; ++j)
        if (std::abs(c(i, j) - c(j, i)) > 1e-12 * (1.0 + std::abs(c(i, j)))) {
          throw SpecError("spec: covariance " + std::to_string(k) + " is not symmetric");
        }
    for (double l : symmetric_eigen(c).values)
      if (l < -1e-10) throw SpecError("spec: covariance " + std::to_string(k) + " is not positive semidefinite");
  }
}

constexpr double kMoonNoise = 0.25;

}  // namespace

ClassLayout resolve_layout(const GeneratorSpec& spec) {
  validate_spec(spec);
  const std::size_t k_count = spec.num_classes, d = spec.dim;
  ClassLayout layout;
  if (spec.kind == GeneratorKind::Moons3d) {
    const double r = spec.separation / 2.0;
    layout.means = {{0.0, 2.0 * r / std::numbers::pi, 0.0}, {r, r / 2.0 - 2.0 * r / std::numbers::pi, 0.0}};
  } else if (!spec.means.empty()) {
    layout.means = spec.means;
  } else {
    for (std::size_t k = 0; k < k_count; ++k) {
      const double angle = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(k_count);
      std::vector<double> m(d, 0.0);
      m[0] = spec.separation * std::cos(angle);
      m[1] = spec.separation * std::sin(angle);
      layout.means.push_back(std::move(m));
    }
  }

  if (spec.kind != GeneratorKind::Moons3d) {
    if (!spec.covariances.empty()) {
      layout.covariances = spec.covariances;
    } else {
      for (std::size_t k = 0; k < k_count; ++k) {
        Matrix cov(d, d);
        for (std::size_t i = 0; i < d; ++i) cov(i, i) = spec.spread * spec.spread;
        if (spec.kind == GeneratorKind::AnisotropicClusters) {
          // Major axis tangential to the ring of class means.
          const double angle = std::atan2(layout.means[k][1], layout.means[k][0]) + std::numbers::pi / 2.0;
          const double c = std::cos(angle), s = std::sin(angle);
          const double major = std::pow(spec.spread * spec.anisotropy, 2), minor = spec.spread * spec.spread;
          cov(0, 0) = c * c * major + s * s * minor;
          cov(1, 1) = s * s * major + c * c * minor;
          cov(0, 1) = cov(1, 0) = c * s * (major - minor);
        }
        layout.covariances.push_back(std::move(cov));
      }
    }
  }

  std::vector<double> centroid(d, 0.0);
  for (const auto& m : layout.means)
    for (std::size_t i = 0; i < d; ++i) centroid[i] += m[i] / static_cast<double>(layout.means.size());
  const auto& anchor = layout.means[0];
  std::vector<double> u(d, 0.0);
  switch (spec.ood_direction) {
    case OodDirection::Radial:
    case OodDirection::Tangential:
      for (std::size_t i = 0; i < d; ++i) u[i] = anchor[i] - centroid[i];
      break;
    case OodDirection::Between:
      for (std::size_t i = 0; i < d; ++i) u[i] = layout.means[1][i] - anchor[i];
      break;
  }
  double n = norm(u);
  if (n < 1e-12) {
    std::fill(u.begin(), u.end(), 0.0);
    u[0] = 1.0;
    n = 1.0;
  }
  for (double& x : u) x /= n;
  if (spec.ood_direction == OodDirection::Tangential) {
    const double ux = u[0], uy = u[1];
    std::fill(u.begin(), u.end(), 0.0);
    u[0] = -uy;
    u[1] = ux;
  }
  layout.ood_center.resize(d);
  for (std::size_t i = 0; i < d; ++i) layout.ood_center[i] = anchor[i] + spec.ood_offset * u[i];
  return layout;
}

SplitSizes split_sizes(std::size_t per_class, const SplitRatios& ratios) {
  auto take = [&](double ratio) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(per_class) + 1e-9));
  };
  SplitSizes s{};
  s.calib_online = take(ratios.calib_online);
  s.calib_final = take(ratios.calib_final);
  s.test_id = take(ratios.test_id);
  const std::size_t held = s.calib_online + s.calib_final + s.test_id;
  if (held >= per_class) throw SpecError("spec: split ratios leave no training samples");
  s.train = per_class - held;
  return s;
}

namespace {

Matrix sample_gaussian(std::span<const double> mean, const Matrix& cov, std::size_t n, Rng& rng) {
  const std::size_t d = mean.size();
  const EigenDecomposition eig = symmetric_eigen(cov);
  Matrix factor(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) factor(i, j) = eig.vectors(i, j) * std::sqrt(std::max(eig.values[j], 0.0));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(n, d);
  std::vector<double> xi(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (double& x : xi) x = normal(rng);
    for (std::size_t i = 0; i < d; ++i) {
      double v = mean[i];
      for (std::size_t j = 0; j < d; ++j) v += factor(i, j) * xi[j];
      out(r, i) = v;
    }
  }
  return out;
}

Matrix sample_moon(const GeneratorSpec& spec, int label, std::size_t n, Rng& rng) {
  const double r = spec.separation / 2.0;
  std::uniform_real_distribution<double> t_dist(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, spec.spread * kMoonNoise);
  Matrix out(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t_dist(rng);
    if (label == 0) {
      out(i, 0) = r * std::cos(t);
      out(i, 1) = r * std::sin(t);
    } else {
      out(i, 0) = r * (1.0 - std::cos(t));
      out(i, 1) = r * (0.5 - std::sin(t));
    }
    for (std::size_t c = 0; c < 3; ++c) out(i, c) += noise(rng);
  }
  return out;
}

void append(LabeledSet& set, const Matrix& rows, std::size_t begin, std::size_t end, int label) {
  for (std::size_t i = begin; i < end; ++i) {
    set.inputs.append_row(rows.row(i));
    set.labels.push_back(label);
  }
}

LabeledSet empty_set(std::size_t d, std::size_t k) {
  LabeledSet s;
  s.inputs = Matrix(0, d);
  s.num_classes = k;
  return s;
}

}  // namespace

Matrix sample_class(const GeneratorSpec& spec, int label, std::size_t n, Rng& rng) {
  if (spec.kind == GeneratorKind::Moons3d) return sample_moon(spec, label, n, rng);
  const ClassLayout layout = resolve_layout(spec);
  const auto k = static_cast<std::size_t>(label);
  return sample_gaussian(layout.means.at(k), layout.covariances.at(k), n, rng);
}

Matrix sample_ood(const GeneratorSpec& spec, std::size_t n, Rng& rng) {
  const ClassLayout layout = resolve_layout(spec);
  Matrix cov(spec.dim, spec.dim);
  for (std::size_t i = 0; i < spec.dim; ++i) cov(i, i) = spec.ood_spread * spec.ood_spread;
  return sample_gaussian(layout.ood_center, cov, n, rng);
}

LabeledSet sample_id(const GeneratorSpec& spec, std::size_t per_class, std::uint64_t seed) {
  LabeledSet set = empty_set(spec.dim, spec.num_classes);
  for (std::size_t k = 0; k < spec.num_classes; ++k) {
    Rng rng(derive_seed(seed, {0x6672657368, k}));
    const Matrix rows = sample_class(spec, static_cast<int>(k), per_class, rng);
    append(set, rows, 0, rows.rows(), static_cast<int>(k));
  }
  return set;
}

SplitBundle generate(const GeneratorSpec& spec) {
  resolve_layout(spec);
  const SplitSizes sizes = split_sizes(spec.per_class, spec.ratios);
  const std::size_t d = spec.dim, k_count = spec.num_classes;
  SplitBundle b{empty_set(d, k_count), empty_set(d, k_count), empty_set(d, k_count), empty_set(d, k_count),
                empty_set(d, k_count)};
  for (std::size_t k = 0; k < k_count; ++k) {
    Rng rng(derive_seed(spec.seed, {0x636c617373, k}));
    const Matrix rows = sample_class(spec, static_cast<int>(k), spec.per_class, rng);
    const int label = static_cast<int>(k);
    std::size_t at = 0;
    append(b.train, rows, at, at + sizes.train, label);
    at += sizes.train;
    append(b.calib_online, rows, at, at + sizes.calib_online, label);
    at += sizes.calib_online;
    append(b.calib_final, rows, at, at + sizes.calib_final, label);
    at += sizes.calib_final;
    append(b.test_id, rows, at, at + sizes.test_id, label);
  }
  const std::size_t n_ood = spec.ood_count ? spec.ood_count : b.test_id.size();
  Rng ood_rng(derive_seed(spec.seed, {0x6f6f64}));
  const Matrix ood = sample_ood(spec, n_ood, ood_rng);
  append(b.test_ood, ood, 0, ood.rows(), kUnlabeled);
  return b;
}

// --- file formats ---

std::string to_csv(const LabeledSet& set) {
  std::string out = "# gcos-csv v1 dim=" + std::to_string(set.dim()) + " classes=" + std::to_string(set.num_classes) + "\n";
  for (std::size_t r = 0; r < set.size(); ++r) {
    out += std::to_string(set.labels[r]);
    for (double v : set.inputs.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

bool parse_header_field(const std::string& header, const std::string& name, std::size_t& out) {
  const auto pos = header.find(" " + name + "=");
  if (pos == std::string::npos) return false;
  const char* begin = header.data() + pos + name.size() + 2;
  const char* end = header.data() + header.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc{} && (res.ptr == end || *res.ptr == ' ');
}

void check_label(int label, std::size_t classes, std::size_t line) {
  if (label < kUnlabeled || (classes > 0 && label >= static_cast<int>(classes))) {
    throw DataError(DataErrorCode::BadLabel,
                    "line " + std::to_string(line) + ": label " + std::to_string(label) + " outside [-1, " +
                        std::to_string(classes) + ")",
                    line);
  }
}

}  // namespace

LabeledSet from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.empty() || header[0] != '#') {
    throw DataError(DataErrorCode::MissingHeader, "missing header (expected '# gcos-csv v1 dim=d classes=K')", 1);
  }
  std::size_t dim = 0, classes = 0;
  if (!header.starts_with("# gcos-csv v1") || !parse_header_field(header, "dim", dim) ||
      !parse_header_field(header, "classes", classes) || dim == 0) {
    throw DataError(DataErrorCode::MalformedHeader, "malformed header: '" + header + "'", 1);
  }
  LabeledSet set;
  set.num_classes = classes;
  set.inputs = Matrix(0, dim);
  std::string line;
  std::size_t line_no = 1;
  std::vector<double> row(dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t fields = std::count(line.begin(), line.end(), ',') + 1;
    if (fields != dim + 1) {
      throw DataError(DataErrorCode::DimMismatch,
                      "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) + " features, got " +
                          std::to_string(fields - 1),
                      line_no);
    }
    const char* p = line.data();
    const char* end = line.data() + line.size();
    int label = 0;
    auto lr = std::from_chars(p, end, label);
    if (lr.ec != std::errc{} || lr.ptr == end || *lr.ptr != ',') {
      throw DataError(DataErrorCode::BadLabel, "line " + std::to_string(line_no) + ": bad label", line_no);
    }
    check_label(label, classes, line_no);
    p = lr.ptr + 1;
    for (std::size_t c = 0; c < dim; ++c) {
      auto vr = std::from_chars(p, end, row[c]);
      const bool at_sep = vr.ptr == end || *vr.ptr == ',';
      if (vr.ec != std::errc{} || !at_sep || !std::isfinite(row[c])) {
        throw DataError(DataErrorCode::BadValue,
                        "line " + std::to_string(line_no) + ": bad value in column " + std::to_string(c + 1), line_no);
      }
      p = vr.ptr == end ? end : vr.ptr + 1;
    }
    set.inputs.append_row(row);
    set.labels.push_back(label);
  }
  return set;
}

namespace {
constexpr std::string_view kBinaryMagic = "GCFS";
constexpr std::uint32_t kBinaryVersion = 1;
}  // namespace

std::string to_binary(const LabeledSet& set) {
  detail::ByteWriter w;
  w.raw(kBinaryMagic);
  w.u32(kBinaryVersion);
  w.u32(static_cast<std::uint32_t>(set.dim()));
  w.u32(static_cast<std::uint32_t>(set.size()));
  for (std::size_t r = 0; r < set.size(); ++r) {
    for (double v : set.inputs.row(r)) w.f64(v);
    w.i32(set.labels[r]);
  }
  return w.take();
}

LabeledSet from_binary(const std::string& bytes) {
  if (bytes.empty()) throw DataError(DataErrorCode::MissingHeader, "missing header (empty file)");
  detail::ByteReader r(bytes);
  try {
    if (bytes.size() < 4 || r.raw(4) != kBinaryMagic) {
      throw DataError(DataErrorCode::MalformedHeader, "malformed header: bad magic (expected GCFS)");
    }
    const std::uint32_t version = r.u32();
    if (version != kBinaryVersion) {
      throw DataError(DataErrorCode::MalformedHeader, "malformed header: unsupported version " + std::to_string(version));
    }
    const std::size_t dim = r.u32(), count = r.u32();
    if (dim == 0) throw DataError(DataErrorCode::MalformedHeader, "malformed header: dim=0");
    const std::size_t row_bytes = dim * 8 + 4;
    if (r.remaining() != count * row_bytes) {
      if (r.remaining() < count * row_bytes) {
        throw DataError(DataErrorCode::TruncatedPayload,
                        "truncated payload: " + std::to_string(count) + " rows need " +
                            std::to_string(count * row_bytes) + " bytes, " + std::to_string(r.remaining()) + " present");
      }
      throw DataError(DataErrorCode::DimMismatch, "payload size does not match dim=" + std::to_string(dim));
    }
    LabeledSet set;
    set.inputs = Matrix(count, dim);
    set.labels.resize(count);
    int max_label = kUnlabeled;
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double v = r.f64();
        if (!std::isfinite(v)) {
          throw DataError(DataErrorCode::BadValue, "row " + std::to_string(i) + ": non-finite value");
        }
        set.inputs(i, c) = v;
      }
      set.labels[i] = r.i32();
      check_label(set.labels[i], 0, 0);
      max_label = std::max(max_label, set.labels[i]);
    }
    set.num_classes = static_cast<std::size_t>(max_label + 1);
    return set;
  } catch (const detail::TruncatedInput& e) {
    throw DataError(DataErrorCode::TruncatedPayload, e.what());
  }
}

void save(const LabeledSet& set, const std::filesystem::path& path, DataFormat format) {
  try {
    detail::write_file(path.string(), format == DataFormat::Csv ? to_csv(set) : to_binary(set));
  } catch (const std::runtime_error& e) {
    throw DataError(DataErrorCode::Io, e.what());
  }
}

LabeledSet load(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = detail::read_file(path.string());
  } catch (const std::runtime_error& e) {
    throw DataError(DataErrorCode::Io, e.what());
  }
  if (bytes.starts_with(kBinaryMagic)) return from_binary(bytes);
  return from_csv(bytes);
}

void save_bundle(const SplitBundle& bundle, const std::filesystem::path& dir, DataFormat format) {
  std::filesystem::create_directories(dir);
  const std::string ext = format == DataFormat::Csv ? ".csv" : ".gcfs";
  const LabeledSet* sets[] = {&bundle.train, &bundle.calib_online, &bundle.calib_final, &bundle.test_id,
                              &bundle.test_ood};
  for (std::size_t i = 0; i < 5; ++i) save(*sets[i], dir / (std::string(kSplitNames[i]) + ext), format);
}

SplitBundle load_bundle(const std::filesystem::path& dir) {
  SplitBundle b;
  LabeledSet* sets[] = {&b.train, &b.calib_online, &b.calib_final, &b.test_id, &b.test_ood};
  for (std::size_t i = 0; i < 5; ++i) {
    const auto csv = dir / (std::string(kSplitNames[i]) + ".csv");
    const auto bin = dir / (std::string(kSplitNames[i]) + ".gcfs");
    if (std::filesystem::exists(csv)) *sets[i] = load(csv);
    else if (std::filesystem::exists(bin)) *sets[i] = load(bin);
    else throw DataError(DataErrorCode::Io, "split '" + std::string(kSplitNames[i]) + "' not found in " + dir.string());
  }
  const std::size_t k = std::max(b.train.num_classes, b.calib_online.num_classes);
  for (LabeledSet* s : sets) s->num_classes = k;
  return b;
}

}  // namespace gcos
