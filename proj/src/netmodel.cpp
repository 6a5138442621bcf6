#include "gcos/netmodel.hpp"

#include <cmath>
#include <random>

#include "binary_io.hpp"
#include "gcos/stats.hpp"
#include "gcos/subspace.hpp"

namespace gcos {

using diff::Graph;
using diff::Parameter;
using diff::Tensor;
using diff::Var;

Network::Network(Backbone backbone, ClassifierHead head, EnergyHead energy_head)
    : backbone_(std::move(backbone)), head_(std::move(head)), energy_head_(std::move(energy_head)) {
  if (backbone_.layers.empty()) throw std::invalid_argument("Network: backbone has no layers");
  if (head_.num_classes() < 2) throw std::invalid_argument("Network: classifier head needs K >= 2");
  if (head_.weight.value.shape()[0] != backbone_.feature_dim()) {
    throw std::invalid_argument("Network: head input " + std::to_string(head_.weight.value.shape()[0]) +
                                " != feature dim " + std::to_string(backbone_.feature_dim()));
  }
}

namespace {

Parameter glorot(const std::string& name, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> w(fan_in * fan_out);
  for (double& x : w) x = dist(rng);
  return Parameter(name, Tensor::matrix(fan_in, fan_out, std::move(w)));
}

}  // namespace

Network Network::create(const NetworkConfig& config) {
  if (config.num_classes < 2) throw std::invalid_argument("Network: num_classes must be >= 2");
  std::vector<std::size_t> widths{config.input_dim};
  widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
  widths.push_back(config.feature_dim);

  Backbone backbone;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Rng rng(derive_seed(config.seed, {0x6e6574, i}));
    Linear layer;
    layer.weight = glorot("backbone." + std::to_string(i) + ".weight", widths[i], widths[i + 1], rng);
    layer.bias = Parameter("backbone." + std::to_string(i) + ".bias", Tensor::zeros({widths[i + 1]}));
    backbone.layers.push_back(std::move(layer));
  }
  Rng head_rng(derive_seed(config.seed, {0x6e6574, 0x68656164}));
  ClassifierHead head;
  head.weight = glorot("head.weight", config.feature_dim, config.num_classes, head_rng);
  head.bias = Parameter("head.bias", Tensor::zeros({config.num_classes}));
  EnergyHead energy;
  energy.scale = Parameter("energy.scale", Tensor::scalar(1.0));
  energy.shift = Parameter("energy.shift", Tensor::scalar(0.0));
  return Network(std::move(backbone), std::move(head), std::move(energy));
}

Network::Bound Network::bind(Graph& graph, bool requires_grad) const {
  Bound b;
  for (const Linear& layer : backbone_.layers) {
    b.layer_weights.push_back(graph.leaf(layer.weight.value, requires_grad));
    b.layer_biases.push_back(graph.leaf(layer.bias.value, requires_grad));
  }
  b.head_weight = graph.leaf(head_.weight.value, requires_grad);
  b.head_bias = graph.leaf(head_.bias.value, requires_grad);
  b.energy_scale = graph.leaf(energy_head_.scale.value, requires_grad);
  b.energy_shift = graph.leaf(energy_head_.shift.value, requires_grad);
  return b;
}

Var Network::features(Graph& graph, const Bound& bound, Var inputs) const {
  const Tensor& x = graph.value(inputs);
  if (x.cols() != input_dim()) {
    throw diff::ShapeError("features: input width " + std::to_string(x.cols()) + " != backbone input " +
                           std::to_string(input_dim()));
  }
  Var h = inputs;
  for (std::size_t i = 0; i < bound.layer_weights.size(); ++i) {
    h = graph.relu(graph.add_bias(graph.matmul(h, bound.layer_weights[i]), bound.layer_biases[i]));
  }
  return h;
}

Var Network::logits(Graph& graph, const Bound& bound, Var features) const {
  return graph.add_bias(graph.matmul(features, bound.head_weight), bound.head_bias);
}

Var Network::phi_logit(Graph& graph, const Bound& bound, Var energy) const {
  return graph.affine(graph.neg(energy), bound.energy_scale, bound.energy_shift);
}

void Network::collect_grads(const Graph& graph, const Bound& bound) {
  for (std::size_t i = 0; i < backbone_.layers.size(); ++i) {
    backbone_.layers[i].weight.grad = graph.grad(bound.layer_weights[i]);
    backbone_.layers[i].bias.grad = graph.grad(bound.layer_biases[i]);
  }
  head_.weight.grad = graph.grad(bound.head_weight);
  head_.bias.grad = graph.grad(bound.head_bias);
  energy_head_.scale.grad = graph.grad(bound.energy_scale);
  energy_head_.shift.grad = graph.grad(bound.energy_shift);
}

void Network::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (Linear& layer : backbone_.layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  out.push_back(&energy_head_.scale);
  out.push_back(&energy_head_.shift);
  return out;
}

namespace {
Matrix to_matrix(const Tensor& t) { return Matrix(t.rows(), t.cols(), t.values()); }
Tensor to_tensor(const Matrix& m) { return Tensor::matrix(m.rows(), m.cols(), m.storage()); }
}  // namespace

Matrix Network::features(const Matrix& inputs) const {
  if (inputs.rows() == 0) return Matrix(0, feature_dim());
  Graph g;
  const Bound b = bind(g, false);
  return to_matrix(g.value(features(g, b, g.constant(to_tensor(inputs)))));
}

Matrix Network::logits(const Matrix& feats) const {
  if (feats.rows() == 0) return Matrix(0, num_classes());
  if (feats.cols() != feature_dim()) {
    throw diff::ShapeError("logits: feature width " + std::to_string(feats.cols()) + " != " +
                           std::to_string(feature_dim()));
  }
  Graph g;
  const Bound b = bind(g, false);
  return to_matrix(g.value(logits(g, b, g.constant(to_tensor(feats)))));
}

double Network::phi_logit(double energy) const {
  return energy_head_.scale.value.item() * (-energy) + energy_head_.shift.value.item();
}

// --- checkpoint container ---

namespace {

constexpr std::string_view kMagic = "GCNN";

void write_tensor_data(detail::ByteWriter& w, const Tensor& t) {
  for (double v : t.data()) w.f64(v);
}

Tensor read_tensor(detail::ByteReader& r, diff::Shape shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> data(n);
  for (double& v : data) v = r.f64();
  return Tensor(std::move(shape), std::move(data));
}

void write_subspace(detail::ByteWriter& w, const SubspaceModel& m) {
  const std::size_t d = m.dim();
  w.i32(m.class_id);
  w.u32(static_cast<std::uint32_t>(d));
  w.f64(m.epsilon);
  w.u8(m.standardizer ? 1 : 0);
  for (double v : m.mean) w.f64(v);
  for (double v : m.eigenvalues) w.f64(v);
  for (double v : m.eigenvectors.data()) w.f64(v);
  if (m.standardizer) {
    for (double v : m.standardizer->mean) w.f64(v);
    for (double v : m.standardizer->scale) w.f64(v);
  }
}

SubspaceModel read_subspace(detail::ByteReader& r) {
  SubspaceModel m;
  m.class_id = r.i32();
  const std::size_t d = r.u32();
  if (d == 0 || d > 4096) throw CheckpointError("checkpoint: implausible subspace dimension " + std::to_string(d));
  m.epsilon = r.f64();
  const bool has_std = r.u8() != 0;
  auto read_vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = r.f64();
    return v;
  };
  m.mean = read_vec(d);
  m.eigenvalues = read_vec(d);
  m.eigenvectors = Matrix(d, d, read_vec(d * d));
  if (has_std) m.standardizer = Standardizer{read_vec(d), read_vec(d)};
  return m;
}

}  // namespace

std::string serialize_checkpoint(const Network& network, const std::vector<SubspaceModel>& subspaces) {
  detail::ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  const auto& layers = network.backbone().layers;
  w.u32(static_cast<std::uint32_t>(layers.size() + 1));
  auto write_layer = [&](const Parameter& weight, const Parameter& bias) {
    w.u32(static_cast<std::uint32_t>(weight.value.shape()[0]));
    w.u32(static_cast<std::uint32_t>(weight.value.shape()[1]));
    write_tensor_data(w, weight.value);
    write_tensor_data(w, bias.value);
  };
  for (const Linear& l : layers) write_layer(l.weight, l.bias);
  write_layer(network.head().weight, network.head().bias);
  w.f64(network.energy_head().scale.value.item());
  w.f64(network.energy_head().shift.value.item());
  w.u32(static_cast<std::uint32_t>(subspaces.size()));
  for (const SubspaceModel& m : subspaces) write_subspace(w, m);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  try {
    detail::ByteReader r(bytes);
    if (r.remaining() < 4 || r.raw(4) != kMagic) throw CheckpointError("checkpoint: bad magic (expected GCNN)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t layer_count = r.u32();
    if (layer_count < 2 || layer_count > 64) {
      throw CheckpointError("checkpoint: implausible layer count " + std::to_string(layer_count));
    }
    std::vector<Linear> linears;
    for (std::uint32_t i = 0; i < layer_count; ++i) {
      const std::size_t rows = r.u32(), cols = r.u32();
      if (rows == 0 || cols == 0 || rows > 1u << 16 || cols > 1u << 16) {
        throw CheckpointError("checkpoint: implausible layer shape at layer " + std::to_string(i));
      }
      const bool is_head = i + 1 == layer_count;
      const std::string prefix = is_head ? "head" : "backbone." + std::to_string(i);
      Linear l;
      l.weight = Parameter(prefix + ".weight", read_tensor(r, {rows, cols}));
      l.bias = Parameter(prefix + ".bias", read_tensor(r, {cols}));
      linears.push_back(std::move(l));
    }
    EnergyHead energy;
    energy.scale = Parameter("energy.scale", Tensor::scalar(r.f64()));
    energy.shift = Parameter("energy.shift", Tensor::scalar(r.f64()));
    ClassifierHead head{std::move(linears.back().weight), std::move(linears.back().bias)};
    linears.pop_back();
    for (std::size_t i = 1; i < linears.size(); ++i) {
      if (linears[i].weight.value.shape()[0] != linears[i - 1].weight.value.shape()[1]) {
        throw CheckpointError("checkpoint: layer " + std::to_string(i) + " input does not match previous output");
      }
    }
    Checkpoint ck{Network(Backbone{std::move(linears)}, std::move(head), std::move(energy)), {}};
    const std::uint32_t model_count = r.u32();
    for (std::uint32_t i = 0; i < model_count; ++i) ck.subspaces.push_back(read_subspace(r));
    if (r.remaining() != 0) throw CheckpointError("checkpoint: trailing bytes after payload");
    return ck;
  } catch (const detail::TruncatedInput& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Network& network,
                     const std::vector<SubspaceModel>& subspaces) {
  detail::write_file(path.string(), serialize_checkpoint(network, subspaces));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(detail::read_file(path.string()));
}

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string checkpoint_hash(const Network& network, const std::vector<SubspaceModel>& subspaces) {
  return content_hash(serialize_checkpoint(network, subspaces));
}

}  // namespace gcos
