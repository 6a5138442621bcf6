#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcos/diffgraph.hpp"
#include "gcos/linalg.hpp"

namespace gcos {

struct SubspaceModel;

struct NetworkConfig {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t feature_dim = 16;
  std::size_t num_classes = 3;
  std::uint64_t seed = 0;
};

struct Linear {
  diff::Parameter weight;  // in x out
  diff::Parameter bias;    // out
};

// f_theta: stack of Linear + ReLU layers ending at the feature dimension.
struct Backbone {
  std::vector<Linear> layers;
  std::size_t input_dim() const { return layers.front().weight.value.shape()[0]; }
  std::size_t feature_dim() const { return layers.back().weight.value.shape()[1]; }
};

// h_phi: features -> K logits.
struct ClassifierHead {
  diff::Parameter weight;  // D x K
  diff::Parameter bias;    // K
  std::size_t num_classes() const { return bias.value.size(); }
};

// Learnable map from an energy value to the ID-vs-OOD logit:
// phi(E) = scale * (-E) + shift.
struct EnergyHead {
  diff::Parameter scale;
  diff::Parameter shift;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Network {
 public:
  // Leaf handles of every parameter inside one graph.
  struct Bound {
    std::vector<diff::Var> layer_weights;
    std::vector<diff::Var> layer_biases;
    diff::Var head_weight, head_bias;
    diff::Var energy_scale, energy_shift;
  };

  Network() = default;
  Network(Backbone backbone, ClassifierHead head, EnergyHead energy_head);

  // Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases, scale 1, shift 0.
  static Network create(const NetworkConfig& config);

  Bound bind(diff::Graph& graph, bool requires_grad = true) const;
  diff::Var features(diff::Graph& graph, const Bound& bound, diff::Var inputs) const;
  diff::Var logits(diff::Graph& graph, const Bound& bound, diff::Var features) const;
  diff::Var phi_logit(diff::Graph& graph, const Bound& bound, diff::Var energy) const;

  // Copies leaf gradients of `bound` into the parameters' grad buffers.
  void collect_grads(const diff::Graph& graph, const Bound& bound);
  void zero_grad();
  std::vector<diff::Parameter*> parameters();

  // Gradient-free evaluation helpers (N x d -> N x D, N x D -> N x K).
  Matrix features(const Matrix& inputs) const;
  Matrix logits(const Matrix& features) const;
  double phi_logit(double energy) const;

  std::size_t input_dim() const { return backbone_.input_dim(); }
  std::size_t feature_dim() const { return backbone_.feature_dim(); }
  std::size_t num_classes() const { return head_.num_classes(); }

  const Backbone& backbone() const { return backbone_; }
  const ClassifierHead& head() const { return head_; }
  const EnergyHead& energy_head() const { return energy_head_; }
  EnergyHead& energy_head() { return energy_head_; }
  ClassifierHead& head() { return head_; }
  Backbone& backbone() { return backbone_; }

 private:
  Backbone backbone_;
  ClassifierHead head_;
  EnergyHead energy_head_;
};

// Checkpoint container: magic "GCNN", u32 version, u32 layer count, then per
// layer u32 rows, u32 cols, weights and biases as little-endian f64; then the
// energy head (scale, shift); then u32 subspace-model count and the models.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Network network;
  std::vector<SubspaceModel> subspaces;
};

std::string serialize_checkpoint(const Network& network, const std::vector<SubspaceModel>& subspaces);
Checkpoint deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const std::filesystem::path& path, const Network& network,
                     const std::vector<SubspaceModel>& subspaces);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// FNV-1a 64 over raw bytes, as 16 hex digits.
std::string content_hash(const std::string& bytes);
std::string checkpoint_hash(const Network& network, const std::vector<SubspaceModel>& subspaces);

}  // namespace gcos
