#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "gcos/losses.hpp"
#include "gcos/netmodel.hpp"
#include "gcos/subspace.hpp"
#include "support.hpp"

using namespace gcos;
using diff::Parameter;
using diff::Tensor;

namespace {

Network single_layer(std::vector<double> w, std::size_t in, std::size_t out, std::vector<double> head_w,
                     std::size_t k) {
  Backbone b;
  b.layers.push_back({Parameter("l0.w", Tensor::matrix(in, out, std::move(w))),
                      Parameter("l0.b", Tensor::zeros({out}))});
  ClassifierHead h{Parameter("head.w", Tensor::matrix(out, k, std::move(head_w))),
                   Parameter("head.b", Tensor::zeros({k}))};
  EnergyHead e{Parameter("phi.scale", Tensor::scalar(1.0)), Parameter("phi.shift", Tensor::scalar(0.0))};
  return Network(std::move(b), std::move(h), std::move(e));
}

}  // namespace

TEST_CASE("forward examples") {
  const Network zero = single_layer(std::vector<double>(6, 0.0), 2, 3, std::vector<double>(6, 0.0), 2);
  const Matrix f = zero.features(Matrix(2, 2, {3.0, -4.0, 1e3, 7.0}));
  for (double v : f.data()) CHECK(v == 0.0);
  const Matrix l = zero.logits(f);
  for (double v : l.data()) CHECK(v == 0.0);

  const Network id = single_layer({1, 0, 0, 1}, 2, 2, {1, 0, 0, 1}, 2);
  const Matrix g = id.features(Matrix(1, 2, {1.0, -1.0}));
  CHECK(g.storage() == std::vector<double>{1.0, 0.0});
  CHECK(id.logits(Matrix(1, 2, {3.0, 5.0})).storage() == std::vector<double>{3.0, 5.0});
}

TEST_CASE("phi logit") {
  const Network net = Network::create({2, {8}, 4, 3, 1});
  CHECK(net.phi_logit(0.0) == 0.0);
  CHECK(net.phi_logit(-2.0) == 2.0);
  for (double e : {-1e3, -3.0, 0.5, 40.0}) {
    const double s = 1.0 / (1.0 + std::exp(-net.phi_logit(e)));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("dimension checks") {
  const Network net = Network::create({3, {8}, 4, 3, 1});
  CHECK_THROWS_AS(net.features(Matrix(2, 2)), diff::ShapeError);
  CHECK_THROWS_AS(net.logits(Matrix(2, 3)), diff::ShapeError);
  CHECK_THROWS(Network::create({3, {8}, 4, 1, 1}));
}

TEST_CASE("seeded creation is deterministic and within the init bound") {
  const NetworkConfig cfg{2, {64, 64}, 16, 3, 7};
  const Network a = Network::create(cfg);
  const Network b = Network::create(cfg);
  CHECK(serialize_checkpoint(a, {}) == serialize_checkpoint(b, {}));
  std::mt19937_64 rng(3);
  const Matrix x = testing_support::gaussian_rows(20, 2, rng);
  CHECK(a.features(x) == b.features(x));
  CHECK(a.features(x) == a.features(x));
  CHECK(a.features(x).cols() == 16);
  for (const Linear& l : a.backbone().layers) {
    const auto& s = l.weight.value.shape();
    const double bound = std::sqrt(6.0 / static_cast<double>(s[0] + s[1]));
    for (double w : l.weight.value.values()) CHECK(std::abs(w) <= bound);
    for (double v : l.bias.value.values()) CHECK(v == 0.0);
  }
  CHECK(serialize_checkpoint(Network::create({2, {64, 64}, 16, 3, 8}), {}) != serialize_checkpoint(a, {}));
}

TEST_CASE("graph forward agrees with the plain forward") {
  const Network net = Network::create({2, {16, 16}, 8, 3, 4});
  std::mt19937_64 rng(9);
  const Matrix x = testing_support::gaussian_rows(10, 2, rng);
  diff::Graph g;
  const auto bound = net.bind(g, false);
  const diff::Var in = g.constant(Tensor::matrix(10, 2, x.storage()));
  const diff::Var z = net.features(g, bound, in);
  const diff::Var l = net.logits(g, bound, z);
  CHECK(g.value(z).values() == net.features(x).storage());
  CHECK(g.value(l).values() == net.logits(net.features(x)).storage());
}

TEST_CASE("head gradient of cross-entropy matches finite differences") {
  const Network net = Network::create({2, {8}, 4, 3, 2});
  std::mt19937_64 rng(1);
  const Matrix z = testing_support::gaussian_rows(6, 4, rng);
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};
  std::vector<double> packed = net.head().weight.value.values();
  const auto& b = net.head().bias.value.values();
  packed.insert(packed.end(), b.begin(), b.end());
  const diff::LossBuilder f = [&](diff::Graph& g, diff::Var p) {
    const diff::Var w = g.reshape(g.slice(p, 0, 12), {4, 3});
    const diff::Var bias = g.slice(p, 12, 3);
    const diff::Var logits = g.add_bias(g.matmul(g.constant(Tensor::matrix(6, 4, z.storage())), w), bias);
    return cross_entropy(g, logits, labels);
  };
  CHECK(diff::finite_diff_check(f, Tensor::vector(packed), 1e-6) < 1e-4);
}

TEST_CASE("cross-entropy training separates two blobs") {
  std::mt19937_64 rng(21);
  Matrix x = testing_support::gaussian_rows(200, 2, rng, 0.5);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = i < 100 ? 0 : 1;
    x(i, 0) += y[i] ? 3.0 : -3.0;
  }
  Network net = Network::create({2, {16}, 8, 2, 5});
  double last = 0.0;
  for (int step = 0; step < 200; ++step) {
    diff::Graph g;
    const auto bound = net.bind(g);
    const auto logits = net.logits(g, bound, net.features(g, bound, g.constant(Tensor::matrix(200, 2, x.storage()))));
    const auto ce = cross_entropy(g, logits, y);
    last = g.scalar(ce);
    g.backward(ce);
    net.zero_grad();
    net.collect_grads(g, bound);
    diff::sgd_step(net.parameters(), 0.1, 0.0);
  }
  CHECK(last < 0.1);
}

TEST_CASE("checkpoint round trip and corruption") {
  const Network net = Network::create({2, {8, 8}, 4, 3, 11});
  std::mt19937_64 rng(2);
  std::vector<SubspaceModel> models{fit_pca(testing_support::gaussian_rows(30, 4, rng), 0, {true, 1e-6}),
                                    fit_pca(testing_support::gaussian_rows(30, 4, rng), 1)};
  const std::string bytes = serialize_checkpoint(net, models);
  const Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(serialize_checkpoint(back.network, back.subspaces) == bytes);
  REQUIRE(back.subspaces.size() == 2);
  CHECK(back.subspaces[0] == models[0]);
  CHECK(back.subspaces[1] == models[1]);
  CHECK(checkpoint_hash(net, models) == content_hash(bytes));
  CHECK(content_hash(bytes).size() == 16);

  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), CheckpointError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(bad), CheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint(""), CheckpointError);

  const auto path = std::filesystem::temp_directory_path() / "gcos_test_ckpt.bin";
  save_checkpoint(path, net, models);
  CHECK(serialize_checkpoint(load_checkpoint(path).network, models) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("content hash is FNV-1a 64") {
  CHECK(content_hash("") == "cbf29ce484222325");
  CHECK(content_hash("a") == "af63dc4c8601ec8c");
}
