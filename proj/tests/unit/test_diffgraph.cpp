#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gcos/diffgraph.hpp"

using namespace gcos::diff;

TEST_CASE("forward primitives") {
  Graph g;
  const Var z = g.constant(Tensor::vector(std::vector<double>(10, 0.0)));
  CHECK(g.scalar(g.logsumexp(z)) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  const Var r = g.relu(g.constant(Tensor::vector({-3.5, 2.0})));
  CHECK(g.value(r).values() == std::vector<double>{0.0, 2.0});

  const Var eye = g.constant(Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  const Var x = g.constant(Tensor::vector({4.0, -1.0, 2.5}));
  CHECK(g.value(g.matmul(eye, x)).values() == std::vector<double>{4.0, -1.0, 2.5});
}

TEST_CASE("logsumexp is stable and shift-equivariant") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> f(1 + t % 9);
    for (double& v : f) v = u(rng);
    const double c = u(rng) * 20;
    std::vector<double> shifted = f;
    for (double& v : shifted) v += c;
    Graph g;
    const double a = g.scalar(g.logsumexp(g.constant(Tensor::vector(f))));
    const double b = g.scalar(g.logsumexp(g.constant(Tensor::vector(shifted))));
    CHECK(std::abs(b - (a + c)) <= 1e-12 * std::max(1.0, std::abs(b)));
  }
  Graph g;
  CHECK(g.scalar(g.logsumexp(g.constant(Tensor::vector({1000.0, 1000.0})))) ==
        doctest::Approx(1000.0 + std::log(2.0)));
}

TEST_CASE("shape mismatch names both shapes") {
  Graph g;
  const Var a = g.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  const Var b = g.constant(Tensor::matrix(2, 3, std::vector<double>(6, 1.0)));
  try {
    g.matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
  CHECK_THROWS_AS(g.add(a, g.constant(Tensor::vector({1.0, 2.0}))), ShapeError);
}

TEST_CASE("backward examples") {
  {
    Graph g;
    const Var x = g.leaf(Tensor::vector({1.0, 2.0}), true);
    g.backward(g.sum(g.mul(x, x)));
    CHECK(g.grad(x).values() == std::vector<double>{2.0, 4.0});
  }
  {
    Graph g;
    const Var f = g.leaf(Tensor::vector({0.0, 0.0}), true);
    g.backward(g.logsumexp(f));
    CHECK(g.grad(f)[0] == doctest::Approx(0.5));
    CHECK(g.grad(f)[1] == doctest::Approx(0.5));
  }
  {
    Graph g;
    const Var a = g.leaf(Tensor::scalar(1.0), true);
    const Var b = g.leaf(Tensor::scalar(3.0), true);
    g.backward(g.hinge(g.sub(a, b), 1.0));
    CHECK(g.grad(a).item() == 0.0);
    CHECK(g.grad(b).item() == 0.0);
  }
}

TEST_CASE("backward accumulates across calls and rejects non-scalars") {
  Graph g;
  const Var x = g.leaf(Tensor::vector({1.0, 2.0}), true);
  const Var loss = g.sum(g.mul(x, x));
  g.backward(loss);
  g.backward(loss);
  CHECK(g.grad(x).values() == std::vector<double>{4.0, 8.0});
  g.zero_grad();
  CHECK(g.grad(x).values() == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(g.backward(x), ShapeError);
}

TEST_CASE("backward without trainable leaves is a no-op") {
  Graph g;
  const Var x = g.constant(Tensor::vector({1.0, 2.0}));
  CHECK_NOTHROW(g.backward(g.sum(x)));
  CHECK(g.grad(x).values() == std::vector<double>{0.0, 0.0});
}

TEST_CASE("sgd step arithmetic") {
  Parameter p("p", Tensor::scalar(1.0));
  p.grad = Tensor::scalar(2.0);
  Parameter* ps[] = {&p};
  sgd_step(ps, 0.1, 0.0);
  CHECK(p.value.item() == doctest::Approx(0.8));

  p.value = Tensor::scalar(1.0);
  p.grad = Tensor::scalar(0.0);
  sgd_step(ps, 7.0, 0.0);
  CHECK(p.value.item() == 1.0);

  p.value = Tensor::scalar(2.0);
  sgd_step(ps, 0.5, 0.1);
  CHECK(p.value.item() == doctest::Approx(1.9));
}

TEST_CASE("sgd step refuses non-finite gradients and leaves parameters untouched") {
  Parameter a("a", Tensor::scalar(1.0)), b("layer.bias", Tensor::vector({1.0, 1.0}));
  a.grad = Tensor::scalar(1.0);
  b.grad = Tensor::vector({0.0, std::numeric_limits<double>::quiet_NaN()});
  Parameter* ps[] = {&a, &b};
  try {
    sgd_step(ps, 0.1, 0.0);
    FAIL("expected NonFiniteGradient");
  } catch (const NonFiniteGradient& e) {
    CHECK(e.name == "layer.bias");
  }
  CHECK(a.value.item() == 1.0);
}

TEST_CASE("finite difference checker") {
  const LossBuilder square = [](Graph& g, Var x) { return g.sum(g.mul(x, x)); };
  CHECK(finite_diff_check(square, Tensor::vector({3.0}), 1e-5) < 1e-8);
  const LossBuilder relu = [](Graph& g, Var x) { return g.sum(g.relu(x)); };
  CHECK(finite_diff_check(relu, Tensor::vector({5.0}), 1e-5) < 1e-8);
  const LossBuilder constant = [](Graph& g, Var x) { return g.add_scalar(g.scale(g.sum(x), 0.0), 4.0); };
  CHECK(finite_diff_check(constant, Tensor::vector({1.0, 2.0}), 1e-5) == 0.0);
  CHECK_THROWS_AS(finite_diff_check(square, Tensor::vector({1.0}), 1e-2), std::invalid_argument);
  CHECK_THROWS_AS(finite_diff_check(square, Tensor::vector({1.0}), 1e-9), std::invalid_argument);
  const LossBuilder blowup = [](Graph& g, Var x) { return g.logsumexp(g.scale(x, 1e308)); };
  CHECK(std::isinf(finite_diff_check(blowup, Tensor::vector({10.0, 1.0}), 1e-5)));
}

TEST_CASE("composite ops match finite differences at random points") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::vector<int> picks{2, 0, 1};
  const LossBuilder f = [&](Graph& g, Var p) {
    // p packs a 3x4 input block, a 4x3 weight and a bias of 3.
    const Var x = g.reshape(g.slice(p, 0, 12), {3, 4});
    const Var w = g.reshape(g.slice(p, 12, 12), {4, 3});
    const Var b = g.slice(p, 24, 3);
    const Var h = g.relu(g.add_bias(g.matmul(x, w), b));
    const Var lse = g.logsumexp(h);
    const Var ce = g.mean(g.sub(lse, g.pick(h, picks)));
    const Var pair = g.mean(g.hinge(g.pairwise_sub(g.row_min(h), g.row_sum(h)), 0.3));
    const Var bce = g.mean(g.sigmoid_logit_bce(g.affine(lse, g.slice(p, 0, 1), g.slice(p, 1, 1)), 1.0));
    return g.add(g.add(ce, pair), bce);
  };
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(27);
    for (double& v : p) v = n(rng);
    CHECK(finite_diff_check(f, Tensor::vector(p), 1e-6) < 1e-4);
  }
}

TEST_CASE("quantile_stopgrad carries no gradient") {
  Graph g;
  const Var x = g.leaf(Tensor::vector({0.0, 10.0}), true);
  const Var q = g.quantile_stopgrad(x, 95);
  CHECK(g.scalar(q) == doctest::Approx(9.5));
  CHECK_FALSE(g.requires_grad(q));
  g.backward(g.add(g.sum(x), q));
  CHECK(g.grad(x).values() == std::vector<double>{1.0, 1.0});
}
