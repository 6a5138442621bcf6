#include <doctest.h>

#include <cmath>
#include <random>

#include "gcos/losses.hpp"
#include "gcos/scores.hpp"
#include "support.hpp"

using namespace gcos;
using diff::Graph;
using diff::Tensor;
using diff::Var;

namespace {

double reg_value(std::vector<double> pos, std::vector<double> neg, double m, Pairing pairing) {
  Graph g;
  return g.scalar(reg_loss(g, g.constant(Tensor::vector(std::move(pos))), g.constant(Tensor::vector(std::move(neg))),
                           m, pairing));
}

// Random values kept away from hinge and relu kinks.
std::vector<double> spaced(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * (u(rng) + 0.37 * static_cast<double>(i));
  return v;
}

}  // namespace

TEST_CASE("cross entropy") {
  Graph g;
  const std::vector<int> y{3};
  CHECK(g.scalar(cross_entropy(g, g.constant(Tensor::matrix(1, 10, std::vector<double>(10, 0.0))), y)) ==
        doctest::Approx(std::log(10.0)));
  std::vector<double> big(10, 0.0);
  big[3] = 60.0;
  CHECK(g.scalar(cross_entropy(g, g.constant(Tensor::matrix(1, 10, big)), y)) < 1e-20);
}

TEST_CASE("adaptive margin examples") {
  CHECK(adaptive_margin(std::vector<double>{1, 1, 1, 1}, 50, 95, 1.0) == 0.0);
  CHECK(adaptive_margin(std::vector<double>{0, 10}, 50, 95, 1.0) == doctest::Approx(4.5));
  CHECK(adaptive_margin(std::vector<double>{10, 0}, 50, 95, 1.0) == doctest::Approx(4.5));
  CHECK(adaptive_margin(std::vector<double>{7}, 50, 95, 1.0) == 1.0);
  CHECK(adaptive_margin(std::vector<double>{}, 50, 95, 2.5) == 2.5);
}

TEST_CASE("adaptive margin is nonnegative") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 10.0);
  std::uniform_int_distribution<int> len(2, 64);
  std::uniform_real_distribution<double> p(1.0, 98.0);
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> s(static_cast<std::size_t>(len(rng)));
    for (double& v : s) v = n(rng);
    const double lo = p(rng);
    CHECK(adaptive_margin(s, lo, lo + 1.0, -3.0) >= 0.0);
  }
}

TEST_CASE("reg loss examples") {
  CHECK(reg_value({0}, {10}, 1.0, Pairing::AllPairs) == 0.0);
  CHECK(reg_value({5}, {5}, 2.0, Pairing::AllPairs) == 2.0);
  CHECK(reg_value({1, 3}, {2, 4}, 0.0, Pairing::AllPairs) == doctest::Approx(0.25));
  // Broadcast against mean(neg) = 3: max(0, -2) and max(0, 0).
  CHECK(reg_value({1, 3}, {2, 4}, 0.0, Pairing::BroadcastMean) == 0.0);
  CHECK(reg_value({1, 3}, {2, 4}, 1.0, Pairing::BroadcastMean) == doctest::Approx(0.5));
  CHECK_THROWS(reg_value({}, {1}, 0.0, Pairing::AllPairs));
}

TEST_CASE("reg loss is nonnegative, zero iff separated, monotone in m") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> pos(1 + t % 7), neg(1 + t % 5);
    for (double& v : pos) v = n(rng);
    for (double& v : neg) v = n(rng) + 1.0;
    const double m1 = std::abs(n(rng)), m2 = m1 + std::abs(n(rng));
    const double a = reg_value(pos, neg, m1, Pairing::AllPairs);
    CHECK(a >= 0.0);
    CHECK(reg_value(pos, neg, m2, Pairing::AllPairs) >= a);
    CHECK(reg_value(pos, neg, m2, Pairing::BroadcastMean) >= reg_value(pos, neg, m1, Pairing::BroadcastMean));
    bool separated = true;
    for (double p : pos)
      for (double q : neg) separated = separated && p - q + m1 <= 0.0;
    CHECK((a == 0.0) == separated);
  }
}

TEST_CASE("uncertainty loss") {
  Graph g;
  const Var zero_id = g.constant(Tensor::vector({0.0, 0.0, 0.0}));
  const Var zero_ood = g.constant(Tensor::vector({0.0, 0.0}));
  CHECK(g.scalar(uncertainty_loss(g, zero_id, zero_ood)) == doctest::Approx(2.0 * std::log(2.0)));
  const Var sure_id = g.constant(Tensor::vector({80.0}));
  const Var sure_ood = g.constant(Tensor::vector({-80.0}));
  CHECK(g.scalar(uncertainty_loss(g, sure_id, sure_ood)) < 1e-30);
}

TEST_CASE("total loss") {
  Graph g;
  const Var ce = g.constant(Tensor::scalar(1.0));
  const Var reg = g.constant(Tensor::scalar(2.0));
  CHECK(g.scalar(total_loss(g, ce, reg, 0.1)) == doctest::Approx(1.2));
  CHECK(total_loss(g, ce, reg, 0.0).id == ce.id);
  CHECK(total_loss(g, ce, std::nullopt, 0.5).id == ce.id);
  CHECK(g.scalar(total_loss(g, ce, g.constant(Tensor::scalar(0.0)), 0.5)) == 1.0);
}

TEST_CASE("config validation and names") {
  LossConfig c;
  CHECK_NOTHROW(c.validate());
  c.lambda = -1;
  CHECK_THROWS(c.validate());
  c = {};
  c.p_low = 95;
  c.p_high = 50;
  CHECK_THROWS(c.validate());
  for (LossKind k : {LossKind::Uncertainty, LossKind::RegEnergy, LossKind::RegMahalanobis})
    CHECK(parse_loss_kind(to_string(k)) == k);
  CHECK(parse_pairing("all_pairs") == Pairing::AllPairs);
  CHECK(parse_pairing("broadcast_mean") == Pairing::BroadcastMean);
  CHECK_THROWS(parse_pairing("pairs"));
}

TEST_CASE("graph scores agree with the plain scores") {
  std::mt19937_64 rng(3);
  const Matrix z = testing_support::gaussian_rows(5, 4, rng, 2.0);
  const SubspaceModel m = fit_pca(testing_support::gaussian_rows(40, 4, rng), 0, {true, 1e-6});
  Graph g;
  const Var zv = g.constant(Tensor::matrix(5, 4, z.storage()));
  const auto got = g.value(mahalanobis_scores(g, zv, m)).values();
  const auto e = g.value(energy_scores(g, zv)).values();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(got[i] == doctest::Approx(mahalanobis(z.row(i), m)).epsilon(1e-10));
    CHECK(e[i] == doctest::Approx(energy(z.row(i))).epsilon(1e-12));
  }
  const SubspaceModel m2 = fit_pca(testing_support::gaussian_rows(40, 4, rng, 3.0), 1);
  const std::vector<SubspaceModel> models{m, m2};
  const std::vector<int> labels{1, 0, 0, 1, 1};
  const auto own = g.value(own_class_mahalanobis(g, zv, labels, models)).values();
  const auto mn = g.value(min_class_mahalanobis(g, zv, models)).values();
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(own[i] == doctest::Approx(mahalanobis(z.row(i), models[static_cast<std::size_t>(labels[i])])));
    CHECK(mn[i] == doctest::Approx(std::min(mahalanobis(z.row(i), m), mahalanobis(z.row(i), m2))));
  }
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 rng(4);
  const SubspaceModel judge = fit_pca(testing_support::gaussian_rows(50, 3, rng), 0, {true, 1e-6});
  const std::vector<int> labels{2, 0, 1, 1};
  for (int t = 0; t < 20; ++t) {
    const auto p = spaced(12, rng);
    const diff::LossBuilder ce = [&](Graph& g, Var x) {
      return cross_entropy(g, g.reshape(x, {4, 3}), labels);
    };
    CHECK(diff::finite_diff_check(ce, Tensor::vector(p), 1e-6) < 1e-4);

    const diff::LossBuilder unc = [&](Graph& g, Var x) {
      const Var e = energy_scores(g, g.reshape(g.slice(x, 0, 12), {4, 3}));
      const Var phi = g.affine(g.neg(e), g.slice(x, 0, 1), g.slice(x, 1, 1));
      return uncertainty_loss(g, g.slice(g.reshape(phi, {4}), 0, 2), g.slice(g.reshape(phi, {4}), 2, 2));
    };
    CHECK(diff::finite_diff_check(unc, Tensor::vector(p), 1e-6) < 1e-4);

    for (Pairing pairing : {Pairing::AllPairs, Pairing::BroadcastMean}) {
      // Energy scores: 2 ID rows and 2 outlier rows of 3 logits. Large
      // margin keeps every hinge active, away from the kink.
      const diff::LossBuilder reg_e = [&](Graph& g, Var x) {
        const Var e = energy_scores(g, g.reshape(x, {4, 3}));
        return reg_loss(g, g.slice(e, 0, 2), g.slice(e, 2, 2), 50.0, pairing);
      };
      CHECK(diff::finite_diff_check(reg_e, Tensor::vector(p), 1e-6) < 1e-4);
      const diff::LossBuilder reg_m = [&](Graph& g, Var x) {
        const Var s = mahalanobis_scores(g, g.reshape(x, {4, 3}), judge);
        return reg_loss(g, g.slice(s, 0, 2), g.slice(s, 2, 2), 500.0, pairing);
      };
      CHECK(diff::finite_diff_check(reg_m, Tensor::vector(p), 1e-6) < 1e-4);
    }
  }
}
