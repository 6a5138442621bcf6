#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "gcos/scores.hpp"
#include "support.hpp"

using namespace gcos;

namespace {

// (z - mu)^T (V diag(lambda) V^T + eps I)^-1 (z - mu) by dense inversion.
double dense_mahalanobis(const std::vector<double>& z, const SubspaceModel& m) {
  const Eigen::MatrixXd v = testing_support::to_eigen(m.eigenvectors);
  const auto d = static_cast<Eigen::Index>(m.dim());
  const Eigen::VectorXd lam = Eigen::Map<const Eigen::VectorXd>(m.eigenvalues.data(), d);
  const Eigen::MatrixXd sigma = v * lam.asDiagonal() * v.transpose() + m.epsilon * Eigen::MatrixXd::Identity(d, d);
  const Eigen::VectorXd diff = Eigen::Map<const Eigen::VectorXd>(z.data(), d) -
                               Eigen::Map<const Eigen::VectorXd>(m.mean.data(), d);
  return diff.dot(sigma.inverse() * diff);
}

}  // namespace

TEST_CASE("energy examples") {
  CHECK(energy(std::vector<double>(10, 0.0)) == doctest::Approx(-std::log(10.0)).epsilon(1e-12));
  CHECK(energy(std::vector<double>(4, 7.5)) == doctest::Approx(-7.5 - std::log(4.0)).epsilon(1e-12));
  CHECK(energy(std::vector<double>{3.25}) == -3.25);
  CHECK(std::isfinite(energy(std::vector<double>{1e4, -1e4, 1e4})));
  CHECK_THROWS(energy(std::vector<double>{}));
}

TEST_CASE("mahalanobis examples") {
  SubspaceModel m;
  m.mean = {0.0, 0.0};
  m.eigenvectors = Matrix::identity(2);
  m.eigenvalues = {4.0, 1.0};
  m.epsilon = 0.0;
  CHECK(mahalanobis(std::vector<double>{2.0, 1.0}, m) == doctest::Approx(2.0));
  CHECK(mahalanobis(m.mean, m) == 0.0);
  CHECK_THROWS(mahalanobis(std::vector<double>{1.0}, m));
}

TEST_CASE("mahalanobis matches the dense-inverse oracle") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const SubspaceModel m = testing_support::random_model(2 + static_cast<std::size_t>(t % 15), rng, 1e-6);
    std::vector<double> z(m.dim());
    for (double& v : z) v = n(rng);
    const double oracle = dense_mahalanobis(z, m);
    CHECK(std::abs(mahalanobis(z, m) - oracle) <= 1e-8 * std::max(1.0, oracle));
  }
}

TEST_CASE("closed form along eigenvectors and monotonicity") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(0.01, 20.0);
  for (int t = 0; t < 100; ++t) {
    const SubspaceModel m = testing_support::random_model(2 + static_cast<std::size_t>(t % 15), rng);
    const std::size_t i = static_cast<std::size_t>(t) % m.dim();
    const double alpha = a(rng);
    const auto v = m.eigenvector(i);
    std::vector<double> z = m.mean;
    for (std::size_t r = 0; r < z.size(); ++r) z[r] += alpha * v[r];
    const double want = alpha * alpha / (m.eigenvalues[i] + m.epsilon);
    CHECK(std::abs(mahalanobis(z, m) - want) <= 1e-9 * want);

    // Arbitrary unit direction: strictly increasing in alpha > 0.
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> u(m.dim());
    for (double& x : u) x = n(rng);
    const double un = norm(u);
    for (double& x : u) x /= un;
    double lo = a(rng), hi = a(rng);
    if (lo > hi) std::swap(lo, hi);
    if (lo == hi) hi += 1.0;
    auto at = [&](double s) {
      std::vector<double> p = m.mean;
      for (std::size_t r = 0; r < p.size(); ++r) p[r] += s * u[r];
      return mahalanobis(p, m);
    };
    CHECK(at(lo) < at(hi));
  }
}

TEST_CASE("mahalanobis ignores eigenvector signs") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    SubspaceModel m = testing_support::random_model(5, rng);
    const std::vector<double> z{1.0, -2.0, 0.5, 3.0, 0.0};
    const double before = mahalanobis(z, m);
    for (std::size_t r = 0; r < 5; ++r) m.eigenvectors(r, static_cast<std::size_t>(t) % 5) *= -1.0;
    CHECK(mahalanobis(z, m) == doctest::Approx(before).epsilon(1e-12));
  }
}

TEST_CASE("standardized model scores raw features") {
  std::mt19937_64 rng(4);
  Matrix x = testing_support::gaussian_rows(300, 3, rng);
  for (std::size_t i = 0; i < x.rows(); ++i) x(i, 1) = 50.0 * x(i, 1) + 10.0;
  const SubspaceModel m = fit_pca(x, 0, {true, 1e-6});
  const std::vector<double> z{0.3, 60.0, -1.0};
  SubspaceModel plain = m;
  plain.standardizer.reset();
  CHECK(mahalanobis(z, m) == doctest::Approx(mahalanobis(m.to_model_space(z), plain)).epsilon(1e-12));
}

TEST_CASE("energy strangeness") {
  CHECK(energy_strangeness(std::vector<double>(10, 0.0)) == doctest::Approx(std::log(10.0)));
  CHECK(energy_strangeness(std::vector<double>{0.0, 0.0}, std::vector<double>{2.0, 0.5}) ==
        doctest::Approx(std::log(2.5)).epsilon(1e-12));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 30.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> l(1 + t % 8);
    for (double& v : l) v = n(rng);
    CHECK(std::abs(energy_strangeness(l) + energy(l)) <= 1e-12 * std::max(1.0, std::abs(energy(l))));
    CHECK(energy_strangeness(l, std::vector<double>(l.size(), 1.0)) == energy_strangeness(l));
  }
  CHECK_THROWS(energy_strangeness(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0}));
  CHECK_THROWS(energy_strangeness(std::vector<double>{0.0}, std::vector<double>{0.0}));
}

TEST_CASE("msp and maxlogit") {
  CHECK(msp(std::vector<double>(4, 1.5)) == doctest::Approx(0.25));
  CHECK(msp(std::vector<double>{10.0, 0.0, 0.0}) == doctest::Approx(1.0 / (1.0 + 2.0 * std::exp(-10.0))).epsilon(1e-12));
  CHECK(msp(std::vector<double>{10.0, 0.0, 0.0}) == doctest::Approx(0.99991).epsilon(1e-4));
  CHECK(maxlogit(std::vector<double>{-1.0, 3.0, 2.0}) == 3.0);
}

TEST_CASE("score kind names") {
  for (ScoreKind k : {ScoreKind::Mahalanobis, ScoreKind::Energy, ScoreKind::EnergyStrangeness, ScoreKind::Msp,
                      ScoreKind::MaxLogit})
    CHECK(parse_score_kind(to_string(k)) == k);
  CHECK_THROWS(parse_score_kind("entropy"));
}
