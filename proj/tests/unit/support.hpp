#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "gcos/linalg.hpp"
#include "gcos/subspace.hpp"

namespace testing_support {

inline Eigen::MatrixXd to_eigen(const gcos::Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline gcos::Matrix from_eigen(const Eigen::MatrixXd& m) {
  gcos::Matrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

inline Eigen::MatrixXd random_orthonormal(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = n(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
}

// A model with known orthonormal basis, descending spectrum and no
// standardizer.
inline gcos::SubspaceModel random_model(std::size_t d, std::mt19937_64& rng, double epsilon = 1e-6) {
  std::uniform_real_distribution<double> u(0.01, 10.0), m(-5.0, 5.0);
  gcos::SubspaceModel model;
  model.eigenvectors = from_eigen(random_orthonormal(d, rng));
  for (std::size_t i = 0; i < d; ++i) {
    model.eigenvalues.push_back(u(rng));
    model.mean.push_back(m(rng));
  }
  std::sort(model.eigenvalues.rbegin(), model.eigenvalues.rend());
  model.epsilon = epsilon;
  return model;
}

inline gcos::Matrix gaussian_rows(std::size_t n, std::size_t d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  gcos::Matrix x(n, d);
  for (double& v : x.data()) v = g(rng);
  return x;
}

}  // namespace testing_support
