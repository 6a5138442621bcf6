#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gcos {

// Row-major dense matrix of doubles. Used for feature batches (N x D),
// covariances and eigenvector bases.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double> column(std::size_t c) const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  void append_row(std::span<const double> values);
  Matrix transposed() const;
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Column means of an N x D matrix.
std::vector<double> column_means(const Matrix& x);

// Sample covariance with denominator N-1 around the given center.
Matrix covariance(const Matrix& x, std::span<const double> center);

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // column i pairs with values[i]
  int sweeps = 0;
};

// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenpairs are
// ordered by descending eigenvalue (stable with respect to the diagonal
// order on ties) and each eigenvector is sign-fixed so that its
// largest-magnitude entry is positive.
EigenDecomposition symmetric_eigen(const Matrix& symmetric);

}  // namespace gcos
