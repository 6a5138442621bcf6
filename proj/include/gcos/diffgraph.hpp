#pragma once

// Minimal dense reverse-mode differentiation. Tensors have rank 0, 1 or 2
// and are stored row-major in 64-bit floats. A Graph is an append-only tape:
// node ids are a topological order, and backward walks the tape in reverse.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcos::diff {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  // Rank-2: shape[0]; rank-1 and scalars count as a single row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return rank() == 0 ? 1 : shape_.back(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// A named trainable tensor living outside any graph.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
  void zero_grad();
};

struct Var {
  std::size_t id = 0;
};

enum class Op {
  Leaf,
  MatMul,
  AddBias,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  Relu,
  LogSumExp,
  SigmoidBce,
  Hinge,
  Mean,
  Sum,
  RowSum,
  RowMin,
  Pick,
  PairwiseSub,
  Affine,
  StackColumns,
  Slice,
  Reshape,
};

class Graph {
 public:
  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var parameter(const Parameter& p) { return leaf(p.value, true); }

  // [m x n] . [n x p] -> [m x p];  [m x n] . [n] -> [m]
  Var matmul(Var a, Var b);
  // [B x K] + [K]
  Var add_bias(Var x, Var bias);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, double c);
  Var neg(Var x) { return scale(x, -1.0); }
  Var add_scalar(Var x, double c);
  Var relu(Var x);
  // Reduces the last axis with max-shift: [B x K] -> [B], [K] -> [].
  Var logsumexp(Var x);
  // Elementwise binary cross-entropy on logits against a constant target.
  Var sigmoid_logit_bce(Var logits, double target);
  // Elementwise max(0, x + margin).
  Var hinge(Var x, double margin);
  Var mean(Var x);
  Var sum(Var x);
  // Last-axis reductions: [B x K] -> [B].
  Var row_sum(Var x);
  Var row_min(Var x);
  // [B x K], index per row -> [B]
  Var pick(Var x, std::span<const int> column_per_row);
  // a[M], b[N] (scalars count as length 1) -> [M x N] with a_i - b_j
  Var pairwise_sub(Var a, Var b);
  // scale * x + shift with scalar scale/shift
  Var affine(Var x, Var scale, Var shift);
  // k tensors of shape [M] -> [M x k]
  Var stack_columns(std::span<const Var> columns);
  // rank-1 slice
  Var slice(Var x, std::size_t offset, std::size_t length);
  Var reshape(Var x, Shape shape);
  // Linear-interpolation quantile of x's values as a gradient-free constant.
  Var quantile_stopgrad(Var x, double percent);

  // Accumulates d loss / d leaf into every requires_grad leaf.
  void backward(Var loss);
  void zero_grad();

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const { return value(v).item(); }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  // Accumulated gradient of a leaf (zeros if none flowed).
  Tensor grad(Var v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    std::vector<double> grad;         // leaves only
    std::vector<int> indices;         // Pick
    std::vector<double> aux;          // cached forward values
    double param = 0.0;               // Scale/AddScalar/Hinge/BCE target
    std::size_t offset = 0;           // Slice
  };

  Var push(Node node);
  const Node& node(Var v) const { return nodes_.at(v.id); }
  void propagate(const Node& n, std::span<const double> out_adj,
                 std::vector<std::vector<double>>& adj) const;

  std::vector<Node> nodes_;
};

// p <- p - lr * (g + weight_decay * p). Throws NonFiniteGradient naming the
// first parameter whose gradient contains a NaN or infinity; no parameter is
// modified in that case.
class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& parameter)
      : std::runtime_error("non-finite gradient in parameter '" + parameter + "'"), name(parameter) {}
  std::string name;
};

void sgd_step(std::span<Parameter* const> params, double lr, double weight_decay);

// Builds a scalar loss from a leaf holding the parameters.
using LossBuilder = std::function<Var(Graph&, Var)>;

// max_i |analytic_i - central_i| / max(1, |central_i|). Returns +inf if any
// evaluation is non-finite. eps must lie in [1e-7, 1e-3].
double finite_diff_check(const LossBuilder& f, const Tensor& params, double eps);

}  // namespace gcos::diff
