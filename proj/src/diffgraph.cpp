#include "gcos/diffgraph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gcos/stats.hpp"

namespace gcos::diff {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

std::size_t product(const Shape& shape) {
  std::size_t p = 1;
  for (std::size_t d : shape) p *= d;
  return p;
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_to_string(a) + " and " +
                   shape_to_string(b));
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_)
    if (d == 0) throw ShapeError("Tensor: zero-length dimension in " + shape_to_string(shape_));
  if (product(shape_) != data_.size()) {
    throw ShapeError("Tensor: shape " + shape_to_string(shape_) + " needs " +
                     std::to_string(product(shape_)) + " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::zeros(Shape shape) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item: tensor " + shape_to_string(shape_) + " is not a scalar");
  return data_[0];
}

void Parameter::zero_grad() { grad = Tensor::zeros(value.shape()); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad.assign(value.size(), 0.0);
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() != 2 || (B.rank() != 1 && B.rank() != 2) || A.shape()[1] != B.shape()[0]) {
    mismatch("matmul", A.shape(), B.shape());
  }
  const std::size_t m = A.shape()[0], k = A.shape()[1];
  const std::size_t p = B.rank() == 2 ? B.shape()[1] : 1;
  std::vector<double> out(m * p, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double ait = A[i * k + t];
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += ait * B[t * p + j];
    }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  n.value = B.rank() == 2 ? Tensor({m, p}, std::move(out)) : Tensor({m}, std::move(out));
  return push(std::move(n));
}

Var Graph::add_bias(Var x, Var bias) {
  const Tensor& X = value(x);
  const Tensor& b = value(bias);
  if (X.rank() == 0 || b.rank() != 1 || X.cols() != b.size()) mismatch("add_bias", X.shape(), b.shape());
  Tensor out = X;
  const std::size_t cols = X.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % cols];
  Node n;
  n.op = Op::AddBias;
  n.inputs = {x.id, bias.id};
  n.requires_grad = requires_grad(x) || requires_grad(bias);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) mismatch("add", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  Node n;
  n.op = Op::Add;
  n.inputs = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) mismatch("sub", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  Node n;
  n.op = Op::Sub;
  n.inputs = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::mul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) mismatch("mul", A.shape(), B.shape());
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  Node n;
  n.op = Op::Mul;
  n.inputs = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::scale(Var x, double c) {
  Tensor out = value(x);
  for (double& v : out.data()) v *= c;
  Node n;
  n.op = Op::Scale;
  n.inputs = {x.id};
  n.param = c;
  n.requires_grad = requires_grad(x);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::add_scalar(Var x, double c) {
  Tensor out = value(x);
  for (double& v : out.data()) v += c;
  Node n;
  n.op = Op::AddScalar;
  n.inputs = {x.id};
  n.param = c;
  n.requires_grad = requires_grad(x);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::relu(Var x) {
  Tensor out = value(x);
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  Node n;
  n.op = Op::Relu;
  n.inputs = {x.id};
  n.requires_grad = requires_grad(x);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::logsumexp(Var x) {
  const Tensor& X = value(x);
  if (X.rank() == 0) throw ShapeError("logsumexp: needs rank >= 1, got " + shape_to_string(X.shape()));
  const std::size_t rows = X.rows(), cols = X.cols();
  std::vector<double> out(rows);
  std::vector<double> softmax(X.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, X[r * cols + c]);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(X[r * cols + c] - mx);
      softmax[r * cols + c] = e;
      s += e;
    }
    out[r] = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) softmax[r * cols + c] /= s;
  }
  Node n;
  n.op = Op::LogSumExp;
  n.inputs = {x.id};
  n.requires_grad = requires_grad(x);
  n.aux = std::move(softmax);
  n.value = X.rank() == 2 ? Tensor({rows}, std::move(out)) : Tensor::scalar(out[0]);
  return push(std::move(n));
}

Var Graph::sigmoid_logit_bce(Var logits, double target) {
  Tensor out = value(logits);
  for (double& v : out.data()) v = softplus(v) - target * v;
  Node n;
  n.op = Op::SigmoidBce;
  n.inputs = {logits.id};
  n.param = target;
  n.requires_grad = requires_grad(logits);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::hinge(Var x, double margin) {
  Tensor out = value(x);
  for (double& v : out.data()) v = std::max(0.0, v + margin);
  Node n;
  n.op = Op::Hinge;
  n.inputs = {x.id};
  n.param = margin;
  n.requires_grad = requires_grad(x);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::mean(Var x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (double v : X.data()) s += v;
  Node n;
  n.op = Op::Mean;
  n.inputs = {x.id};
  n.requires_grad = requires_grad(x);
  n.value = Tensor::scalar(s / static_cast<double>(X.size()));
  return push(std::move(n));
}

Var Graph::sum(Var x) {
  double s = 0.0;
  for (double v : value(x).data()) s += v;
  Node n;
  n.op = Op::Sum;
  n.inputs = {x.id};
  n.requires_grad = requires_grad(x);
  n.value = Tensor::scalar(s);
  return push(std::move(n));
}

Var Graph::row_sum(Var x) {
  const Tensor& X = value(x);
  if (X.rank() == 0) throw ShapeError("row_sum: needs rank >= 1, got " + shape_to_string(X.shape()));
  const std::size_t rows = X.rows(), cols = X.cols();
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r] += X[r * cols + c];
  Node n;
  n.op = Op::RowSum;
  n.inputs = {x.id};
  n.requires_grad = requires_grad(x);
  n.value = X.rank() == 2 ? Tensor({rows}, std::move(out)) : Tensor::scalar(out[0]);
  return push(std::move(n));
}

Var Graph::row_min(Var x) {
  const Tensor& X = value(x);
  if (X.rank() == 0) throw ShapeError("row_min: needs rank >= 1, got " + shape_to_string(X.shape()));
  const std::size_t rows = X.rows(), cols = X.cols();
  std::vector<double> out(rows);
  std::vector<int> arg(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (X[r * cols + c] < X[r * cols + best]) best = c;
    arg[r] = static_cast<int>(best);
    out[r] = X[r * cols + best];
  }
  Node n;
  n.op = Op::RowMin;
  n.inputs = {x.id};
  n.indices = std::move(arg);
  n.requires_grad = requires_grad(x);
  n.value = X.rank() == 2 ? Tensor({rows}, std::move(out)) : Tensor::scalar(out[0]);
  return push(std::move(n));
}

Var Graph::pick(Var x, std::span<const int> column_per_row) {
  const Tensor& X = value(x);
  if (X.rank() != 2 || column_per_row.size() != X.rows()) {
    mismatch("pick", X.shape(), Shape{column_per_row.size()});
  }
  const std::size_t cols = X.cols();
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const int c = column_per_row[r];
    if (c < 0 || static_cast<std::size_t>(c) >= cols) {
      throw ShapeError("pick: column " + std::to_string(c) + " out of range for " + shape_to_string(X.shape()));
    }
    out[r] = X[r * cols + static_cast<std::size_t>(c)];
  }
  Node n;
  n.op = Op::Pick;
  n.inputs = {x.id};
  n.indices.assign(column_per_row.begin(), column_per_row.end());
  n.requires_grad = requires_grad(x);
  n.value = Tensor({X.rows()}, std::move(out));
  return push(std::move(n));
}

Var Graph::pairwise_sub(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.rank() > 1 || B.rank() > 1) mismatch("pairwise_sub", A.shape(), B.shape());
  const std::size_t m = A.size(), k = B.size();
  std::vector<double> out(m * k);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = A[i] - B[j];
  Node n;
  n.op = Op::PairwiseSub;
  n.inputs = {a.id, b.id};
  n.requires_grad = requires_grad(a) || requires_grad(b);
  n.value = Tensor({m, k}, std::move(out));
  return push(std::move(n));
}

Var Graph::affine(Var x, Var scale_var, Var shift_var) {
  const Tensor& S = value(scale_var);
  const Tensor& B = value(shift_var);
  if (S.size() != 1 || B.size() != 1) mismatch("affine", S.shape(), B.shape());
  Tensor out = value(x);
  const double s = S[0], b = B[0];
  for (double& v : out.data()) v = s * v + b;
  Node n;
  n.op = Op::Affine;
  n.inputs = {x.id, scale_var.id, shift_var.id};
  n.requires_grad = requires_grad(x) || requires_grad(scale_var) || requires_grad(shift_var);
  n.value = std::move(out);
  return push(std::move(n));
}

Var Graph::stack_columns(std::span<const Var> columns) {
  if (columns.empty()) throw ShapeError("stack_columns: no columns");
  const Tensor& first = value(columns[0]);
  const std::size_t m = first.size(), k = columns.size();
  Node n;
  n.op = Op::StackColumns;
  std::vector<double> out(m * k);
  for (std::size_t j = 0; j < k; ++j) {
    const Tensor& col = value(columns[j]);
    if (col.rank() != 1 || col.size() != m) mismatch("stack_columns", first.shape(), col.shape());
    for (std::size_t i = 0; i < m; ++i) out[i * k + j] = col[i];
    n.inputs.push_back(columns[j].id);
    n.requires_grad = n.requires_grad || requires_grad(columns[j]);
  }
  n.value = Tensor({m, k}, std::move(out));
  return push(std::move(n));
}

Var Graph::slice(Var x, std::size_t offset, std::size_t length) {
  const Tensor& X = value(x);
  if (X.rank() != 1 || length == 0 || offset + length > X.size()) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for " + shape_to_string(X.shape()));
  }
  std::vector<double> out(X.data().begin() + static_cast<std::ptrdiff_t>(offset),
                          X.data().begin() + static_cast<std::ptrdiff_t>(offset + length));
  Node n;
  n.op = Op::Slice;
  n.inputs = {x.id};
  n.offset = offset;
  n.requires_grad = requires_grad(x);
  n.value = Tensor({length}, std::move(out));
  return push(std::move(n));
}

Var Graph::reshape(Var x, Shape shape) {
  const Tensor& X = value(x);
  if (product(shape) != X.size()) mismatch("reshape", X.shape(), shape);
  Node n;
  n.op = Op::Reshape;
  n.inputs = {x.id};
  n.requires_grad = requires_grad(x);
  n.value = Tensor(std::move(shape), X.values());
  return push(std::move(n));
}

Var Graph::quantile_stopgrad(Var x, double percent) {
  return constant(Tensor::scalar(quantile_unsorted(value(x).data(), percent)));
}

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty()) return Tensor::zeros(n.value.shape());
  return Tensor(n.value.shape(), n.grad);
}

void Graph::zero_grad() {
  for (Node& n : nodes_)
    if (!n.grad.empty()) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

void Graph::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(root.value.shape()));
  }
  if (!root.requires_grad) return;

  std::vector<std::vector<double>> adj(nodes_.size());
  adj[loss.id].assign(1, 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || adj[id].empty()) continue;
    if (n.op == Op::Leaf) {
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.grad[i] += adj[id][i];
      continue;
    }
    propagate(n, adj[id], adj);
    adj[id].clear();
    adj[id].shrink_to_fit();
  }
}

void Graph::propagate(const Node& n, std::span<const double> g,
                      std::vector<std::vector<double>>& adj) const {
  // Returns the adjoint buffer of input `which`, or nullptr when no gradient
  // is needed along that edge.
  auto target = [&](std::size_t which) -> double* {
    const std::size_t id = n.inputs[which];
    if (!nodes_[id].requires_grad) return nullptr;
    auto& buf = adj[id];
    if (buf.empty()) buf.assign(nodes_[id].value.size(), 0.0);
    return buf.data();
  };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      const Tensor& A = nodes_[n.inputs[0]].value;
      const Tensor& B = nodes_[n.inputs[1]].value;
      const std::size_t m = A.shape()[0], k = A.shape()[1];
      const std::size_t p = B.rank() == 2 ? B.shape()[1] : 1;
      if (double* da = target(0)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            double s = 0.0;
            for (std::size_t j = 0; j < p; ++j) s += g[i * p + j] * B[t * p + j];
            da[i * k + t] += s;
          }
      }
      if (double* db = target(1)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t t = 0; t < k; ++t) {
            const double ait = A[i * k + t];
            for (std::size_t j = 0; j < p; ++j) db[t * p + j] += ait * g[i * p + j];
          }
      }
      break;
    }
    case Op::AddBias: {
      const std::size_t cols = nodes_[n.inputs[1]].value.size();
      if (double* dx = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      if (double* db = target(1))
        for (std::size_t i = 0; i < g.size(); ++i) db[i % cols] += g[i];
      break;
    }
    case Op::Add:
    case Op::Sub: {
      const double sign = n.op == Op::Sub ? -1.0 : 1.0;
      if (double* da = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i];
      if (double* db = target(1))
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += sign * g[i];
      break;
    }
    case Op::Mul: {
      const Tensor& A = nodes_[n.inputs[0]].value;
      const Tensor& B = nodes_[n.inputs[1]].value;
      if (double* da = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * B[i];
      if (double* db = target(1))
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * A[i];
      break;
    }
    case Op::Scale:
      if (double* dx = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += n.param * g[i];
      break;
    case Op::AddScalar:
    case Op::Reshape:
      if (double* dx = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      break;
    case Op::Relu:
      if (double* dx = target(0)) {
        const Tensor& X = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (X[i] > 0.0) dx[i] += g[i];
      }
      break;
    case Op::Hinge:
      if (double* dx = target(0)) {
        const Tensor& X = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (X[i] + n.param > 0.0) dx[i] += g[i];
      }
      break;
    case Op::LogSumExp:
      if (double* dx = target(0)) {
        const std::size_t cols = nodes_[n.inputs[0]].value.cols();
        for (std::size_t i = 0; i < n.aux.size(); ++i) dx[i] += g[i / cols] * n.aux[i];
      }
      break;
    case Op::SigmoidBce:
      if (double* dx = target(0)) {
        const Tensor& X = nodes_[n.inputs[0]].value;
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * (sigmoid(X[i]) - n.param);
      }
      break;
    case Op::Mean:
      if (double* dx = target(0)) {
        const std::size_t size = nodes_[n.inputs[0]].value.size();
        const double share = g[0] / static_cast<double>(size);
        for (std::size_t i = 0; i < size; ++i) dx[i] += share;
      }
      break;
    case Op::Sum:
      if (double* dx = target(0)) {
        const std::size_t size = nodes_[n.inputs[0]].value.size();
        for (std::size_t i = 0; i < size; ++i) dx[i] += g[0];
      }
      break;
    case Op::RowSum:
      if (double* dx = target(0)) {
        const std::size_t size = nodes_[n.inputs[0]].value.size();
        const std::size_t cols = nodes_[n.inputs[0]].value.cols();
        for (std::size_t i = 0; i < size; ++i) dx[i] += g[i / cols];
      }
      break;
    case Op::RowMin:
    case Op::Pick:
      if (double* dx = target(0)) {
        const std::size_t cols = nodes_[n.inputs[0]].value.cols();
        for (std::size_t r = 0; r < n.indices.size(); ++r)
          dx[r * cols + static_cast<std::size_t>(n.indices[r])] += g[r];
      }
      break;
    case Op::PairwiseSub: {
      const std::size_t m = nodes_[n.inputs[0]].value.size();
      const std::size_t k = nodes_[n.inputs[1]].value.size();
      if (double* da = target(0))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) da[i] += g[i * k + j];
      if (double* db = target(1))
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) db[j] -= g[i * k + j];
      break;
    }
    case Op::Affine: {
      const Tensor& X = nodes_[n.inputs[0]].value;
      const double s = nodes_[n.inputs[1]].value[0];
      if (double* dx = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += s * g[i];
      if (double* ds = target(1))
        for (std::size_t i = 0; i < g.size(); ++i) ds[0] += X[i] * g[i];
      if (double* db = target(2))
        for (std::size_t i = 0; i < g.size(); ++i) db[0] += g[i];
      break;
    }
    case Op::StackColumns: {
      const std::size_t k = n.inputs.size();
      const std::size_t m = n.value.shape()[0];
      for (std::size_t j = 0; j < k; ++j)
        if (double* dc = target(j))
          for (std::size_t i = 0; i < m; ++i) dc[i] += g[i * k + j];
      break;
    }
    case Op::Slice:
      if (double* dx = target(0))
        for (std::size_t i = 0; i < g.size(); ++i) dx[n.offset + i] += g[i];
      break;
  }
}

void sgd_step(std::span<Parameter* const> params, double lr, double weight_decay) {
  for (const Parameter* p : params) {
    if (p->grad.size() != p->value.size()) {
      throw ShapeError("sgd_step: gradient shape " + shape_to_string(p->grad.shape()) +
                       " does not match parameter '" + p->name + "' " + shape_to_string(p->value.shape()));
    }
    for (double g : p->grad.data())
      if (!std::isfinite(g)) throw NonFiniteGradient(p->name);
  }
  for (Parameter* p : params) {
    auto v = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * (g[i] + weight_decay * v[i]);
  }
}

double finite_diff_check(const LossBuilder& f, const Tensor& params, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw std::invalid_argument("finite_diff_check: eps " + std::to_string(eps) + " outside [1e-7, 1e-3]");
  }
  Graph g;
  const Var x = g.leaf(params, true);
  const Var loss = f(g, x);
  g.backward(loss);
  const Tensor analytic = g.grad(x);

  auto evaluate = [&](const Tensor& at) {
    Graph probe;
    const Var px = probe.leaf(at, false);
    return probe.scalar(f(probe, px));
  };

  double worst = 0.0;
  Tensor shifted = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    shifted[i] = params[i] + eps;
    const double up = evaluate(shifted);
    shifted[i] = params[i] - eps;
    const double down = evaluate(shifted);
    shifted[i] = params[i];
    const double numeric = (up - down) / (2.0 * eps);
    if (!std::isfinite(numeric) || !std::isfinite(analytic[i])) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace gcos::diff
