// SPDX-License-Identifier: Apache-2.0
/**
 * @file   graph.hpp
 * @brief  Tape-based reverse-mode differentiation over rank-2 tensors.
 *
 * Nodes are evaluated eagerly as they are appended, so the node vector is
 * always a valid topological order: every input id is smaller than the id
 * of its consumer. backward() walks the tape once in reverse.
 */
#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modl/common.hpp"
#include "modl/tensor.hpp"

namespace modl {

using NodeId = std::size_t;

enum class OpKind {
  Constant,
  Parameter,
  MatMul,
  AddBias,
  Relu,
  Tanh,
  Sigmoid,
  Add,
  Mul,
  Scale,
  Sum,
  SliceRows,
  Detach,
  Custom,
};

class Graph {
 public:
  /// Receives the graph and the id of the node being differentiated; reads
  /// grad(self) and accumulates into grad(input) for inputs that need it.
  using Backprop = std::function<void(Graph&, NodeId self)>;

  struct Node {
    OpKind kind;
    std::string name;
    std::vector<NodeId> inputs;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::optional<std::size_t> param_slot;
    Backprop backprop;
  };

  NodeId constant(Tensor value, std::string name = "const") {
    return push({OpKind::Constant, std::move(name), {}, std::move(value), {}, false, {}, {}});
  }

  /// Trainable leaf. Slots are numbered in creation order and index the
  /// gradient vector returned by backward().
  NodeId parameter(Tensor value, std::string name = "param") {
    const std::size_t slot = param_nodes_.size();
    const NodeId id = push({OpKind::Parameter, std::move(name), {}, std::move(value), {}, true, slot, {}});
    param_nodes_.push_back(id);
    return id;
  }

  NodeId add_node(OpKind kind, std::string name, std::vector<NodeId> inputs, Tensor value,
                  Backprop backprop) {
    bool rg = false;
    for (NodeId in : inputs) {
      if (in >= nodes_.size())
        throw ContractError("node '" + name + "' references undefined input " + std::to_string(in));
      rg = rg || nodes_[in].requires_grad;
    }
    return push({kind, std::move(name), std::move(inputs), std::move(value), {}, rg, {}, std::move(backprop)});
  }

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return param_nodes_.size(); }
  NodeId parameter_node(std::size_t slot) const { return param_nodes_.at(slot); }

  /// Gradient buffer of a node, allocated on first touch during backward.
  Tensor& grad(NodeId id) {
    Node& n = nodes_.at(id);
    if (n.grad.shape != n.value.shape) n.grad = Tensor(n.value.shape, std::vector<double>(n.value.size(), 0.0));
    return n.grad;
  }

  /// Returns d(loss)/d(parameter) for every parameter slot. Parameters the
  /// loss does not reach get an all-zero tensor.
  std::vector<Tensor> backward(NodeId loss) {
    if (loss >= nodes_.size()) throw ContractError("backward: unknown loss node");
    if (nodes_[loss].value.size() != 1)
      throw ContractError("backward: loss node '" + nodes_[loss].name + "' is not scalar (shape " +
                          nodes_[loss].value.shape_string() + ")");
    for (auto& n : nodes_) n.grad = Tensor();
    grad(loss).data[0] = 1.0;
    for (NodeId id = loss + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || !n.backprop || n.grad.shape != n.value.shape) continue;
      n.backprop(*this, id);
    }
    std::vector<Tensor> out;
    out.reserve(param_nodes_.size());
    for (NodeId p : param_nodes_) out.push_back(grad(p));
    return out;
  }

 private:
  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
  std::vector<NodeId> param_nodes_;
};

// Operations. Each computes its value immediately and registers a backprop
// closure that only touches inputs with requires_grad set.

inline NodeId matmul(Graph& g, NodeId a, NodeId b, std::string name = "matmul") {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  if (A.cols() != B.rows())
    throw DimensionError(name + ": cannot multiply " + A.shape_string() + " by " + B.shape_string());
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor Y(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    double* y = &Y.data[r * m];
    for (std::size_t i = 0; i < k; ++i) {
      const double av = A.data[r * k + i];
      const double* bp = &B.data[i * m];
      for (std::size_t j = 0; j < m; ++j) y[j] += av * bp[j];
    }
  }
  return g.add_node(OpKind::MatMul, std::move(name), {a, b}, std::move(Y), [a, b, n, k, m](Graph& gr, NodeId self) {
    const Tensor& dY = gr.node(self).grad;
    if (gr.requires_grad(a)) {
      const Tensor& Bv = gr.value(b);
      Tensor& dA = gr.grad(a);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < k; ++i) {
          double acc = 0.0;
          const double* dy = &dY.data[r * m];
          const double* bp = &Bv.data[i * m];
          for (std::size_t j = 0; j < m; ++j) acc += dy[j] * bp[j];
          dA.data[r * k + i] += acc;
        }
    }
    if (gr.requires_grad(b)) {
      const Tensor& Av = gr.value(a);
      Tensor& dB = gr.grad(b);
      for (std::size_t r = 0; r < n; ++r) {
        const double* dy = &dY.data[r * m];
        for (std::size_t i = 0; i < k; ++i) {
          const double av = Av.data[r * k + i];
          double* db = &dB.data[i * m];
          for (std::size_t j = 0; j < m; ++j) db[j] += av * dy[j];
        }
      }
    }
  });
}

/// Adds a 1xM bias row to every row of an NxM input.
inline NodeId add_bias(Graph& g, NodeId x, NodeId bias, std::string name = "add_bias") {
  const Tensor& X = g.value(x);
  const Tensor& b = g.value(bias);
  if (b.rows() != 1 || b.cols() != X.cols())
    throw DimensionError(name + ": bias " + b.shape_string() + " does not fit input " + X.shape_string());
  Tensor Y = X;
  const std::size_t m = X.cols();
  for (std::size_t r = 0; r < X.rows(); ++r)
    for (std::size_t j = 0; j < m; ++j) Y.data[r * m + j] += b.data[j];
  return g.add_node(OpKind::AddBias, std::move(name), {x, bias}, std::move(Y), [x, bias, m](Graph& gr, NodeId self) {
    const Tensor& dY = gr.node(self).grad;
    if (gr.requires_grad(x)) {
      Tensor& dX = gr.grad(x);
      for (std::size_t i = 0; i < dY.size(); ++i) dX.data[i] += dY.data[i];
    }
    if (gr.requires_grad(bias)) {
      Tensor& db = gr.grad(bias);
      for (std::size_t i = 0; i < dY.size(); ++i) db.data[i % m] += dY.data[i];
    }
  });
}

namespace detail {

template <class Fwd, class Deriv>
NodeId unary(Graph& g, OpKind kind, NodeId x, std::string name, Fwd fwd, Deriv deriv) {
  Tensor Y = g.value(x);
  for (double& v : Y.data) v = fwd(v);
  return g.add_node(kind, std::move(name), {x}, std::move(Y), [x, deriv](Graph& gr, NodeId self) {
    if (!gr.requires_grad(x)) return;
    const auto& n = gr.node(self);
    const Tensor& X = gr.value(x);
    Tensor& dX = gr.grad(x);
    for (std::size_t i = 0; i < X.size(); ++i) dX.data[i] += n.grad.data[i] * deriv(X.data[i], n.value.data[i]);
  });
}

}  // namespace detail

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline NodeId relu(Graph& g, NodeId x, std::string name = "relu") {
  return detail::unary(
      g, OpKind::Relu, x, std::move(name), [](double v) { return v > 0.0 ? v : 0.0; },
      [](double in, double) { return in > 0.0 ? 1.0 : 0.0; });
}

inline NodeId tanh(Graph& g, NodeId x, std::string name = "tanh") {
  return detail::unary(
      g, OpKind::Tanh, x, std::move(name), [](double v) { return std::tanh(v); },
      [](double, double out) { return 1.0 - out * out; });
}

inline NodeId sigmoid(Graph& g, NodeId x, std::string name = "sigmoid") {
  return detail::unary(
      g, OpKind::Sigmoid, x, std::move(name), [](double v) { return sigmoid(v); },
      [](double, double out) { return out * (1.0 - out); });
}

inline NodeId scale(Graph& g, NodeId x, double c, std::string name = "scale") {
  return detail::unary(
      g, OpKind::Scale, x, std::move(name), [c](double v) { return c * v; }, [c](double, double) { return c; });
}

inline NodeId add(Graph& g, NodeId a, NodeId b, std::string name = "add") {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  if (!A.same_shape(B)) throw DimensionError(name + ": " + A.shape_string() + " vs " + B.shape_string());
  Tensor Y = A;
  for (std::size_t i = 0; i < Y.size(); ++i) Y.data[i] += B.data[i];
  return g.add_node(OpKind::Add, std::move(name), {a, b}, std::move(Y), [a, b](Graph& gr, NodeId self) {
    for (NodeId in : {a, b}) {
      if (!gr.requires_grad(in)) continue;
      const Tensor& dY = gr.node(self).grad;
      Tensor& d = gr.grad(in);
      for (std::size_t i = 0; i < dY.size(); ++i) d.data[i] += dY.data[i];
    }
  });
}

/// Elementwise product.
inline NodeId mul(Graph& g, NodeId a, NodeId b, std::string name = "mul") {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  if (!A.same_shape(B)) throw DimensionError(name + ": " + A.shape_string() + " vs " + B.shape_string());
  Tensor Y = A;
  for (std::size_t i = 0; i < Y.size(); ++i) Y.data[i] *= B.data[i];
  return g.add_node(OpKind::Mul, std::move(name), {a, b}, std::move(Y), [a, b](Graph& gr, NodeId self) {
    const Tensor& dY = gr.node(self).grad;
    if (gr.requires_grad(a)) {
      const Tensor& Bv = gr.value(b);
      Tensor& d = gr.grad(a);
      for (std::size_t i = 0; i < dY.size(); ++i) d.data[i] += dY.data[i] * Bv.data[i];
    }
    if (gr.requires_grad(b)) {
      const Tensor& Av = gr.value(a);
      Tensor& d = gr.grad(b);
      for (std::size_t i = 0; i < dY.size(); ++i) d.data[i] += dY.data[i] * Av.data[i];
    }
  });
}

/// Sum of all elements, as a 1x1 tensor.
inline NodeId sum(Graph& g, NodeId x, std::string name = "sum") {
  double s = 0.0;
  for (double v : g.value(x).data) s += v;
  return g.add_node(OpKind::Sum, std::move(name), {x}, Tensor::scalar(s), [x](Graph& gr, NodeId self) {
    if (!gr.requires_grad(x)) return;
    const double dy = gr.node(self).grad.data[0];
    for (double& d : gr.grad(x).data) d += dy;
  });
}

/// Rows [begin, end) of x.
inline NodeId slice_rows(Graph& g, NodeId x, std::size_t begin, std::size_t end, std::string name = "slice") {
  const Tensor& X = g.value(x);
  if (begin > end || end > X.rows())
    throw DimensionError(name + ": rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of range for " + X.shape_string());
  const std::size_t m = X.cols();
  Tensor Y({end - begin, m}, std::vector<double>(X.data.begin() + static_cast<std::ptrdiff_t>(begin * m),
                                                 X.data.begin() + static_cast<std::ptrdiff_t>(end * m)));
  return g.add_node(OpKind::SliceRows, std::move(name), {x}, std::move(Y), [x, begin, m](Graph& gr, NodeId self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& dY = gr.node(self).grad;
    Tensor& dX = gr.grad(x);
    for (std::size_t i = 0; i < dY.size(); ++i) dX.data[begin * m + i] += dY.data[i];
  });
}

/// Same value, no gradient flows back through it.
inline NodeId detach(Graph& g, NodeId x, std::string name = "detach") {
  return g.constant(g.value(x), std::move(name));
}

}  // namespace modl
