#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "flin/nn/parameters.hpp"

namespace flin::nn {

using NodeId = std::int32_t;

/// Reverse-mode autodiff tape over column vectors and matrices.
///
/// Nodes are appended in evaluation order, so reverse creation order is a
/// valid topological order for backward(). Parameter gradients accumulate
/// into Parameter::grad across graphs until the optimizer clears them.
/// A graph is single-threaded; build one per call for concurrent inference.
class Graph {
 public:
  explicit Graph(bool training = false, Rng* rng = nullptr) : training_(training), rng_(rng) {}

  bool training() const { return training_; }

  NodeId constant(const Matrix& value);
  NodeId zeros(Index rows);
  NodeId param(Parameter& p);
  /// Column `column` of `table` (an embedding lookup).
  NodeId lookup(Parameter& table, Index column);

  NodeId matvec(NodeId w, NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double k);
  NodeId shift(NodeId a, double k);
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId relu(NodeId a);
  NodeId concat(std::span<const NodeId> parts);
  NodeId slice(NodeId a, Index offset, Index length);
  NodeId mean(std::span<const NodeId> parts);
  NodeId sum(std::span<const NodeId> parts);
  NodeId dot(NodeId a, NodeId b);
  /// (cos(a, b) + 1) / 2, with cos := 0 when either vector has zero norm.
  NodeId cosine_score(NodeId a, NodeId b);
  /// Stacks 1x1 nodes into a column vector.
  NodeId stack(std::span<const NodeId> scalars);
  /// -log softmax(logits)[target].
  NodeId neg_log_softmax(NodeId logits, Index target);
  /// Fused LSTM cell. `gates` holds pre-activations (i, f, g, o), each of
  /// size H; returns [h; c] of size 2H.
  NodeId lstm_cell(NodeId gates, NodeId c_prev);
  /// Inverted dropout; identity outside training.
  NodeId dropout(NodeId a, double rate);

  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const { return value(id)(0, 0); }
  std::size_t size() const { return size_; }

  void backward(NodeId root);
  void clear();

 private:
  enum class Op : std::uint8_t {
    constant, param, lookup, matvec, add, sub, mul, scale, shift, sigmoid, tanh, relu,
    concat, slice, mean, sum, dot, cosine, stack, nll, lstm, dropout
  };

  struct Node {
    Op op = Op::constant;
    NodeId a = -1;
    NodeId b = -1;
    Parameter* param = nullptr;
    Index index = 0;
    Index length = 0;
    double k = 0.0;
    bool needs_grad = false;
    std::vector<NodeId> inputs;
    Matrix value;
    Matrix grad;
    Matrix aux;
  };

  NodeId push(Op op, NodeId a = -1, NodeId b = -1);
  NodeId push_many(Op op, std::span<const NodeId> inputs);
  void backprop(Node& n);

  bool training_;
  Rng* rng_;
  std::vector<Node> nodes_;
  std::size_t size_ = 0;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

}  // namespace flin::nn
