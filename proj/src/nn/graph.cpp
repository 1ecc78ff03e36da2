#include "flin/nn/graph.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "flin/error.hpp"

namespace flin::nn {

NodeId Graph::push(Op op, NodeId a, NodeId b) {
  if (size_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[size_];
  n.op = op;
  n.a = a;
  n.b = b;
  n.param = nullptr;
  n.index = 0;
  n.length = 0;
  n.k = 0.0;
  n.inputs.clear();
  n.needs_grad = (a >= 0 && nodes_[static_cast<std::size_t>(a)].needs_grad) ||
                 (b >= 0 && nodes_[static_cast<std::size_t>(b)].needs_grad);
  return static_cast<NodeId>(size_++);
}

NodeId Graph::push_many(Op op, std::span<const NodeId> inputs) {
  const NodeId id = push(op);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.inputs.assign(inputs.begin(), inputs.end());
  for (NodeId in : inputs) n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(in)].needs_grad;
  return id;
}

const Matrix& Graph::value(NodeId id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.op == Op::param ? n.param->value : n.value;
}

NodeId Graph::constant(const Matrix& value) {
  const NodeId id = push(Op::constant);
  nodes_[static_cast<std::size_t>(id)].value = value;
  return id;
}

NodeId Graph::zeros(Index rows) {
  const NodeId id = push(Op::constant);
  nodes_[static_cast<std::size_t>(id)].value.setZero(rows, 1);
  return id;
}

NodeId Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return it->second;
  const NodeId id = push(Op::param);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.param = &p;
  n.needs_grad = true;
  param_nodes_.emplace(&p, id);
  return id;
}

NodeId Graph::lookup(Parameter& table, Index column) {
  assert(column >= 0 && column < table.value.cols());
  const NodeId id = push(Op::lookup);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.param = &table;
  n.index = column;
  n.needs_grad = true;
  n.value = table.value.col(column);
  return id;
}

NodeId Graph::matvec(NodeId w, NodeId x) {
  const NodeId id = push(Op::matvec, w, x);
  nodes_[static_cast<std::size_t>(id)].value.noalias() = value(w) * value(x);
  return id;
}

NodeId Graph::add(NodeId a, NodeId b) {
  const NodeId id = push(Op::add, a, b);
  nodes_[static_cast<std::size_t>(id)].value = value(a) + value(b);
  return id;
}

NodeId Graph::sub(NodeId a, NodeId b) {
  const NodeId id = push(Op::sub, a, b);
  nodes_[static_cast<std::size_t>(id)].value = value(a) - value(b);
  return id;
}

NodeId Graph::mul(NodeId a, NodeId b) {
  const NodeId id = push(Op::mul, a, b);
  nodes_[static_cast<std::size_t>(id)].value = value(a).cwiseProduct(value(b));
  return id;
}

NodeId Graph::scale(NodeId a, double k) {
  const NodeId id = push(Op::scale, a);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.k = k;
  n.value = value(a) * k;
  return id;
}

NodeId Graph::shift(NodeId a, double k) {
  const NodeId id = push(Op::shift, a);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.k = k;
  n.value = value(a).array() + k;
  return id;
}

NodeId Graph::sigmoid(NodeId a) {
  const NodeId id = push(Op::sigmoid, a);
  nodes_[static_cast<std::size_t>(id)].value = (1.0 + (-value(a).array()).exp()).inverse().matrix();
  return id;
}

NodeId Graph::tanh(NodeId a) {
  const NodeId id = push(Op::tanh, a);
  nodes_[static_cast<std::size_t>(id)].value = value(a).array().tanh().matrix();
  return id;
}

NodeId Graph::relu(NodeId a) {
  const NodeId id = push(Op::relu, a);
  nodes_[static_cast<std::size_t>(id)].value = value(a).cwiseMax(0.0);
  return id;
}

NodeId Graph::concat(std::span<const NodeId> parts) {
  const NodeId id = push_many(Op::concat, parts);
  Index rows = 0;
  for (NodeId p : parts) rows += value(p).rows();
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.value.resize(rows, 1);
  Index offset = 0;
  for (NodeId p : parts) {
    const Matrix& v = value(p);
    n.value.middleRows(offset, v.rows()) = v;
    offset += v.rows();
  }
  return id;
}

NodeId Graph::slice(NodeId a, Index offset, Index length) {
  const NodeId id = push(Op::slice, a);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.index = offset;
  n.length = length;
  n.value = value(a).middleRows(offset, length);
  return id;
}

NodeId Graph::mean(std::span<const NodeId> parts) {
  if (parts.empty()) throw Error("mean of no nodes");
  const NodeId id = push_many(Op::mean, parts);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.value = value(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) n.value += value(parts[i]);
  n.value /= static_cast<double>(parts.size());
  return id;
}

NodeId Graph::sum(std::span<const NodeId> parts) {
  if (parts.empty()) throw Error("sum of no nodes");
  const NodeId id = push_many(Op::sum, parts);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.value = value(parts[0]);
  for (std::size_t i = 1; i < parts.size(); ++i) n.value += value(parts[i]);
  return id;
}

NodeId Graph::dot(NodeId a, NodeId b) {
  const NodeId id = push(Op::dot, a, b);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.value.resize(1, 1);
  n.value(0, 0) = value(a).col(0).dot(value(b).col(0));
  return id;
}

NodeId Graph::cosine_score(NodeId a, NodeId b) {
  const NodeId id = push(Op::cosine, a, b);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const auto va = value(a).col(0);
  const auto vb = value(b).col(0);
  const double na = va.norm();
  const double nb = vb.norm();
  const double cos = (na == 0.0 || nb == 0.0) ? 0.0 : std::clamp(va.dot(vb) / (na * nb), -1.0, 1.0);
  n.value.resize(1, 1);
  n.value(0, 0) = 0.5 * (cos + 1.0);
  n.k = cos;
  return id;
}

NodeId Graph::stack(std::span<const NodeId> scalars) {
  const NodeId id = push_many(Op::stack, scalars);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  n.value.resize(static_cast<Index>(scalars.size()), 1);
  for (std::size_t i = 0; i < scalars.size(); ++i) n.value(static_cast<Index>(i), 0) = value(scalars[i])(0, 0);
  return id;
}

NodeId Graph::neg_log_softmax(NodeId logits, Index target) {
  const NodeId id = push(Op::nll, logits);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const auto l = value(logits).col(0);
  assert(target >= 0 && target < l.size());
  const double m = l.maxCoeff();
  n.aux = (l.array() - m).exp().matrix();
  const double z = n.aux.sum();
  n.aux /= z;  // softmax
  n.index = target;
  n.value.resize(1, 1);
  n.value(0, 0) = (std::log(z) + m) - l(target);
  return id;
}

NodeId Graph::lstm_cell(NodeId gates, NodeId c_prev) {
  const NodeId id = push(Op::lstm, gates, c_prev);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const auto z = value(gates).col(0);
  const auto c0 = value(c_prev).col(0);
  const Index h = c0.size();
  // aux columns: i, f, g, o, tanh(c)
  n.aux.resize(h, 5);
  n.aux.col(0) = (1.0 + (-z.segment(0, h).array()).exp()).inverse().matrix();
  n.aux.col(1) = (1.0 + (-z.segment(h, h).array()).exp()).inverse().matrix();
  n.aux.col(2) = z.segment(2 * h, h).array().tanh().matrix();
  n.aux.col(3) = (1.0 + (-z.segment(3 * h, h).array()).exp()).inverse().matrix();
  n.value.resize(2 * h, 1);
  n.value.col(0).segment(h, h) =
      n.aux.col(1).cwiseProduct(c0) + n.aux.col(0).cwiseProduct(n.aux.col(2));
  n.aux.col(4) = n.value.col(0).segment(h, h).array().tanh().matrix();
  n.value.col(0).segment(0, h) = n.aux.col(3).cwiseProduct(n.aux.col(4));
  return id;
}

NodeId Graph::dropout(NodeId a, double rate) {
  if (!training_ || rate <= 0.0 || rng_ == nullptr) return a;
  const NodeId id = push(Op::dropout, a);
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const Matrix& v = value(a);
  n.aux.resize(v.rows(), v.cols());
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  for (Index i = 0; i < v.size(); ++i) n.aux.data()[i] = keep(*rng_) ? inv : 0.0;
  n.value = v.cwiseProduct(n.aux);
  return id;
}

void Graph::backward(NodeId root) {
  for (std::size_t i = 0; i <= static_cast<std::size_t>(root); ++i) {
    Node& n = nodes_[i];
    if (!n.needs_grad) continue;
    const Matrix& v = value(static_cast<NodeId>(i));
    n.grad.setZero(v.rows(), v.cols());
  }
  nodes_[static_cast<std::size_t>(root)].grad.setOnes();
  for (NodeId i = root; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.needs_grad) backprop(n);
  }
}

void Graph::backprop(Node& n) {
  auto grad_of = [this](NodeId id) -> Matrix* {
    Node& in = nodes_[static_cast<std::size_t>(id)];
    return in.needs_grad ? &in.grad : nullptr;
  };
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::constant:
      break;
    case Op::param:
      n.param->grad += g;
      break;
    case Op::lookup:
      n.param->grad.col(n.index) += g.col(0);
      break;
    case Op::matvec:
      if (Matrix* ga = grad_of(n.a)) ga->noalias() += g * value(n.b).transpose();
      if (Matrix* gb = grad_of(n.b)) gb->noalias() += value(n.a).transpose() * g;
      break;
    case Op::add:
      if (Matrix* ga = grad_of(n.a)) *ga += g;
      if (Matrix* gb = grad_of(n.b)) *gb += g;
      break;
    case Op::sub:
      if (Matrix* ga = grad_of(n.a)) *ga += g;
      if (Matrix* gb = grad_of(n.b)) *gb -= g;
      break;
    case Op::mul:
      if (Matrix* ga = grad_of(n.a)) *ga += g.cwiseProduct(value(n.b));
      if (Matrix* gb = grad_of(n.b)) *gb += g.cwiseProduct(value(n.a));
      break;
    case Op::scale:
      if (Matrix* ga = grad_of(n.a)) *ga += g * n.k;
      break;
    case Op::shift:
      if (Matrix* ga = grad_of(n.a)) *ga += g;
      break;
    case Op::sigmoid:
      if (Matrix* ga = grad_of(n.a)) *ga += (g.array() * n.value.array() * (1.0 - n.value.array())).matrix();
      break;
    case Op::tanh:
      if (Matrix* ga = grad_of(n.a)) *ga += (g.array() * (1.0 - n.value.array().square())).matrix();
      break;
    case Op::relu:
      if (Matrix* ga = grad_of(n.a)) *ga += (g.array() * (value(n.a).array() > 0.0).cast<double>()).matrix();
      break;
    case Op::concat: {
      Index offset = 0;
      for (NodeId in : n.inputs) {
        const Index rows = value(in).rows();
        if (Matrix* gi = grad_of(in)) *gi += g.middleRows(offset, rows);
        offset += rows;
      }
      break;
    }
    case Op::slice:
      if (Matrix* ga = grad_of(n.a)) ga->middleRows(n.index, n.length) += g;
      break;
    case Op::mean: {
      const double inv = 1.0 / static_cast<double>(n.inputs.size());
      for (NodeId in : n.inputs) {
        if (Matrix* gi = grad_of(in)) *gi += g * inv;
      }
      break;
    }
    case Op::sum:
      for (NodeId in : n.inputs) {
        if (Matrix* gi = grad_of(in)) *gi += g;
      }
      break;
    case Op::dot: {
      const double s = g(0, 0);
      if (Matrix* ga = grad_of(n.a)) *ga += value(n.b) * s;
      if (Matrix* gb = grad_of(n.b)) *gb += value(n.a) * s;
      break;
    }
    case Op::cosine: {
      const auto va = value(n.a).col(0);
      const auto vb = value(n.b).col(0);
      const double na = va.norm();
      const double nb = vb.norm();
      if (na == 0.0 || nb == 0.0) break;
      const double s = 0.5 * g(0, 0);
      const double cos = n.k;
      if (Matrix* ga = grad_of(n.a)) ga->col(0) += s * (vb / (na * nb) - cos * va / (na * na));
      if (Matrix* gb = grad_of(n.b)) gb->col(0) += s * (va / (na * nb) - cos * vb / (nb * nb));
      break;
    }
    case Op::stack:
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        if (Matrix* gi = grad_of(n.inputs[i])) (*gi)(0, 0) += g(static_cast<Index>(i), 0);
      }
      break;
    case Op::nll:
      if (Matrix* ga = grad_of(n.a)) {
        Matrix d = n.aux * g(0, 0);
        d(n.index, 0) -= g(0, 0);
        *ga += d;
      }
      break;
    case Op::lstm: {
      const Index h = n.aux.rows();
      const auto i_gate = n.aux.col(0).array();
      const auto f_gate = n.aux.col(1).array();
      const auto g_gate = n.aux.col(2).array();
      const auto o_gate = n.aux.col(3).array();
      const auto tc = n.aux.col(4).array();
      const auto gh = g.col(0).segment(0, h).array();
      const Eigen::ArrayXd dc = g.col(0).segment(h, h).array() + gh * o_gate * (1.0 - tc.square());
      if (Matrix* gz = grad_of(n.a)) {
        const auto c0 = value(n.b).col(0).array();
        gz->col(0).segment(0, h) += (dc * g_gate * i_gate * (1.0 - i_gate)).matrix();
        gz->col(0).segment(h, h) += (dc * c0 * f_gate * (1.0 - f_gate)).matrix();
        gz->col(0).segment(2 * h, h) += (dc * i_gate * (1.0 - g_gate.square())).matrix();
        gz->col(0).segment(3 * h, h) += (gh * tc * o_gate * (1.0 - o_gate)).matrix();
      }
      if (Matrix* gc = grad_of(n.b)) gc->col(0) += (dc * f_gate).matrix();
      break;
    }
    case Op::dropout:
      if (Matrix* ga = grad_of(n.a)) *ga += g.cwiseProduct(n.aux);
      break;
  }
}

void Graph::clear() {
  size_ = 0;
  param_nodes_.clear();
}

}  // namespace flin::nn
