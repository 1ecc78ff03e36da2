#include "flin/nn/lstm.hpp"

#include <cmath>

#include "flin/error.hpp"

namespace flin::nn {

Lstm::Lstm(ParameterSet& params, const std::string& prefix, Index input_dim, Index hidden_dim, Rng& rng)
    : input_dim_(input_dim), hidden_dim_(hidden_dim) {
  weight_ = &params.add(prefix + ".W", 4 * hidden_dim, input_dim + hidden_dim);
  bias_ = &params.add(prefix + ".b", 4 * hidden_dim, 1);
  init_uniform(*weight_, 1.0 / std::sqrt(static_cast<double>(hidden_dim)), rng);
  bias_->value.middleRows(hidden_dim, hidden_dim).setOnes();  // forget gate
}

Lstm Lstm::bind(ParameterSet& params, const std::string& prefix) {
  Lstm l;
  l.weight_ = &params.at(prefix + ".W");
  l.bias_ = &params.at(prefix + ".b");
  l.hidden_dim_ = l.weight_->value.rows() / 4;
  l.input_dim_ = l.weight_->value.cols() - l.hidden_dim_;
  return l;
}

std::vector<NodeId> Lstm::run(Graph& g, std::span<const NodeId> inputs, bool reverse) const {
  if (inputs.empty()) throw Error("LSTM over an empty sequence");
  const NodeId w = g.param(*weight_);
  const NodeId b = g.param(*bias_);
  NodeId h = g.zeros(hidden_dim_);
  NodeId c = h;
  std::vector<NodeId> out(inputs.size());
  for (std::size_t step = 0; step < inputs.size(); ++step) {
    const std::size_t pos = reverse ? inputs.size() - 1 - step : step;
    const NodeId xh[2] = {inputs[pos], h};
    const NodeId gates = g.add(g.matvec(w, g.concat(xh)), b);
    const NodeId hc = g.lstm_cell(gates, c);
    h = g.slice(hc, 0, hidden_dim_);
    c = g.slice(hc, hidden_dim_, hidden_dim_);
    out[pos] = h;
  }
  return out;
}

NodeId Lstm::final_state(Graph& g, std::span<const NodeId> inputs, bool reverse) const {
  const auto states = run(g, inputs, reverse);
  return reverse ? states.front() : states.back();
}

BiLstm::BiLstm(ParameterSet& params, const std::string& prefix, Index input_dim, Index hidden_dim, Rng& rng)
    : forward_(params, prefix + ".fwd", input_dim, hidden_dim, rng),
      backward_(params, prefix + ".bwd", input_dim, hidden_dim, rng) {}

BiLstm BiLstm::bind(ParameterSet& params, const std::string& prefix) {
  BiLstm b;
  b.forward_ = Lstm::bind(params, prefix + ".fwd");
  b.backward_ = Lstm::bind(params, prefix + ".bwd");
  return b;
}

NodeId BiLstm::encode(Graph& g, std::span<const NodeId> inputs) const {
  const NodeId parts[2] = {forward_.final_state(g, inputs, false), backward_.final_state(g, inputs, true)};
  return g.concat(parts);
}

std::vector<NodeId> BiLstm::states(Graph& g, std::span<const NodeId> inputs) const {
  const auto fwd = forward_.run(g, inputs, false);
  const auto bwd = backward_.run(g, inputs, true);
  std::vector<NodeId> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const NodeId parts[2] = {fwd[i], bwd[i]};
    out[i] = g.concat(parts);
  }
  return out;
}

}  // namespace flin::nn
