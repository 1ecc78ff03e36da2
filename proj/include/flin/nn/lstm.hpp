#pragma once

#include <span>
#include <string>
#include <vector>

#include "flin/nn/graph.hpp"

namespace flin::nn {

/// Single-direction LSTM: one fused weight W (4H x (I+H)) over [x; h] and a
/// bias b (4H), gate order (input, forget, cell, output).
class Lstm {
 public:
  Lstm() = default;
  /// Registers `<prefix>.W` and `<prefix>.b` in `params` and initializes them.
  Lstm(ParameterSet& params, const std::string& prefix, Index input_dim, Index hidden_dim, Rng& rng);
  /// Binds to already-registered tensors (after loading a checkpoint).
  static Lstm bind(ParameterSet& params, const std::string& prefix);

  Index input_dim() const { return input_dim_; }
  Index hidden_dim() const { return hidden_dim_; }

  /// Hidden state after each input, aligned with `inputs`. With `reverse`
  /// the sequence is consumed right to left.
  std::vector<NodeId> run(Graph& g, std::span<const NodeId> inputs, bool reverse = false) const;
  /// Hidden state after consuming the whole sequence.
  NodeId final_state(Graph& g, std::span<const NodeId> inputs, bool reverse = false) const;

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
  Index input_dim_ = 0;
  Index hidden_dim_ = 0;
};

/// Forward + backward LSTM pair.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterSet& params, const std::string& prefix, Index input_dim, Index hidden_dim, Rng& rng);
  static BiLstm bind(ParameterSet& params, const std::string& prefix);

  Index output_dim() const { return 2 * forward_.hidden_dim(); }

  /// [h_fwd after the last input; h_bwd after the first input].
  NodeId encode(Graph& g, std::span<const NodeId> inputs) const;
  /// Per-position [h_fwd_i; h_bwd_i].
  std::vector<NodeId> states(Graph& g, std::span<const NodeId> inputs) const;

 private:
  Lstm forward_;
  Lstm backward_;
};

}  // namespace flin::nn
