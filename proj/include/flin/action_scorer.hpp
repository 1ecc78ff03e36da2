#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "flin/dataset.hpp"
#include "flin/nn/graph.hpp"
#include "flin/nn/lstm.hpp"
#include "flin/schema.hpp"
#include "flin/training_types.hpp"
#include "flin/vocabulary.hpp"

namespace flin {

/// Dual-encoder intent scorer. A command and an (action name, parameter
/// names) pair are embedded into R^{2d} by a shared word embedding and
/// Bi-LSTM; the pair goes through a tanh feed-forward layer over
/// [v_a; mean v_p], and the score is (cos + 1) / 2.
class ActionScorer {
 public:
  ActionScorer(std::shared_ptr<const Vocabulary> vocab, nn::Index dim, std::uint64_t seed);

  static ActionScorer load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  /// v_c = [h_fwd_R; h_bwd_1]. Throws ValidationError for commands with no tokens.
  nn::Vector encode_command(std::string_view command) const;
  /// v_ap; components lie in (-1, 1).
  nn::Vector encode_action(const ActionSchema& action) const;
  double score(std::string_view command, const ActionSchema& action) const;
  static double score(const nn::Vector& command, const nn::Vector& action);

  /// sum over positives x negatives of max(S(neg) - S(pos) + 1, 0).
  double ranking_loss(std::string_view command, std::span<const ActionSchema> positives,
                      std::span<const ActionSchema> negatives) const;

  // Graph builders shared by training and gradient checks.
  nn::NodeId command_node(nn::Graph& g, std::string_view command) const;
  nn::NodeId action_node(nn::Graph& g, const ActionSchema& action) const;
  /// Returns -1 when `negatives` is empty (the loss is 0).
  nn::NodeId ranking_loss_node(nn::Graph& g, std::string_view command, std::span<const ActionSchema> positives,
                               std::span<const ActionSchema> negatives) const;

  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const Vocabulary& vocabulary() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> shared_vocabulary() const { return vocab_; }
  nn::Index dim() const { return dim_; }
  std::shared_ptr<nn::Parameter> word_embedding() const { return params_.shared("word_embedding"); }

  double dropout = 0.0;  // applied to Bi-LSTM outputs while training

 private:
  ActionScorer() = default;
  void bind();
  nn::NodeId text_node(nn::Graph& g, std::string_view text) const;

  std::shared_ptr<const Vocabulary> vocab_;
  nn::Index dim_ = 0;
  nn::ParameterSet params_;
  nn::BiLstm encoder_;
  nn::Parameter* ff_weight_ = nullptr;
  nn::Parameter* ff_bias_ = nullptr;
  nn::Parameter* embedding_ = nullptr;
};

/// Fraction of examples whose gold action is the argmax of S_a over its page.
double action_accuracy(const ActionScorer& scorer, const std::vector<Example>& examples, const SchemaSet& schemas);

/// Minimizes the margin ranking loss with N1 same-page negatives resampled
/// every epoch, Adam updates per batch, and keeps the best-valid-accuracy
/// weights. Throws TrainingError on an empty training or validation set.
TrainingHistory train_action_scorer(ActionScorer& scorer, const std::vector<Example>& train,
                                    const std::vector<Example>& valid, const SchemaSet& schemas,
                                    const TrainOptions& options);

}  // namespace flin
