#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flin/dataset.hpp"
#include "flin/nn/graph.hpp"
#include "flin/nn/lstm.hpp"
#include "flin/training_types.hpp"
#include "flin/vocabulary.hpp"

namespace flin {

struct LexicalScore {
  double fuzzy = 0.0;        // 1 - levenshtein / max length
  double value_match = 0.0;  // fraction of value words present in the mention
};

/// Both components on normalized text; see text::fuzzy_ratio / value_match.
LexicalScore lexical_similarity(std::string_view mention, std::string_view value);

struct ValueScore {
  double word = 0.0;
  double chr = 0.0;
  LexicalScore lex;
  double net = 0.0;
};

struct ValueScorerConfig {
  nn::Index char_dim = 300;
  /// Average fuzzy and value_match as two separate addends (four-way mean)
  /// instead of collapsing them first.
  bool four_way_mean = false;
  std::size_t max_word_chars = 32;
  std::size_t max_words = 64;
};

/// Printable ASCII plus padding and an out-of-vocabulary character.
class CharVocabulary {
 public:
  static constexpr nn::Index kPad = 0;
  static constexpr nn::Index kUnknown = 1;

  CharVocabulary();
  explicit CharVocabulary(const std::vector<std::string>& entries);

  nn::Index index(char c) const;
  nn::Index size() const { return static_cast<nn::Index>(entries_.size()); }
  const std::vector<std::string>& entries() const { return entries_; }

 private:
  std::vector<std::string> entries_;
};

/// Mention-to-value similarity: word-level Bi-LSTM over the shared word
/// embedding, character-level LSTM-per-word composed by a Bi-LSTM, and two
/// lexical scores, averaged into a net score in [0, 1].
class ValueScorer {
 public:
  /// `word_embedding` may be the action scorer's tensor (shared) or a copy.
  ValueScorer(std::shared_ptr<const Vocabulary> vocab, std::shared_ptr<nn::Parameter> word_embedding,
              ValueScorerConfig config, std::uint64_t seed);

  static ValueScorer load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  struct Encoding {
    nn::Vector word;
    nn::Vector chr;
  };
  /// Throws ValidationError for text with no tokens.
  Encoding encode(std::string_view text) const;

  double word_similarity(std::string_view mention, std::string_view value) const;
  double char_similarity(std::string_view mention, std::string_view value) const;
  ValueScore score(std::string_view mention, std::string_view value) const;
  ValueScore score(const Encoding& mention, const Encoding& value, std::string_view mention_text,
                   std::string_view value_text) const;
  double combine(double word, double chr, const LexicalScore& lex) const;

  double ranking_loss(std::string_view mention, std::string_view positive,
                      std::span<const std::string> negatives) const;

  struct Nodes {
    nn::NodeId word;
    nn::NodeId chr;
  };
  Nodes encode_nodes(nn::Graph& g, std::string_view text) const;
  nn::NodeId net_node(nn::Graph& g, const Nodes& mention, const Nodes& value, const LexicalScore& lex) const;
  /// Returns -1 when `negatives` is empty.
  nn::NodeId ranking_loss_node(nn::Graph& g, std::string_view mention, std::string_view positive,
                               std::span<const std::string> negatives) const;

  const ValueScorerConfig& config() const { return config_; }
  ValueScorerConfig& config() { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const Vocabulary& vocabulary() const { return *vocab_; }

  double dropout = 0.0;

 private:
  void bind();

  std::shared_ptr<const Vocabulary> vocab_;
  CharVocabulary chars_;
  ValueScorerConfig config_;
  nn::ParameterSet params_;
  nn::Parameter* word_embedding_ = nullptr;
  nn::Parameter* char_embedding_ = nullptr;
  nn::BiLstm word_encoder_;
  nn::Lstm char_word_encoder_;
  nn::BiLstm char_encoder_;
};

/// A closed-domain assignment with its mention, used to train and validate
/// the value scorer.
struct ValueRecord {
  std::string mention;
  std::string parameter;
  std::string gold;
  std::vector<std::string> domain;
};

std::vector<ValueRecord> value_records(const std::vector<Example>& examples, const SchemaSet& schemas);

/// Fraction of records whose argmax net score over the domain is the gold.
double value_accuracy(const ValueScorer& scorer, const std::vector<ValueRecord>& records);

TrainingHistory train_value_scorer(ValueScorer& scorer, const std::vector<Example>& train,
                                   const std::vector<Example>& valid, const SchemaSet& schemas,
                                   const TrainOptions& options);

}  // namespace flin
