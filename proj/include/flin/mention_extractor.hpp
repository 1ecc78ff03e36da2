#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "flin/dataset.hpp"
#include "flin/nn/graph.hpp"
#include "flin/nn/lstm.hpp"
#include "flin/text.hpp"
#include "flin/training_types.hpp"
#include "flin/vocabulary.hpp"

namespace flin {

struct MentionExtractorConfig {
  nn::Index dim = 300;     // word and character-trigram embedding size
  nn::Index hidden = 300;  // per direction; token states have size 2 * hidden
  nn::Index layers = 2;
  nn::Index hash_buckets = 4096;
  std::size_t max_seq_len = 128;
  std::size_t span_max_len = 20;
  /// Checkpoint directory to warm-start the encoder from; empty = random init.
  std::string encoder_init;
};

/// "[CLS] parameter [SEP] command" token sequence with the byte offsets of
/// the command tokens.
struct PackedSequence {
  std::vector<std::string> tokens;
  std::vector<bool> in_question;
  std::size_t command_begin = 0;  // index of the first command token
  std::vector<text::Token> command_tokens;
  bool truncated = false;

  /// Candidate positions for start/end: [CLS] followed by every command token.
  std::size_t candidate_count() const { return command_tokens.size() + 1; }
};

struct MentionPrediction {
  std::optional<MentionSpan> span;  // empty = parameter not expressed
  double start_prob = 0.0;
  double end_prob = 0.0;
  // Softmax over candidates: index 0 is [CLS], index k the k-th command token.
  std::vector<double> start_distribution;
  std::vector<double> end_distribution;
};

/// One supervised record: a parameter queried against a command, with the
/// gold span in token candidates (0 = no mention).
struct MentionRecord {
  std::string parameter;
  std::string command;
  std::optional<std::pair<std::size_t, std::size_t>> span;  // byte offsets [start, end)
};

/// Span-prediction extractor: a contextual Bi-LSTM encoder over the packed
/// sequence and start/end vectors S, E scored against every token state.
class MentionExtractor {
 public:
  MentionExtractor(std::shared_ptr<const Vocabulary> vocab, MentionExtractorConfig config, std::uint64_t seed);

  static MentionExtractor load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  MentionPrediction extract(std::string_view parameter, std::string_view command) const;
  /// Equal to calling extract() per query.
  std::vector<MentionPrediction> extract_batch(std::span<const std::pair<std::string, std::string>> queries) const;

  PackedSequence pack(std::string_view parameter, std::string_view command) const;

  struct Logits {
    nn::NodeId start;
    nn::NodeId end;
  };
  Logits logits(nn::Graph& g, const PackedSequence& seq) const;
  /// -log P_start(gold_start) - log P_end(gold_end), candidate indices.
  nn::NodeId loss_node(nn::Graph& g, const PackedSequence& seq, std::size_t gold_start, std::size_t gold_end) const;

  /// Candidate indices of a byte span, snapped outward to token boundaries.
  /// Returns nullopt if no command token overlaps the span; sets *snapped
  /// when the span cut through a token.
  static std::optional<std::pair<std::size_t, std::size_t>> align(const PackedSequence& seq, std::size_t start,
                                                                  std::size_t end, bool* snapped = nullptr);

  /// Copies tensors of matching name and shape from another checkpoint; the
  /// word embedding is copied row by row for shared tokens.
  void warm_start(const std::filesystem::path& dir);

  const MentionExtractorConfig& config() const { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const Vocabulary& vocabulary() const { return *vocab_; }

  double dropout = 0.0;

 private:
  void bind();
  nn::NodeId token_features(nn::Graph& g, const std::string& token) const;

  std::shared_ptr<const Vocabulary> vocab_;
  MentionExtractorConfig config_;
  nn::ParameterSet params_;
  std::vector<nn::BiLstm> layers_;
  nn::Parameter* word_embedding_ = nullptr;
  nn::Parameter* ngram_embedding_ = nullptr;
  nn::Parameter* start_vector_ = nullptr;
  nn::Parameter* end_vector_ = nullptr;
};

/// One record per parameter of each example's gold action: its mention, or
/// a no-mention record when the command does not express it.
std::vector<MentionRecord> mention_records(const std::vector<Example>& examples, const SchemaSet& schemas);

/// Fraction of records whose predicted span (or no-mention) equals the gold.
double exact_span_accuracy(const MentionExtractor& extractor, const std::vector<MentionRecord>& records);

TrainingHistory train_mention_extractor(MentionExtractor& extractor, const std::vector<Example>& train,
                                        const std::vector<Example>& valid, const SchemaSet& schemas,
                                        const TrainOptions& options);

}  // namespace flin
