#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flin/action_scorer.hpp"
#include "flin/dataset.hpp"
#include "flin/evaluation.hpp"
#include "flin/inference.hpp"
#include "flin/mention_extractor.hpp"
#include "flin/schema.hpp"
#include "flin/training_types.hpp"
#include "flin/value_scorer.hpp"

namespace flin {

struct TrainingConfig {
  static MentionExtractorConfig inherit_dim(MentionExtractorConfig m) {
    m.dim = 0;
    m.hidden = 0;
    return m;
  }
  static ValueScorerConfig inherit_dim(ValueScorerConfig v) {
    v.char_dim = 0;
    return v;
  }

  std::size_t batch_size = 50;
  int epochs_action = 7;
  int epochs_mention = 3;
  int epochs_value = 22;
  std::size_t n_negatives = 1;
  double dropout = 0.1;
  nn::Index dim = 300;  // word embedding and hidden size
  double learning_rate = 1e-4;
  double l2 = 0.001;
  std::uint64_t seed = 0;

  // Zero sizes inherit `dim`.
  MentionExtractorConfig mention = inherit_dim(MentionExtractorConfig{});
  ValueScorerConfig value = inherit_dim(ValueScorerConfig{});
  InferenceConfig inference;

  /// Allow training data drawn from several domains into one bundle.
  bool merged_domains = false;

  MentionExtractorConfig resolved_mention() const;
  ValueScorerConfig resolved_value() const;
  /// Throws ValidationError on a non-positive size, rate or epoch count.
  void validate() const;
};

nlohmann::ordered_json to_json(const TrainingConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainingConfig training_config_from_json(const nlohmann::json& j);
TrainingConfig load_training_config(const std::filesystem::path& path);

struct Provenance {
  std::string config_hash;   // SHA-256 of the serialized config
  std::string dataset_hash;  // SHA-256 of train, valid and the schemas
  std::uint64_t seed = 0;
};

nlohmann::ordered_json to_json(const Provenance& p);

std::string sha256_hex(std::string_view data);
Provenance provenance_of(const TrainingConfig& config, const std::vector<Example>& train,
                         const std::vector<Example>& valid, const SchemaSet& schemas);

/// The three trained components plus the decision parameters. Immutable
/// once built; the neural adapters share the components read-only.
class ModelBundle {
 public:
  ModelBundle(std::shared_ptr<const ActionScorer> action, std::shared_ptr<const MentionExtractor> mention,
              std::shared_ptr<const ValueScorer> value, InferenceConfig inference, Provenance provenance);

  /// Throws NotFoundError unless all three checkpoints are present.
  static std::shared_ptr<ModelBundle> load(const std::filesystem::path& run_dir);

  const ActionScorer& action() const { return *action_; }
  const MentionExtractor& mention() const { return *mention_; }
  const ValueScorer& value() const { return *value_; }
  const InferenceConfig& inference() const { return inference_; }
  const Provenance& provenance() const { return provenance_; }
  Scorers scorers() const { return {action_scoring_, mention_extraction_, value_scoring_}; }

  ParseResult parse(const SiteSchema& schema, std::string_view page_id, std::string_view command) const;
  ParseResult parse(const SiteSchema& schema, std::string_view page_id, std::string_view command,
                    const InferenceConfig& config) const;

 private:
  std::shared_ptr<const ActionScorer> action_;
  std::shared_ptr<const MentionExtractor> mention_;
  std::shared_ptr<const ValueScorer> value_;
  InferenceConfig inference_;
  Provenance provenance_;
  NeuralActionScoring action_scoring_;
  NeuralMentionExtraction mention_extraction_;
  NeuralValueScoring value_scoring_;
};

enum class Component { action, mention, value };

struct RunOptions {
  /// Where checkpoints, history and manifests go. Completed components found
  /// here are loaded instead of retrained.
  std::optional<std::filesystem::path> run_dir;
  /// Components to train in this call. Others are loaded from `run_dir` when
  /// present and skipped otherwise.
  std::vector<Component> components{Component::action, Component::mention, Component::value};
  EpochCallback on_epoch;
};

struct TrainAllResult {
  std::shared_ptr<ModelBundle> bundle;  // null unless all three components exist
  std::vector<EpochRecord> history;     // epochs trained in this call
};

/// Trains action scorer, mention extractor and value scorer in that order,
/// each independently with its own best-valid selection. The value scorer
/// starts from a copy of the selected action scorer's word embedding.
/// Throws TrainingError on empty splits or a diverging component; checkpoints
/// already written are kept.
TrainAllResult train_all(const SchemaSet& schemas, const std::vector<Example>& train,
                         const std::vector<Example>& valid, const TrainingConfig& config,
                         const RunOptions& options = {});

struct Evaluation {
  std::vector<ParseResult> results;
  EvalReport report;
};

/// Parses every example on its page and scores the predictions.
Evaluation evaluate(const Scorers& scorers, const SchemaSet& schemas, const std::vector<Example>& examples,
                    const InferenceConfig& config);

struct TuneResult {
  InferenceConfig config;
  EvalReport report;
  std::size_t accepted_closed = 0;  // closed assignments made by the chosen config
};

/// Grid search over (rho, alpha) maximizing valid EMA; ties go to higher
/// PA-100, then lower rho, then lower alpha. Component scores are computed
/// once and replayed for every grid cell.
TuneResult tune_inference(const Scorers& scorers, const SchemaSet& schemas, const std::vector<Example>& valid,
                          const std::vector<double>& rho_grid, const std::vector<double>& alpha_grid,
                          const InferenceConfig& base = {});

}  // namespace flin
