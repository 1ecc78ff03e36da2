#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flin/action_scorer.hpp"
#include "flin/dataset.hpp"
#include "flin/mention_extractor.hpp"
#include "flin/schema.hpp"
#include "flin/value_scorer.hpp"

namespace flin {

struct InferenceConfig {
  double rho = 0.67;   // minimum net value score to accept a closed assignment
  double alpha = 0.4;  // weight of the action score in the candidate total
  /// Average rejected closed parameters into the parameter score as 0
  /// instead of leaving them out.
  bool count_rejected_as_zero = false;
};

nlohmann::ordered_json to_json(const InferenceConfig& c);
InferenceConfig inference_config_from_json(const nlohmann::json& j);

// Scoring interfaces consumed by the decision procedure. Implementations must
// be safe for concurrent const calls.

class ActionScoring {
 public:
  virtual ~ActionScoring() = default;
  virtual double action_score(std::string_view command, const ActionSchema& action) const = 0;
};

class MentionExtraction {
 public:
  virtual ~MentionExtraction() = default;
  virtual std::optional<MentionSpan> mention(std::string_view parameter, std::string_view command) const = 0;
};

class ValueScoring {
 public:
  virtual ~ValueScoring() = default;
  virtual double value_score(std::string_view mention, std::string_view value) const = 0;
  /// Net scores for every value of a domain; defaults to value_score per entry.
  virtual std::vector<double> value_scores(std::string_view mention, std::span<const std::string> domain) const;
};

struct Scorers {
  const ActionScoring& action;
  const MentionExtraction& mention;
  const ValueScoring& value;
};

enum class AssignmentStatus { no_mention, open, accepted, rejected };
std::string_view to_string(AssignmentStatus s);

struct ParameterOutcome {
  std::string parameter;
  AssignmentStatus status = AssignmentStatus::no_mention;
  std::optional<std::string> mention;
  std::string value;        // set for open / accepted
  double confidence = 0.0;  // 1 for open, best net score for accepted, 0 otherwise
  double best_score = 0.0;  // best net score over the domain (closed only)

  bool assigned() const { return status == AssignmentStatus::open || status == AssignmentStatus::accepted; }
};

/// Value assignment for one parameter given its (possibly absent) mention.
ParameterOutcome assign_parameter(const ValueScoring& values, const std::optional<MentionSpan>& mention,
                                  const ParameterSpec& parameter, const InferenceConfig& config);
ParameterOutcome assign_parameter(const ValueScoring& values, const MentionExtraction& mentions,
                                  const ParameterSpec& parameter, std::string_view command,
                                  const InferenceConfig& config);

struct CandidateTrace {
  std::string action;
  double action_score = 0.0;
  double param_score = 0.0;
  double total = 0.0;
  bool discarded = false;
  std::vector<ParameterOutcome> parameters;
};

struct ScoredPrediction {
  NavigationInstruction instruction;
  std::vector<double> confidences;  // aligned with instruction.assignments
  double action_score = 0.0;
  double param_score = 0.0;  // mean confidence; 0 for unparametrized actions
  double total = 0.0;
};

/// Combines the action score with the parameter outcomes. Returns nullopt when
/// a parametrized action has no assigned parameter. Unparametrized actions
/// score total = action_score.
std::optional<ScoredPrediction> score_candidate(double action_score, const ActionSchema& action,
                                                const std::vector<ParameterOutcome>& outcomes,
                                                const InferenceConfig& config, CandidateTrace* trace = nullptr);

struct ParseResult {
  std::string command;
  std::string page_id;
  std::optional<ScoredPrediction> prediction;
  std::vector<CandidateTrace> trace;
};

/// Scores every action of the page and keeps the highest total; ties go to the
/// higher action score, then to the earlier action in schema order.
/// Throws NotFoundError for an unknown page.
ParseResult parse(const Scorers& scorers, const SiteSchema& schema, std::string_view page_id,
                  std::string_view command, const InferenceConfig& config);

nlohmann::ordered_json to_json(const ParseResult& result);

// Adapters over the trained components. Action and value encodings are
// cached per text; caches are guarded for concurrent readers.

class NeuralActionScoring final : public ActionScoring {
 public:
  explicit NeuralActionScoring(const ActionScorer& scorer) : scorer_(scorer) {}
  double action_score(std::string_view command, const ActionSchema& action) const override;

 private:
  const ActionScorer& scorer_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::string, nn::Vector, std::less<>> commands_;
  mutable std::map<std::string, nn::Vector, std::less<>> actions_;
};

class NeuralMentionExtraction final : public MentionExtraction {
 public:
  explicit NeuralMentionExtraction(const MentionExtractor& extractor) : extractor_(extractor) {}
  std::optional<MentionSpan> mention(std::string_view parameter, std::string_view command) const override;

 private:
  const MentionExtractor& extractor_;
};

class NeuralValueScoring final : public ValueScoring {
 public:
  explicit NeuralValueScoring(const ValueScorer& scorer) : scorer_(scorer) {}
  double value_score(std::string_view mention, std::string_view value) const override;
  std::vector<double> value_scores(std::string_view mention, std::span<const std::string> domain) const override;

 private:
  const ValueScorer::Encoding& encoded(std::string_view text) const;

  const ValueScorer& scorer_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::string, ValueScorer::Encoding, std::less<>> cache_;
};

}  // namespace flin
