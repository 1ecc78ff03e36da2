#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "flin/dataset.hpp"
#include "flin/schema.hpp"

namespace flin {

enum class ErrorClass {
  action_not_predicted,
  action_mispredicted,
  closed_param_missed,
  closed_value_mispredicted,
  open_value_mispredicted,
};

std::string_view to_string(ErrorClass e);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

struct EvalReport {
  double a_acc = 0.0;
  double p_f1 = 0.0;
  double ema = 0.0;
  double pa100 = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  std::size_t n = 0;
  std::map<ErrorClass, std::size_t> error_counts;
};

using EvalPair = std::pair<NavigationInstruction, std::optional<NavigationInstruction>>;

/// Parameter precision/recall of one prediction. A wrong or missing action
/// gives (0, 0); an empty predicted list has vacuous precision 1.
PrecisionRecall per_example_pr(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred);

/// True when actions match and the assignment sets are equal (order-free).
bool exact_match(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred);

/// A-acc, P-F1 (F1 of the averaged precision and recall), EMA and PA-100.
/// Throws ValidationError for empty input. Error counts are left empty.
EvalReport report(const std::vector<EvalPair>& pairs);

/// Same metrics plus per-class error counts; `schemas` resolves each
/// example's parameter kinds. `pairs[i]` belongs to `examples[i]`.
EvalReport report(const std::vector<EvalPair>& pairs, const std::vector<Example>& examples, const SchemaSet& schemas);

std::set<ErrorClass> classify_errors(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred,
                                     const ActionSchema& gold_action);

nlohmann::ordered_json to_json(const EvalReport& r);
/// Plain-text table with columns A-acc, P-F1, EMA, PA-100.
std::string format_table(const EvalReport& r, const std::string& label);

}  // namespace flin
