#include "flin/evaluation.hpp"

#include <cstdio>
#include <sstream>

#include "flin/error.hpp"
#include "flin/text.hpp"

namespace flin {

namespace {

using AssignmentKey = std::pair<std::string, std::string>;

std::set<AssignmentKey> keys(const NavigationInstruction& n) {
  std::set<AssignmentKey> out;
  for (const auto& a : n.assignments) out.emplace(text::normalize(a.parameter), text::normalize(a.value));
  return out;
}

bool same_action(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred) {
  return pred && text::normalize(pred->action) == text::normalize(gold.action);
}

}  // namespace

std::string_view to_string(ErrorClass e) {
  switch (e) {
    case ErrorClass::action_not_predicted: return "action_not_predicted";
    case ErrorClass::action_mispredicted: return "action_mispredicted";
    case ErrorClass::closed_param_missed: return "closed_param_missed";
    case ErrorClass::closed_value_mispredicted: return "closed_value_mispredicted";
    case ErrorClass::open_value_mispredicted: return "open_value_mispredicted";
  }
  return "action_not_predicted";
}

PrecisionRecall per_example_pr(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred) {
  if (!same_action(gold, pred)) return {0.0, 0.0};
  const auto g = keys(gold);
  const auto p = keys(*pred);
  std::size_t correct = 0;
  for (const auto& k : p) correct += g.count(k);
  PrecisionRecall pr;
  pr.precision = p.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(p.size());
  pr.recall = g.empty() ? 1.0 : static_cast<double>(correct) / static_cast<double>(g.size());
  return pr;
}

bool exact_match(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred) {
  return same_action(gold, pred) && keys(gold) == keys(*pred);
}

EvalReport report(const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw ValidationError("cannot evaluate an empty prediction set");
  EvalReport r;
  r.n = pairs.size();
  std::size_t actions = 0;
  std::size_t exact = 0;
  std::size_t pa100 = 0;
  double p_sum = 0.0;
  double r_sum = 0.0;
  for (const auto& [gold, pred] : pairs) {
    const bool action_ok = same_action(gold, pred);
    const auto pr = per_example_pr(gold, pred);
    actions += action_ok ? 1 : 0;
    exact += exact_match(gold, pred) ? 1 : 0;
    pa100 += (action_ok && pr.precision == 1.0) ? 1 : 0;
    p_sum += pr.precision;
    r_sum += pr.recall;
  }
  const double n = static_cast<double>(r.n);
  r.a_acc = static_cast<double>(actions) / n;
  r.ema = static_cast<double>(exact) / n;
  r.pa100 = static_cast<double>(pa100) / n;
  r.mean_precision = p_sum / n;
  r.mean_recall = r_sum / n;
  const double denom = r.mean_precision + r.mean_recall;
  r.p_f1 = denom == 0.0 ? 0.0 : 2.0 * r.mean_precision * r.mean_recall / denom;
  return r;
}

EvalReport report(const std::vector<EvalPair>& pairs, const std::vector<Example>& examples, const SchemaSet& schemas) {
  if (pairs.size() != examples.size()) throw ValidationError("pairs and examples differ in length");
  EvalReport r = report(pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& ex = examples[i];
    const ActionSchema* action = schemas.site(ex.site_id).find_action(ex.page_id, pairs[i].first.action);
    if (action == nullptr) throw ValidationError("gold action \"" + pairs[i].first.action + "\" missing from schema");
    for (ErrorClass e : classify_errors(pairs[i].first, pairs[i].second, *action)) ++r.error_counts[e];
  }
  return r;
}

std::set<ErrorClass> classify_errors(const NavigationInstruction& gold, const std::optional<NavigationInstruction>& pred,
                                     const ActionSchema& gold_action) {
  if (!pred) return {ErrorClass::action_not_predicted};
  if (!same_action(gold, pred)) return {ErrorClass::action_mispredicted};
  std::set<ErrorClass> out;
  for (const auto& a : gold.assignments) {
    const ParameterSpec* spec = gold_action.find_parameter(a.parameter);
    const ValueAssignment* got = pred->find(a.parameter);
    const bool correct = got != nullptr && text::normalize(got->value) == text::normalize(a.value);
    if (correct) continue;
    if (spec != nullptr && spec->is_closed()) {
      out.insert(got == nullptr ? ErrorClass::closed_param_missed : ErrorClass::closed_value_mispredicted);
    } else {
      out.insert(ErrorClass::open_value_mispredicted);
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["a_acc"] = r.a_acc;
  j["p_f1"] = r.p_f1;
  j["ema"] = r.ema;
  j["pa100"] = r.pa100;
  j["mean_precision"] = r.mean_precision;
  j["mean_recall"] = r.mean_recall;
  nlohmann::ordered_json errors = nlohmann::ordered_json::object();
  for (ErrorClass e : {ErrorClass::action_not_predicted, ErrorClass::action_mispredicted,
                       ErrorClass::closed_param_missed, ErrorClass::closed_value_mispredicted,
                       ErrorClass::open_value_mispredicted}) {
    auto it = r.error_counts.find(e);
    errors[std::string(to_string(e))] = it == r.error_counts.end() ? 0 : it->second;
  }
  j["error_counts"] = std::move(errors);
  return j;
}

std::string format_table(const EvalReport& r, const std::string& label) {
  char row[256];
  std::ostringstream out;
  std::snprintf(row, sizeof(row), "%-24s %8s %8s %8s %8s\n", "", "A-acc", "P-F1", "EMA", "PA-100");
  out << row;
  std::snprintf(row, sizeof(row), "%-24s %8.3f %8.3f %8.3f %8.3f\n", label.c_str(), r.a_acc, r.p_f1, r.ema, r.pa100);
  out << row;
  return out.str();
}

}  // namespace flin
