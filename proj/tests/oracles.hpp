#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "flin/dataset.hpp"
#include "flin/inference.hpp"
#include "flin/schema.hpp"

namespace flin::testing {

/// Scorers answering from lookup tables. Missing entries score 0.
struct TableScorers final : ActionScoring, MentionExtraction, ValueScoring {
  std::map<std::string, double> action_scores;
  std::map<std::string, std::string> mentions;  // parameter -> mention text
  std::map<std::pair<std::string, std::string>, double> value_table;
  mutable std::atomic<int> mention_calls{0};

  double action_score(std::string_view, const ActionSchema& action) const override {
    auto it = action_scores.find(action.name);
    return it == action_scores.end() ? 0.0 : it->second;
  }
  std::optional<MentionSpan> mention(std::string_view parameter, std::string_view) const override {
    ++mention_calls;
    auto it = mentions.find(std::string(parameter));
    if (it == mentions.end()) return std::nullopt;
    return MentionSpan{std::string(parameter), 0, it->second.size(), it->second};
  }
  double value_score(std::string_view mention, std::string_view value) const override {
    auto it = value_table.find({std::string(mention), std::string(value)});
    return it == value_table.end() ? 0.0 : it->second;
  }
  Scorers scorers() const { return Scorers{*this, *this, *this}; }
};

struct OracleCandidate {
  std::size_t index = 0;
  std::string action;
  std::set<std::pair<std::string, std::string>> assignments;
  double action_score = 0.0;
  double total = 0.0;
};

/// Enumerates every action on the page, thresholds each closed parameter's
/// best value at rho, averages assigned confidences and combines with alpha.
inline std::optional<OracleCandidate> brute_force(const TableScorers& t, const std::vector<ActionSchema>& actions,
                                                  double rho, double alpha) {
  std::vector<OracleCandidate> kept;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    const auto& a = actions[i];
    OracleCandidate c;
    c.index = i;
    c.action = a.name;
    c.action_score = t.action_score("", a);
    std::vector<double> confidences;
    for (const auto& p : a.parameters) {
      auto m = t.mentions.find(p.name);
      if (m == t.mentions.end()) continue;
      if (p.kind == ParameterKind::open) {
        c.assignments.insert({p.name, m->second});
        confidences.push_back(1.0);
        continue;
      }
      double best = -1.0;
      std::string best_value;
      for (const auto& v : p.domain) {
        const double s = t.value_score(m->second, v);
        if (s > best) {
          best = s;
          best_value = v;
        }
      }
      if (best >= rho) {
        c.assignments.insert({p.name, best_value});
        confidences.push_back(best);
      }
    }
    if (a.parameters.empty()) {
      c.total = c.action_score;
    } else if (confidences.empty()) {
      continue;
    } else {
      double sum = 0.0;
      for (double x : confidences) sum += x;
      c.total = alpha * c.action_score + (1.0 - alpha) * (sum / static_cast<double>(confidences.size()));
    }
    kept.push_back(c);
  }
  if (kept.empty()) return std::nullopt;
  std::stable_sort(kept.begin(), kept.end(), [](const OracleCandidate& x, const OracleCandidate& y) {
    if (x.total != y.total) return x.total > y.total;
    if (x.action_score != y.action_score) return x.action_score > y.action_score;
    return x.index < y.index;
  });
  return kept.front();
}

struct RandomCase {
  SiteSchema site;
  TableScorers tables;
  InferenceConfig config;
};

/// Up to 5 actions, 3 parameters per action and 10 values per domain. Scores
/// come from a coarse grid so exact ties occur.
inline void fill_random_case(RandomCase& rc, std::mt19937_64& rng) {
  auto grid = [&](int steps) { return static_cast<double>(std::uniform_int_distribution<int>(0, steps)(rng)) / steps; };
  auto below = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };
  const std::vector<std::string> names = {"time", "date", "people", "cuisine", "city"};
  const std::vector<std::string> mentions = {"at 7", "tonight", "two of us", "thai", "boston", "soon"};
  rc.site = SiteSchema{};
  rc.site.site_id = "random";
  Page page{"p", {}};
  const int n_actions = 1 + below(5);
  std::set<std::pair<std::string, std::string>> value_keys;
  for (int a = 0; a < n_actions; ++a) {
    ActionSchema act;
    act.name = "action " + std::to_string(a);
    act.page = "p";
    std::vector<std::string> pool = names;
    std::shuffle(pool.begin(), pool.end(), rng);
    const int n_params = below(4);
    for (int k = 0; k < n_params; ++k) {
      ParameterSpec p;
      p.name = pool[k];
      if (below(3) == 0) {
        p.kind = ParameterKind::open;
      } else {
        p.kind = ParameterKind::closed;
        const int n_values = 1 + below(10);
        for (int v = 0; v < n_values; ++v) p.domain.push_back(p.name + " value " + std::to_string(below(12)));
        std::sort(p.domain.begin(), p.domain.end());
        p.domain.erase(std::unique(p.domain.begin(), p.domain.end()), p.domain.end());
      }
      act.parameters.push_back(std::move(p));
    }
    page.actions.push_back(std::move(act));
  }
  rc.site.pages.push_back(std::move(page));
  rc.tables.action_scores.clear();
  rc.tables.mentions.clear();
  rc.tables.value_table.clear();
  for (const auto& a : rc.site.pages[0].actions) rc.tables.action_scores[a.name] = grid(10);
  for (const auto& n : names) {
    if (below(4) != 0) rc.tables.mentions[n] = mentions[below(static_cast<int>(mentions.size()))];
  }
  for (const auto& a : rc.site.pages[0].actions) {
    for (const auto& p : a.parameters) {
      for (const auto& v : p.domain) {
        for (const auto& m : mentions) rc.tables.value_table[{m, v}] = grid(20);
      }
    }
  }
  const double rhos[] = {0.0, 0.3, 0.5, 0.67, 0.8, 1.0};
  const double alphas[] = {0.0, 0.25, 0.4, 0.5, 0.75, 1.0};
  rc.config.rho = rhos[below(6)];
  rc.config.alpha = alphas[below(6)];
}

inline std::set<std::pair<std::string, std::string>> assignment_set(const NavigationInstruction& n) {
  std::set<std::pair<std::string, std::string>> s;
  for (const auto& a : n.assignments) s.insert({a.parameter, a.value});
  return s;
}

/// Empty string when parse and the oracle agree, otherwise a description.
inline std::string compare_with_oracle(const RandomCase& rc) {
  const auto got = parse(rc.tables.scorers(), rc.site, "p", "command", rc.config);
  const auto want = brute_force(rc.tables, rc.site.pages[0].actions, rc.config.rho, rc.config.alpha);
  if (got.prediction.has_value() != want.has_value()) {
    return want ? "parse discarded every candidate, oracle chose " + want->action : "oracle discarded every candidate";
  }
  if (!want) return {};
  const auto& p = *got.prediction;
  if (p.instruction.action != want->action) return "action " + p.instruction.action + " != " + want->action;
  if (assignment_set(p.instruction) != want->assignments) return "assignments differ for " + want->action;
  if (std::abs(p.total - want->total) > 1e-12) return "total differs for " + want->action;
  return {};
}

inline NavigationInstruction nav(std::string action, std::vector<ValueAssignment> assignments) {
  return NavigationInstruction{std::move(action), std::move(assignments)};
}

/// Ten gold/prediction pairs with per-example precision/recall worked out by
/// hand (numerator, denominator).
struct MetricsFixture {
  std::vector<std::pair<NavigationInstruction, std::optional<NavigationInstruction>>> pairs;
  // Per-example (P, R) as exact fractions.
  std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> pr;
  int action_correct = 0;
  int exact = 0;
  int full_precision = 0;
};

inline MetricsFixture metrics_fixture() {
  MetricsFixture f;
  auto add = [&](NavigationInstruction g, std::optional<NavigationInstruction> p, std::pair<int, int> prec,
                 std::pair<int, int> rec) {
    f.pairs.emplace_back(std::move(g), std::move(p));
    f.pr.push_back({prec, rec});
  };
  // 1. exact
  add(nav("let's go", {{"time", "18:00"}, {"people", "2 people"}}),
      nav("let's go", {{"people", "2 people"}, {"time", "18:00"}}), {1, 1}, {1, 1});
  // 2. one of two predicted, correct
  add(nav("let's go", {{"time", "18:00"}, {"people", "2 people"}}), nav("let's go", {{"time", "18:00"}}), {1, 1},
      {1, 2});
  // 3. wrong action
  add(nav("let's go", {{"time", "18:00"}}), nav("sign in", {}), {0, 1}, {0, 1});
  // 4. nothing predicted
  add(nav("let's go", {{"time", "18:00"}}), std::nullopt, {0, 1}, {0, 1});
  // 5. one right, one wrong value
  add(nav("let's go", {{"time", "20:00"}, {"date", "today"}}),
      nav("let's go", {{"time", "18:00"}, {"date", "today"}}), {1, 2}, {1, 2});
  // 6. unparametrized, correct
  add(nav("sign in", {}), nav("sign in", {}), {1, 1}, {1, 1});
  // 7. correct action, empty prediction list, one gold parameter
  add(nav("let's go", {{"date", "today"}}), nav("let's go", {}), {1, 1}, {0, 1});
  // 8. extra predicted parameter
  add(nav("let's go", {{"date", "today"}}), nav("let's go", {{"date", "today"}, {"people", "1 person"}}), {1, 2},
      {1, 1});
  // 9. three gold, two right and one wrong predicted
  add(nav("let's go", {{"date", "today"}, {"time", "19:00"}, {"cuisine", "thai"}}),
      nav("let's go", {{"date", "today"}, {"time", "19:00"}, {"cuisine", "sushi"}}), {2, 3}, {2, 3});
  // 10. case and spacing differences only
  add(nav("let's go", {{"cuisine", "Thai  Food"}}), nav("Let's Go", {{"cuisine", "thai food"}}), {1, 1}, {1, 1});
  // Actions correct everywhere except 3 and 4; exact matches 1, 6, 10;
  // precision 1 with correct action: 1, 2, 6, 7, 10.
  f.action_correct = 8;
  f.exact = 3;
  f.full_precision = 5;
  return f;
}

}  // namespace flin::testing
