#include "flin/inference.hpp"

#include <mutex>

#include "flin/error.hpp"
#include "flin/text.hpp"

namespace flin {

nlohmann::ordered_json to_json(const InferenceConfig& c) {
  nlohmann::ordered_json j;
  j["rho"] = c.rho;
  j["alpha"] = c.alpha;
  j["count_rejected_as_zero"] = c.count_rejected_as_zero;
  return j;
}

InferenceConfig inference_config_from_json(const nlohmann::json& j) {
  InferenceConfig c;
  c.rho = j.value("rho", c.rho);
  c.alpha = j.value("alpha", c.alpha);
  c.count_rejected_as_zero = j.value("count_rejected_as_zero", c.count_rejected_as_zero);
  if (c.rho < 0.0 || c.rho > 1.0 || c.alpha < 0.0 || c.alpha > 1.0) {
    throw ValidationError("rho and alpha must lie in [0, 1]");
  }
  return c;
}

std::vector<double> ValueScoring::value_scores(std::string_view mention, std::span<const std::string> domain) const {
  std::vector<double> out;
  out.reserve(domain.size());
  for (const auto& v : domain) out.push_back(value_score(mention, v));
  return out;
}

std::string_view to_string(AssignmentStatus s) {
  switch (s) {
    case AssignmentStatus::no_mention: return "no_mention";
    case AssignmentStatus::open: return "open";
    case AssignmentStatus::accepted: return "accepted";
    case AssignmentStatus::rejected: return "rejected";
  }
  return "no_mention";
}

ParameterOutcome assign_parameter(const ValueScoring& values, const std::optional<MentionSpan>& mention,
                                  const ParameterSpec& parameter, const InferenceConfig& config) {
  ParameterOutcome out;
  out.parameter = parameter.name;
  if (!mention) return out;
  out.mention = mention->text;
  if (!parameter.is_closed()) {
    out.status = AssignmentStatus::open;
    out.value = mention->text;
    out.confidence = 1.0;
    return out;
  }
  const auto scores = values.value_scores(mention->text, parameter.domain);
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  out.best_score = scores[best];
  if (scores[best] >= config.rho) {
    out.status = AssignmentStatus::accepted;
    out.value = parameter.domain[best];
    out.confidence = scores[best];
  } else {
    out.status = AssignmentStatus::rejected;
  }
  return out;
}

ParameterOutcome assign_parameter(const ValueScoring& values, const MentionExtraction& mentions,
                                  const ParameterSpec& parameter, std::string_view command,
                                  const InferenceConfig& config) {
  return assign_parameter(values, mentions.mention(parameter.name, command), parameter, config);
}

std::optional<ScoredPrediction> score_candidate(double action_score, const ActionSchema& action,
                                                const std::vector<ParameterOutcome>& outcomes,
                                                const InferenceConfig& config, CandidateTrace* trace) {
  ScoredPrediction p;
  p.instruction.action = action.name;
  p.action_score = action_score;
  double sum = 0.0;
  std::size_t counted = 0;
  for (const auto& o : outcomes) {
    if (o.assigned()) {
      p.instruction.assignments.push_back({o.parameter, o.value});
      p.confidences.push_back(o.confidence);
      sum += o.confidence;
      ++counted;
    } else if (o.status == AssignmentStatus::rejected && config.count_rejected_as_zero) {
      ++counted;
    }
  }
  const bool discarded = action.is_parametrized() && p.instruction.assignments.empty();
  if (!action.is_parametrized()) {
    p.total = action_score;
  } else if (!discarded) {
    p.param_score = sum / static_cast<double>(counted);
    p.total = config.alpha * action_score + (1.0 - config.alpha) * p.param_score;
  }
  if (trace != nullptr) {
    trace->action = action.name;
    trace->action_score = action_score;
    trace->param_score = p.param_score;
    trace->total = discarded ? 0.0 : p.total;
    trace->discarded = discarded;
    trace->parameters = outcomes;
  }
  if (discarded) return std::nullopt;
  return p;
}

ParseResult parse(const Scorers& scorers, const SiteSchema& schema, std::string_view page_id,
                  std::string_view command, const InferenceConfig& config) {
  const auto& actions = actions_of(schema, page_id);
  ParseResult result;
  result.command = std::string(command);
  result.page_id = std::string(page_id);
  std::map<std::string, std::optional<MentionSpan>> mentions;
  for (const auto& action : actions) {
    std::vector<ParameterOutcome> outcomes;
    for (const auto& p : action.parameters) {
      const std::string key = text::normalize(p.name);
      auto it = mentions.find(key);
      if (it == mentions.end()) it = mentions.emplace(key, scorers.mention.mention(p.name, command)).first;
      outcomes.push_back(assign_parameter(scorers.value, it->second, p, config));
    }
    const double s_a = scorers.action.action_score(command, action);
    CandidateTrace trace;
    auto candidate = score_candidate(s_a, action, outcomes, config, &trace);
    result.trace.push_back(std::move(trace));
    if (!candidate) continue;
    const auto& best = result.prediction;
    if (!best || candidate->total > best->total ||
        (candidate->total == best->total && candidate->action_score > best->action_score)) {
      result.prediction = std::move(candidate);
    }
  }
  return result;
}

nlohmann::ordered_json to_json(const ParseResult& result) {
  nlohmann::ordered_json j;
  j["command"] = result.command;
  j["page_id"] = result.page_id;
  if (result.prediction) {
    const auto& p = *result.prediction;
    nlohmann::ordered_json assignments = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < p.instruction.assignments.size(); ++i) {
      assignments.push_back({{"parameter", p.instruction.assignments[i].parameter},
                             {"value", p.instruction.assignments[i].value},
                             {"confidence", p.confidences[i]}});
    }
    j["prediction"] = {{"action", p.instruction.action},
                       {"assignments", std::move(assignments)},
                       {"action_score", p.action_score},
                       {"total", p.total}};
  } else {
    j["prediction"] = nullptr;
  }
  nlohmann::ordered_json trace = nlohmann::ordered_json::array();
  for (const auto& t : result.trace) {
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (const auto& o : t.parameters) {
      nlohmann::ordered_json pj;
      pj["parameter"] = o.parameter;
      pj["status"] = std::string(to_string(o.status));
      pj["mention"] = o.mention ? nlohmann::ordered_json(*o.mention) : nlohmann::ordered_json(nullptr);
      pj["value"] = o.assigned() ? nlohmann::ordered_json(o.value) : nlohmann::ordered_json(nullptr);
      pj["confidence"] = o.confidence;
      pj["best_score"] = o.best_score;
      params.push_back(std::move(pj));
    }
    trace.push_back({{"action", t.action},
                     {"action_score", t.action_score},
                     {"param_score", t.param_score},
                     {"total", t.total},
                     {"discarded", t.discarded},
                     {"parameters", std::move(params)}});
  }
  j["trace"] = std::move(trace);
  return j;
}

namespace {

constexpr std::size_t kCommandCacheLimit = 256;

}  // namespace

double NeuralActionScoring::action_score(std::string_view command, const ActionSchema& action) const {
  const std::string action_key = action.page + '\x1f' + action.name;
  nn::Vector c;
  nn::Vector a;
  {
    std::shared_lock lock(mutex_);
    if (auto it = commands_.find(command); it != commands_.end()) c = it->second;
    if (auto it = actions_.find(action_key); it != actions_.end()) a = it->second;
  }
  if (c.size() == 0) {
    c = scorer_.encode_command(command);
    std::unique_lock lock(mutex_);
    if (commands_.size() >= kCommandCacheLimit) commands_.clear();
    commands_.emplace(std::string(command), c);
  }
  if (a.size() == 0) {
    a = scorer_.encode_action(action);
    std::unique_lock lock(mutex_);
    actions_.emplace(action_key, a);
  }
  return ActionScorer::score(c, a);
}

std::optional<MentionSpan> NeuralMentionExtraction::mention(std::string_view parameter,
                                                            std::string_view command) const {
  return extractor_.extract(parameter, command).span;
}

const ValueScorer::Encoding& NeuralValueScoring::encoded(std::string_view text) const {
  {
    std::shared_lock lock(mutex_);
    if (auto it = cache_.find(text); it != cache_.end()) return it->second;
  }
  auto enc = scorer_.encode(text);
  std::unique_lock lock(mutex_);
  return cache_.emplace(std::string(text), std::move(enc)).first->second;
}

double NeuralValueScoring::value_score(std::string_view mention, std::string_view value) const {
  return scorer_.score(scorer_.encode(mention), encoded(value), mention, value).net;
}

std::vector<double> NeuralValueScoring::value_scores(std::string_view mention,
                                                     std::span<const std::string> domain) const {
  const auto m = scorer_.encode(mention);
  std::vector<double> out;
  out.reserve(domain.size());
  for (const auto& v : domain) out.push_back(scorer_.score(m, encoded(v), mention, v).net);
  return out;
}

}  // namespace flin
