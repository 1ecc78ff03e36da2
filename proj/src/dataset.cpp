#include "flin/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "flin/error.hpp"
#include "flin/text.hpp"

namespace flin {

const ValueAssignment* NavigationInstruction::find(std::string_view parameter) const {
  const std::string key = text::normalize(parameter);
  for (const auto& a : assignments) {
    if (text::normalize(a.parameter) == key) return &a;
  }
  return nullptr;
}

const MentionSpan* Example::mention_for(std::string_view parameter) const {
  const std::string key = text::normalize(parameter);
  for (const auto& m : mentions) {
    if (text::normalize(m.parameter) == key) return &m;
  }
  return nullptr;
}

CommandTemplate make_template(std::string page_id, std::string action, std::string text) {
  CommandTemplate t{std::move(page_id), std::move(action), std::move(text), {}};
  std::set<std::string> seen;
  std::size_t i = 0;
  while ((i = t.text.find('[', i)) != std::string::npos) {
    const std::size_t close = t.text.find(']', i);
    if (close == std::string::npos) throw ValidationError("template \"" + t.text + "\": unterminated placeholder");
    std::string name = t.text.substr(i + 1, close - i - 1);
    if (!seen.insert(text::normalize(name)).second) {
      throw ValidationError("template \"" + t.text + "\": placeholder [" + name + "] occurs twice");
    }
    t.placeholders.push_back(std::move(name));
    i = close + 1;
  }
  return t;
}

void validate_example(const Example& example) {
  std::set<std::string> params;
  for (const auto& a : example.gold.assignments) {
    if (!params.insert(text::normalize(a.parameter)).second) {
      throw ValidationError("duplicate assignment for parameter \"" + a.parameter + "\"");
    }
  }
  for (const auto& m : example.mentions) {
    if (!(m.start < m.end && m.end <= example.command.size())) {
      throw ValidationError("mention for \"" + m.parameter + "\" has out-of-range offsets");
    }
    if (example.command.compare(m.start, m.end - m.start, m.text) != 0) {
      throw ValidationError("mention text \"" + m.text + "\" does not equal command[" + std::to_string(m.start) +
                            ":" + std::to_string(m.end) + "]");
    }
  }
}

void validate_example(const Example& example, const SiteSchema& schema) {
  validate_example(example);
  const ActionSchema* action = schema.find_action(example.page_id, example.gold.action);
  if (action == nullptr) {
    throw ValidationError("action \"" + example.gold.action + "\" not on page \"" + example.page_id + "\"");
  }
  for (const auto& a : example.gold.assignments) {
    const ParameterSpec* p = action->find_parameter(a.parameter);
    if (p == nullptr) throw ValidationError("parameter \"" + a.parameter + "\" not in action \"" + action->name + "\"");
    if (p->is_closed()) {
      const std::string key = text::normalize(a.value);
      const bool in_domain = std::any_of(p->domain.begin(), p->domain.end(),
                                         [&](const std::string& v) { return text::normalize(v) == key; });
      if (!in_domain) throw ValidationError("value \"" + a.value + "\" not in domain of \"" + p->name + "\"");
    }
  }
}

namespace {

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

const std::vector<std::string>* find_open(const ParaphraseTable& table, const std::string& param) {
  const std::string key = text::normalize(param);
  for (const auto& [name, values] : table.open) {
    if (text::normalize(name) == key) return &values;
  }
  return nullptr;
}

const std::map<std::string, std::vector<std::string>>* find_closed(const ParaphraseTable& table,
                                                                   const std::string& param) {
  const std::string key = text::normalize(param);
  for (const auto& [name, values] : table.closed) {
    if (text::normalize(name) == key) return &values;
  }
  return nullptr;
}

// Per placeholder: the (domain value, paraphrase) candidates it may draw from.
struct Choice {
  std::string value;
  std::vector<std::string> surface;
};

struct Slot {
  const ParameterSpec* param;
  std::vector<Choice> choices;
};

}  // namespace

std::vector<Example> generate(const SiteSchema& schema, const std::vector<CommandTemplate>& templates,
                              const ParaphraseTable& paraphrases, std::size_t count, std::uint64_t rng_seed) {
  if (count == 0) throw ValidationError("count must be positive");
  if (templates.empty()) throw ValidationError("no templates given");

  // Resolve every template once so coverage errors surface before sampling.
  std::vector<std::vector<Slot>> slots(templates.size());
  std::vector<const ActionSchema*> actions(templates.size());
  for (std::size_t t = 0; t < templates.size(); ++t) {
    const auto& tpl = templates[t];
    actions[t] = schema.find_action(tpl.page_id, tpl.action);
    if (actions[t] == nullptr) {
      throw ValidationError("template \"" + tpl.text + "\": action \"" + tpl.action + "\" not on page \"" +
                            tpl.page_id + "\"");
    }
    for (const auto& ph : tpl.placeholders) {
      const ParameterSpec* p = actions[t]->find_parameter(ph);
      if (p == nullptr) {
        throw ValidationError("template \"" + tpl.text + "\": [" + ph + "] is not a parameter of \"" +
                              actions[t]->name + "\"");
      }
      Slot slot{p, {}};
      if (p->is_closed()) {
        const auto* table = find_closed(paraphrases, p->name);
        if (table == nullptr) throw ValidationError("no paraphrases for closed parameter \"" + p->name + "\"");
        for (const auto& [value, surface] : *table) {
          const std::string key = text::normalize(value);
          auto it = std::find_if(p->domain.begin(), p->domain.end(),
                                 [&](const std::string& v) { return text::normalize(v) == key; });
          if (it == p->domain.end()) {
            throw ValidationError("paraphrase key \"" + value + "\" is not in the domain of \"" + p->name + "\"");
          }
          if (surface.empty()) {
            throw ValidationError("empty paraphrase list for \"" + p->name + "\" = \"" + value + "\"");
          }
          slot.choices.push_back(Choice{*it, surface});
        }
        if (slot.choices.empty()) throw ValidationError("no paraphrases for closed parameter \"" + p->name + "\"");
      } else {
        const auto* values = find_open(paraphrases, p->name);
        if (values == nullptr || values->empty()) {
          throw ValidationError("no example values for open parameter \"" + p->name + "\"");
        }
        for (const auto& v : *values) slot.choices.push_back(Choice{v, {v}});
      }
      slots[t].push_back(std::move(slot));
    }
  }

  std::mt19937_64 rng(rng_seed);
  std::vector<Example> out;
  out.reserve(count);
  std::uniform_int_distribution<std::size_t> pick_template(0, templates.size() - 1);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t t = pick_template(rng);
    const auto& tpl = templates[t];
    Example ex;
    ex.site_id = schema.site_id;
    ex.page_id = tpl.page_id;
    ex.gold.action = actions[t]->name;

    std::size_t cursor = 0;
    std::size_t slot_index = 0;
    while (cursor < tpl.text.size()) {
      const std::size_t open = tpl.text.find('[', cursor);
      if (open == std::string::npos) {
        ex.command += tpl.text.substr(cursor);
        break;
      }
      ex.command += tpl.text.substr(cursor, open - cursor);
      const std::size_t close = tpl.text.find(']', open);
      const Slot& slot = slots[t][slot_index++];
      const Choice& choice = pick(slot.choices, rng);
      const std::string& surface = pick(choice.surface, rng);
      MentionSpan span{slot.param->name, ex.command.size(), ex.command.size() + surface.size(), surface};
      ex.command += surface;
      ex.gold.assignments.push_back(ValueAssignment{slot.param->name, choice.value});
      ex.mentions.push_back(std::move(span));
      cursor = close + 1;
    }
    validate_example(ex, schema);
    out.push_back(std::move(ex));
  }
  return out;
}

Split split(const std::vector<Example>& examples, std::array<double, 3> ratios, std::uint64_t rng_seed) {
  if (examples.empty()) throw ValidationError("cannot split an empty dataset");
  for (double r : ratios) {
    if (!(r > 0.0)) throw ValidationError("split ratios must be positive");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");

  const std::size_t n = examples.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(rng_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::size_t n_valid = 0;
  std::size_t n_test = 0;
  if (n < 3) {
    n_valid = n >= 2 ? 1 : 0;
  } else {
    n_valid = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[1]));
    n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratios[2]));
    while (n_valid + n_test > n) (n_test > 0 ? n_test : n_valid)--;
  }
  const std::size_t n_train = n - n_valid - n_test;

  Split s;
  for (std::size_t i = 0; i < n; ++i) {
    const Example& ex = examples[order[i]];
    if (i < n_train) {
      s.train.push_back(ex);
    } else if (i < n_train + n_valid) {
      s.valid.push_back(ex);
    } else {
      s.test.push_back(ex);
    }
  }
  return s;
}

nlohmann::ordered_json to_json(const Example& example) {
  nlohmann::ordered_json j;
  j["command"] = example.command;
  j["site_id"] = example.site_id;
  j["page_id"] = example.page_id;
  nlohmann::ordered_json assignments = nlohmann::ordered_json::array();
  for (const auto& a : example.gold.assignments) {
    assignments.push_back({{"parameter", a.parameter}, {"value", a.value}});
  }
  j["gold"] = {{"action", example.gold.action}, {"assignments", std::move(assignments)}};
  nlohmann::ordered_json mentions = nlohmann::ordered_json::array();
  for (const auto& m : example.mentions) {
    mentions.push_back({{"parameter", m.parameter}, {"start", m.start}, {"end", m.end}, {"text", m.text}});
  }
  j["mentions"] = std::move(mentions);
  return j;
}

Example example_from_json(const nlohmann::json& j) {
  auto need = [&](const nlohmann::json& obj, const char* key) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(std::string("missing key \"") + key + "\"");
    return obj.at(key);
  };
  try {
    Example ex;
    ex.command = need(j, "command").get<std::string>();
    ex.site_id = need(j, "site_id").get<std::string>();
    ex.page_id = need(j, "page_id").get<std::string>();
    const auto& gold = need(j, "gold");
    ex.gold.action = need(gold, "action").get<std::string>();
    for (const auto& a : need(gold, "assignments")) {
      ex.gold.assignments.push_back({need(a, "parameter").get<std::string>(), need(a, "value").get<std::string>()});
    }
    for (const auto& m : need(j, "mentions")) {
      ex.mentions.push_back(MentionSpan{need(m, "parameter").get<std::string>(), need(m, "start").get<std::size_t>(),
                                        need(m, "end").get<std::size_t>(), need(m, "text").get<std::string>()});
    }
    return ex;
  } catch (const nlohmann::json::type_error& e) {
    throw ParseError(std::string("wrong field type: ") + e.what());
  }
}

void save_examples(const std::vector<Example>& examples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

std::vector<Example> load_examples(const std::filesystem::path& path, const SiteSchema* schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Example> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      Example ex = example_from_json(nlohmann::json::parse(line));
      if (schema != nullptr) {
        validate_example(ex, *schema);
      } else {
        validate_example(ex);
      }
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return out;
}

std::vector<CommandTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<CommandTemplate> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(make_template(j.at("page_id").get<std::string>(), j.at("action").get<std::string>(),
                                  j.at("text").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return out;
}

ParaphraseTable load_paraphrases(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    ParaphraseTable table;
    if (j.contains("closed")) {
      table.closed = j.at("closed").get<std::map<std::string, std::map<std::string, std::vector<std::string>>>>();
    }
    if (j.contains("open")) table.open = j.at("open").get<std::map<std::string, std::vector<std::string>>>();
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace flin
