#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flin/schema.hpp"

namespace flin {

struct ValueAssignment {
  std::string parameter;
  std::string value;
  bool operator==(const ValueAssignment&) const = default;
};

struct NavigationInstruction {
  std::string action;
  std::vector<ValueAssignment> assignments;

  const ValueAssignment* find(std::string_view parameter) const;
  bool operator==(const NavigationInstruction&) const = default;
};

/// Byte offsets into the command; text == command.substr(start, end - start).
struct MentionSpan {
  std::string parameter;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;
  bool operator==(const MentionSpan&) const = default;
};

struct Example {
  std::string command;
  std::string site_id;
  std::string page_id;
  NavigationInstruction gold;
  std::vector<MentionSpan> mentions;

  const MentionSpan* mention_for(std::string_view parameter) const;
  bool operator==(const Example&) const = default;
};

struct CommandTemplate {
  std::string page_id;
  std::string action;
  std::string text;                       // contains "[param name]" placeholders
  std::vector<std::string> placeholders;  // in order of appearance
};

/// Parses the placeholders of `text`. Throws ValidationError on an
/// unterminated bracket or a repeated placeholder.
CommandTemplate make_template(std::string page_id, std::string action, std::string text);

struct ParaphraseTable {
  // parameter name -> domain value -> paraphrases
  std::map<std::string, std::map<std::string, std::vector<std::string>>> closed;
  // parameter name -> example values
  std::map<std::string, std::vector<std::string>> open;
};

/// Structural checks against a schema: action/page exist, assignment
/// parameters belong to the action, closed values are in the domain,
/// mention spans match the command. Throws ValidationError.
void validate_example(const Example& example, const SiteSchema& schema);
/// Schema-free checks: span bounds and text, distinct parameters.
void validate_example(const Example& example);

/// Instantiates `count` examples from templates with uniformly chosen
/// paraphrases. Pure function of its arguments.
std::vector<Example> generate(const SiteSchema& schema, const std::vector<CommandTemplate>& templates,
                              const ParaphraseTable& paraphrases, std::size_t count, std::uint64_t rng_seed);

struct Split {
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;
};

/// Shuffled disjoint split. valid/test sizes are round(n * ratio), train takes
/// the remainder. With fewer examples than buckets, surplus goes to train,
/// then valid, then test.
Split split(const std::vector<Example>& examples, std::array<double, 3> ratios, std::uint64_t rng_seed);

nlohmann::ordered_json to_json(const Example& example);
Example example_from_json(const nlohmann::json& j);

void save_examples(const std::vector<Example>& examples, const std::filesystem::path& path);
/// Throws ParseError("<path>:<line>: ...") for malformed lines. When a schema
/// is given every example is validated against it.
std::vector<Example> load_examples(const std::filesystem::path& path, const SiteSchema* schema = nullptr);

std::vector<CommandTemplate> load_templates(const std::filesystem::path& path);
ParaphraseTable load_paraphrases(const std::filesystem::path& path);

}  // namespace flin
