#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace flin {

enum class ParameterKind { closed, open };

struct ParameterSpec {
  std::string name;
  ParameterKind kind = ParameterKind::open;
  std::vector<std::string> domain;  // closed kind only
  std::optional<std::string> description;

  bool is_closed() const { return kind == ParameterKind::closed; }
  bool operator==(const ParameterSpec&) const = default;
};

struct ActionSchema {
  std::string name;
  std::vector<ParameterSpec> parameters;
  std::string page;

  bool is_parametrized() const { return !parameters.empty(); }
  const ParameterSpec* find_parameter(std::string_view name) const;
  bool operator==(const ActionSchema&) const = default;
};

enum class DomainTag { restaurants, hotels, shopping, other };

std::string_view to_string(DomainTag tag);
DomainTag domain_tag_from_string(std::string_view s);

struct Page {
  std::string id;
  std::vector<ActionSchema> actions;
  bool operator==(const Page&) const = default;
};

/// Action space of one website. Pages keep file order; immutable after load.
struct SiteSchema {
  std::string site_id;
  DomainTag domain_tag = DomainTag::other;
  std::vector<Page> pages;

  const Page* find_page(std::string_view page_id) const;
  const ActionSchema* find_action(std::string_view page_id, std::string_view action) const;
  bool operator==(const SiteSchema&) const = default;
};

/// Throws ValidationError naming the first violated invariant.
void validate(const SiteSchema& schema);

/// Parses and validates a schema document. Throws ParseError on malformed
/// JSON / wrong shapes and ValidationError on invariant violations.
SiteSchema parse_site_schema(const nlohmann::ordered_json& doc);
SiteSchema load_site_schema(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const SiteSchema& schema);
void save_site_schema(const SiteSchema& schema, const std::filesystem::path& path);

/// A_w of one page, in file order. Throws NotFoundError for unknown pages.
const std::vector<ActionSchema>& actions_of(const SiteSchema& schema, std::string_view page_id);

}  // namespace flin

namespace flin {

/// Schemas keyed by site id; training and evaluation resolve an example's
/// actions through its site_id.
class SchemaSet {
 public:
  SchemaSet() = default;
  explicit SchemaSet(std::vector<SiteSchema> sites);

  void add(SiteSchema schema);
  const SiteSchema& site(std::string_view site_id) const;
  const SiteSchema* find(std::string_view site_id) const;
  const std::vector<SiteSchema>& sites() const { return sites_; }

 private:
  std::vector<SiteSchema> sites_;
};

}  // namespace flin
