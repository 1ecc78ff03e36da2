#include "flin/schema.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "flin/error.hpp"
#include "flin/text.hpp"

namespace flin {

namespace {

const nlohmann::ordered_json& require(const nlohmann::ordered_json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(std::string(where) + ": missing key \"" + key + "\"");
  }
  return obj.at(key);
}

std::string require_string(const nlohmann::ordered_json& obj, const char* key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_string()) throw ParseError(std::string(where) + ": \"" + key + "\" must be a string");
  return v.get<std::string>();
}

ParameterSpec parse_parameter(const nlohmann::ordered_json& j, const std::string& where) {
  ParameterSpec p;
  p.name = require_string(j, "name", where);
  const std::string kind = require_string(j, "kind", where);
  if (kind == "closed") {
    p.kind = ParameterKind::closed;
  } else if (kind == "open") {
    p.kind = ParameterKind::open;
  } else {
    throw ParseError(where + ": kind must be \"closed\" or \"open\", got \"" + kind + "\"");
  }
  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    if (!d.is_array()) throw ParseError(where + ": \"domain\" must be an array");
    for (const auto& v : d) {
      if (!v.is_string()) throw ParseError(where + ": domain values must be strings");
      p.domain.push_back(v.get<std::string>());
    }
  }
  if (j.contains("description") && !j.at("description").is_null()) {
    if (!j.at("description").is_string()) throw ParseError(where + ": \"description\" must be a string");
    p.description = j.at("description").get<std::string>();
  }
  return p;
}

}  // namespace

const ParameterSpec* ActionSchema::find_parameter(std::string_view name) const {
  const std::string key = text::normalize(name);
  for (const auto& p : parameters) {
    if (text::normalize(p.name) == key) return &p;
  }
  return nullptr;
}

std::string_view to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::restaurants: return "restaurants";
    case DomainTag::hotels: return "hotels";
    case DomainTag::shopping: return "shopping";
    case DomainTag::other: return "other";
  }
  return "other";
}

DomainTag domain_tag_from_string(std::string_view s) {
  if (s == "restaurants") return DomainTag::restaurants;
  if (s == "hotels") return DomainTag::hotels;
  if (s == "shopping") return DomainTag::shopping;
  if (s == "other") return DomainTag::other;
  throw ParseError("unknown domain_tag \"" + std::string(s) + "\"");
}

const Page* SiteSchema::find_page(std::string_view page_id) const {
  for (const auto& p : pages) {
    if (p.id == page_id) return &p;
  }
  return nullptr;
}

const ActionSchema* SiteSchema::find_action(std::string_view page_id, std::string_view action) const {
  const Page* page = find_page(page_id);
  if (page == nullptr) return nullptr;
  const std::string key = text::normalize(action);
  for (const auto& a : page->actions) {
    if (text::normalize(a.name) == key) return &a;
  }
  return nullptr;
}

void validate(const SiteSchema& schema) {
  std::set<std::string> page_ids;
  for (const auto& page : schema.pages) {
    const std::string at = "page \"" + page.id + "\"";
    if (page.id.empty()) throw ValidationError("page id must be non-empty");
    if (!page_ids.insert(page.id).second) throw ValidationError(at + ": duplicate page id");
    if (page.actions.empty()) throw ValidationError(at + ": every page needs at least one action");
    std::set<std::string> action_keys;
    for (const auto& action : page.actions) {
      const std::string act = at + ", action \"" + action.name + "\"";
      if (text::normalize(action.name).empty()) throw ValidationError(at + ": action name must be non-empty");
      if (action.page != page.id) throw ValidationError(act + ": action page does not match its page");
      if (!action_keys.insert(text::normalize(action.name)).second) {
        throw ValidationError(act + ": duplicate action name on page");
      }
      std::set<std::string> param_keys;
      for (const auto& p : action.parameters) {
        const std::string par = act + ", parameter \"" + p.name + "\"";
        if (text::normalize(p.name).empty()) throw ValidationError(act + ": parameter name must be non-empty");
        if (!param_keys.insert(text::normalize(p.name)).second) {
          throw ValidationError(par + ": duplicate parameter name");
        }
        if (p.kind == ParameterKind::open && !p.domain.empty()) {
          throw ValidationError(par + ": open parameter must not declare a domain");
        }
        if (p.kind == ParameterKind::closed && p.domain.empty()) {
          throw ValidationError(par + ": closed parameter needs a non-empty domain");
        }
        std::set<std::string> values;
        for (const auto& v : p.domain) {
          const std::string key = text::normalize(v);
          if (key.empty()) throw ValidationError(par + ": domain values must be non-empty");
          if (!values.insert(key).second) throw ValidationError(par + ": duplicate domain value \"" + v + "\"");
        }
      }
    }
  }
}

SiteSchema parse_site_schema(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw ParseError("site schema: top level must be an object");
  SiteSchema schema;
  schema.site_id = require_string(doc, "site_id", "site schema");
  schema.domain_tag = domain_tag_from_string(require_string(doc, "domain_tag", "site schema"));
  const auto& pages = require(doc, "pages", "site schema");
  if (!pages.is_object()) throw ParseError("site schema: \"pages\" must be an object");
  for (const auto& [page_id, actions] : pages.items()) {
    Page page;
    page.id = page_id;
    if (!actions.is_array()) throw ParseError("page \"" + page_id + "\": actions must be an array");
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const std::string where = "page \"" + page_id + "\" action #" + std::to_string(i);
      const auto& a = actions[i];
      ActionSchema action;
      action.page = page_id;
      action.name = require_string(a, "name", where);
      if (a.contains("parameters")) {
        const auto& params = a.at("parameters");
        if (!params.is_array()) throw ParseError(where + ": \"parameters\" must be an array");
        for (std::size_t k = 0; k < params.size(); ++k) {
          action.parameters.push_back(parse_parameter(params[k], where + " parameter #" + std::to_string(k)));
        }
      }
      page.actions.push_back(std::move(action));
    }
    schema.pages.push_back(std::move(page));
  }
  validate(schema);
  return schema;
}

SiteSchema load_site_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open site schema " + path.string());
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_site_schema(doc);
}

nlohmann::ordered_json to_json(const SiteSchema& schema) {
  nlohmann::ordered_json doc;
  doc["site_id"] = schema.site_id;
  doc["domain_tag"] = std::string(to_string(schema.domain_tag));
  nlohmann::ordered_json pages = nlohmann::ordered_json::object();
  for (const auto& page : schema.pages) {
    nlohmann::ordered_json actions = nlohmann::ordered_json::array();
    for (const auto& a : page.actions) {
      nlohmann::ordered_json params = nlohmann::ordered_json::array();
      for (const auto& p : a.parameters) {
        nlohmann::ordered_json pj;
        pj["name"] = p.name;
        pj["kind"] = p.is_closed() ? "closed" : "open";
        pj["domain"] = p.domain;
        if (p.description) pj["description"] = *p.description;
        params.push_back(std::move(pj));
      }
      actions.push_back({{"name", a.name}, {"parameters", std::move(params)}});
    }
    pages[page.id] = std::move(actions);
  }
  doc["pages"] = std::move(pages);
  return doc;
}

void save_site_schema(const SiteSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(schema).dump(2) << '\n';
}

const std::vector<ActionSchema>& actions_of(const SiteSchema& schema, std::string_view page_id) {
  const Page* page = schema.find_page(page_id);
  if (page == nullptr) throw NotFoundError("unknown page \"" + std::string(page_id) + "\" in site " + schema.site_id);
  return page->actions;
}

}  // namespace flin

namespace flin {

SchemaSet::SchemaSet(std::vector<SiteSchema> sites) {
  for (auto& s : sites) add(std::move(s));
}

void SchemaSet::add(SiteSchema schema) {
  if (find(schema.site_id) != nullptr) throw ValidationError("duplicate site id \"" + schema.site_id + "\"");
  sites_.push_back(std::move(schema));
}

const SiteSchema* SchemaSet::find(std::string_view site_id) const {
  for (const auto& s : sites_) {
    if (s.site_id == site_id) return &s;
  }
  return nullptr;
}

const SiteSchema& SchemaSet::site(std::string_view site_id) const {
  const SiteSchema* s = find(site_id);
  if (s == nullptr) throw NotFoundError("unknown site \"" + std::string(site_id) + "\"");
  return *s;
}

}  // namespace flin
