#include <fstream>

#include <gtest/gtest.h>

#include "flin/error.hpp"
#include "flin/schema.hpp"
#include "support.hpp"

using namespace flin;
using flin::testing::TempDir;

namespace {

nlohmann::ordered_json opentable_doc() {
  return nlohmann::ordered_json::parse(R"({
    "site_id": "opentable",
    "domain_tag": "restaurants",
    "pages": {
      "home": [
        {"name": "let's go", "parameters": [
          {"name": "time", "kind": "closed", "domain": ["19:00", "20:00"]},
          {"name": "date", "kind": "closed", "domain": ["today"]},
          {"name": "people", "kind": "closed", "domain": ["2 people"]},
          {"name": "location, restaurant, or cuisine", "kind": "open", "domain": [], "description": "search"}
        ]}
      ]
    }
  })");
}

}  // namespace

TEST(LoadSiteSchema, OpentableHomePage) {
  TempDir dir("schema");
  std::ofstream(dir / "s.json") << opentable_doc().dump();
  const SiteSchema s = load_site_schema(dir / "s.json");
  ASSERT_EQ(s.pages.size(), 1u);
  ASSERT_EQ(s.pages[0].actions.size(), 1u);
  const ActionSchema& a = s.pages[0].actions[0];
  EXPECT_EQ(a.name, "let's go");
  ASSERT_EQ(a.parameters.size(), 4u);
  EXPECT_TRUE(a.parameters[0].is_closed());
  EXPECT_TRUE(a.parameters[1].is_closed());
  EXPECT_TRUE(a.parameters[2].is_closed());
  EXPECT_FALSE(a.parameters[3].is_closed());
  EXPECT_EQ(a.page, "home");
  EXPECT_EQ(s.domain_tag, DomainTag::restaurants);
}

TEST(LoadSiteSchema, ClosedParameterWithEmptyDomainIsRejected) {
  auto doc = opentable_doc();
  doc["pages"]["home"][0]["parameters"][0]["domain"] = nlohmann::ordered_json::array();
  EXPECT_THROW(parse_site_schema(doc), ValidationError);
}

TEST(LoadSiteSchema, DuplicateActionOnPageIsRejected) {
  auto doc = opentable_doc();
  doc["pages"]["home"].push_back(doc["pages"]["home"][0]);
  try {
    parse_site_schema(doc);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("let's go"), std::string::npos);
  }
}

TEST(LoadSiteSchema, OtherInvariantViolations) {
  auto open_with_domain = opentable_doc();
  open_with_domain["pages"]["home"][0]["parameters"][3]["domain"] = {"x"};
  EXPECT_THROW(parse_site_schema(open_with_domain), ValidationError);

  auto dup_values = opentable_doc();
  dup_values["pages"]["home"][0]["parameters"][0]["domain"] = {"19:00", " 19:00"};
  EXPECT_THROW(parse_site_schema(dup_values), ValidationError);

  auto dup_params = opentable_doc();
  dup_params["pages"]["home"][0]["parameters"][1]["name"] = "Time";
  EXPECT_THROW(parse_site_schema(dup_params), ValidationError);

  auto empty_page = opentable_doc();
  empty_page["pages"]["home"] = nlohmann::ordered_json::array();
  EXPECT_THROW(parse_site_schema(empty_page), ValidationError);

  auto bad_tag = opentable_doc();
  bad_tag["domain_tag"] = "airlines";
  EXPECT_THROW(parse_site_schema(bad_tag), Error);
}

TEST(LoadSiteSchema, MalformedInputIsAParseError) {
  TempDir dir("schema");
  std::ofstream(dir / "bad.json") << "{\"site_id\": ";
  EXPECT_THROW(load_site_schema(dir / "bad.json"), ParseError);
  EXPECT_THROW(load_site_schema(dir / "missing.json"), Error);

  auto no_pages = opentable_doc();
  no_pages.erase("pages");
  EXPECT_THROW(parse_site_schema(no_pages), ParseError);
  auto wrong_kind = opentable_doc();
  wrong_kind["pages"]["home"][0]["parameters"][0]["kind"] = "sometimes";
  EXPECT_THROW(parse_site_schema(wrong_kind), Error);
}

TEST(ActionsOf, FileOrderAndErrors) {
  const SiteSchema s = flin::testing::opentable_schema();
  const auto& home = actions_of(s, "home");
  ASSERT_EQ(home.size(), 2u);
  EXPECT_EQ(home[0].name, "let's go");
  EXPECT_EQ(home[1].name, "sign in");
  EXPECT_THROW(actions_of(s, "checkout"), NotFoundError);

  const SiteSchema single = parse_site_schema(opentable_doc());
  EXPECT_EQ(actions_of(single, "home").size(), 1u);
}

TEST(SiteSchema, LookupsUseNormalizedNames) {
  const SiteSchema s = flin::testing::opentable_schema();
  ASSERT_NE(s.find_action("home", "Let's  Go"), nullptr);
  const ActionSchema* a = s.find_action("home", "let's go");
  EXPECT_NE(a->find_parameter("PEOPLE"), nullptr);
  EXPECT_EQ(a->find_parameter("party"), nullptr);
}

TEST(SiteSchema, RoundTripThroughJson) {
  TempDir dir("schema");
  for (const auto& path : {flin::testing::data_dir() / "site1" / "schema.json",
                           flin::testing::data_dir() / "site2" / "schema.json"}) {
    const SiteSchema s = load_site_schema(path);
    save_site_schema(s, dir / "copy.json");
    EXPECT_EQ(load_site_schema(dir / "copy.json"), s);
  }
  const SiteSchema built = flin::testing::opentable_schema();
  EXPECT_EQ(parse_site_schema(to_json(built)), built);
}

TEST(SchemaSet, ResolvesBySiteId) {
  SchemaSet set;
  set.add(flin::testing::opentable_schema());
  EXPECT_EQ(set.site("opentable").site_id, "opentable");
  EXPECT_EQ(set.find("yelp"), nullptr);
  EXPECT_THROW(set.site("yelp"), NotFoundError);
  EXPECT_THROW(set.add(flin::testing::opentable_schema()), ValidationError);
}
