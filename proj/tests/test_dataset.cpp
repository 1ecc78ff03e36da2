#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "flin/error.hpp"
#include "flin/dataset.hpp"
#include "flin/io.hpp"
#include "flin/text.hpp"
#include "support.hpp"

using namespace flin;
using flin::testing::TempDir;

namespace {

SiteSchema people_schema() {
  SiteSchema s;
  s.site_id = "toy";
  s.domain_tag = DomainTag::restaurants;
  s.pages.push_back(Page{"home",
                         {flin::testing::action("find a table", {flin::testing::closed("people", {"2 people", "4 people"}),
                                                                 flin::testing::open("cuisine")}),
                          flin::testing::action("sign in", {})}});
  return s;
}

ParaphraseTable people_paraphrases() {
  ParaphraseTable t;
  t.closed["people"]["2 people"] = {"me and my friend"};
  t.closed["people"]["4 people"] = {"four of us", "4 people"};
  t.open["cuisine"] = {"italian", "thai food"};
  return t;
}

std::vector<Example> site1_examples(std::size_t count, std::uint64_t seed) {
  const auto dir = flin::testing::data_dir() / "site1";
  return generate(load_site_schema(dir / "schema.json"), load_templates(dir / "templates.jsonl"),
                  load_paraphrases(dir / "paraphrases.json"), count, seed);
}

}  // namespace

TEST(Generate, SubstitutesParaphraseAndRecordsSpan) {
  ParaphraseTable t;
  t.closed["people"]["2 people"] = {"me and my friend"};
  const auto ex = generate(people_schema(), {make_template("home", "find a table", "find a table for [people]")}, t,
                           1, 0);
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_EQ(ex[0].command, "find a table for me and my friend");
  ASSERT_EQ(ex[0].gold.assignments.size(), 1u);
  EXPECT_EQ(ex[0].gold.assignments[0], (ValueAssignment{"people", "2 people"}));
  ASSERT_EQ(ex[0].mentions.size(), 1u);
  EXPECT_EQ(ex[0].mentions[0].text, "me and my friend");
  EXPECT_EQ(ex[0].mentions[0].start, 17u);
  EXPECT_EQ(ex[0].mentions[0].end, 33u);
}

TEST(Generate, TemplateWithoutPlaceholders) {
  const auto ex = generate(people_schema(), {make_template("home", "sign in", "log me in")}, people_paraphrases(), 3, 1);
  ASSERT_EQ(ex.size(), 3u);
  for (const auto& e : ex) {
    EXPECT_EQ(e.command, "log me in");
    EXPECT_TRUE(e.gold.assignments.empty());
    EXPECT_TRUE(e.mentions.empty());
  }
}

TEST(Generate, IsAPureFunctionOfItsInputs) {
  TempDir dir("gen");
  save_examples(site1_examples(300, 42), dir / "a.jsonl");
  save_examples(site1_examples(300, 42), dir / "b.jsonl");
  EXPECT_EQ(io::read_file(dir / "a.jsonl"), io::read_file(dir / "b.jsonl"));
  EXPECT_NE(site1_examples(50, 42), site1_examples(50, 43));
}

TEST(Generate, SpansMatchAndClosedValuesAreInDomain) {
  const auto dir = flin::testing::data_dir() / "site1";
  const SiteSchema schema = load_site_schema(dir / "schema.json");
  for (const auto& ex : site1_examples(2000, 5)) {
    ASSERT_EQ(ex.mentions.size(), ex.gold.assignments.size());
    for (const auto& m : ex.mentions) EXPECT_EQ(ex.command.substr(m.start, m.end - m.start), m.text);
    const ActionSchema* a = schema.find_action(ex.page_id, ex.gold.action);
    ASSERT_NE(a, nullptr);
    for (const auto& asg : ex.gold.assignments) {
      const ParameterSpec* p = a->find_parameter(asg.parameter);
      ASSERT_NE(p, nullptr);
      if (p->is_closed()) {
        EXPECT_NE(std::find(p->domain.begin(), p->domain.end(), asg.value), p->domain.end()) << asg.value;
      }
    }
  }
}

TEST(Generate, Errors) {
  const SiteSchema s = people_schema();
  ParaphraseTable missing;
  missing.open["cuisine"] = {"italian"};
  EXPECT_THROW(generate(s, {make_template("home", "find a table", "table for [people]")}, missing, 1, 0),
               ValidationError);

  ParaphraseTable empty_list = people_paraphrases();
  empty_list.closed["people"]["2 people"] = {};
  EXPECT_THROW(generate(s, {make_template("home", "find a table", "table for [people]")}, empty_list, 1, 0),
               ValidationError);

  EXPECT_THROW(generate(s, {make_template("home", "book", "book it")}, people_paraphrases(), 1, 0), ValidationError);
  EXPECT_THROW(generate(s, {make_template("home", "find a table", "for [party]")}, people_paraphrases(), 1, 0),
               ValidationError);
  EXPECT_THROW(generate(s, {make_template("home", "sign in", "log in")}, people_paraphrases(), 0, 0),
               ValidationError);
  EXPECT_THROW(make_template("home", "find a table", "for [people] and [people]"), ValidationError);
  EXPECT_THROW(make_template("home", "find a table", "for [people"), ValidationError);
}

TEST(Split, SizesAndDisjointCover) {
  const auto ex = site1_examples(100, 1);
  const Split s = split(ex, {0.8, 0.1, 0.1}, 9);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.valid.size(), 10u);
  EXPECT_EQ(s.test.size(), 10u);
  std::multiset<std::string> all, parts;
  for (const auto& e : ex) all.insert(to_json(e).dump());
  for (const auto* part : {&s.train, &s.valid, &s.test}) {
    for (const auto& e : *part) parts.insert(to_json(e).dump());
  }
  EXPECT_EQ(all, parts);
  EXPECT_EQ(split(ex, {0.8, 0.1, 0.1}, 9).valid, s.valid);
}

TEST(Split, TableOneSizes) {
  std::vector<Example> ex(19108, Example{"c", "s", "p", {"a", {}}, {}});
  const Split s = split(ex, {14332.0 / 19108.0, 2865.0 / 19108.0, 1911.0 / 19108.0}, 0);
  EXPECT_EQ(s.train.size(), 14332u);
  EXPECT_EQ(s.valid.size(), 2865u);
  EXPECT_EQ(s.test.size(), 1911u);
}

TEST(Split, DegenerateInputs) {
  const Example one{"c", "s", "p", {"a", {}}, {}};
  const Split s1 = split({one}, {0.8, 0.1, 0.1}, 0);
  EXPECT_EQ(s1.train.size(), 1u);
  EXPECT_TRUE(s1.valid.empty());
  EXPECT_TRUE(s1.test.empty());
  const Split s2 = split({one, one}, {0.8, 0.1, 0.1}, 0);
  EXPECT_EQ(s2.train.size(), 1u);
  EXPECT_EQ(s2.valid.size(), 1u);
  EXPECT_THROW(split({}, {0.8, 0.1, 0.1}, 0), ValidationError);
  EXPECT_THROW(split({one}, {0.8, 0.1, 0.2}, 0), ValidationError);
  EXPECT_THROW(split({one}, {1.0, 0.0, 0.0}, 0), ValidationError);
}

TEST(ExamplesFile, RoundTrip) {
  TempDir dir("jsonl");
  const auto ex = site1_examples(200, 3);
  save_examples(ex, dir / "x.jsonl");
  EXPECT_EQ(load_examples(dir / "x.jsonl"), ex);
  const SiteSchema schema = load_site_schema(flin::testing::data_dir() / "site1" / "schema.json");
  EXPECT_EQ(load_examples(dir / "x.jsonl", &schema), ex);
}

TEST(ExamplesFile, ErrorsCarryLineNumbers) {
  TempDir dir("jsonl");
  const auto ex = site1_examples(2, 3);
  {
    std::ofstream out(dir / "bad.jsonl");
    out << to_json(ex[0]).dump() << "\n";
    auto j = to_json(ex[1]);
    j.erase("gold");
    out << j.dump() << "\n";
  }
  try {
    load_examples(dir / "bad.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.jsonl:2"), std::string::npos) << e.what();
  }
}

TEST(ExamplesFile, SpanTextMismatchIsAValidationError) {
  Example ex{"find a table for me and my friend", "toy", "home", {"find a table", {{"people", "2 people"}}},
             {{"people", 17, 33, "me and my pal"}}};
  EXPECT_THROW(validate_example(ex), ValidationError);
  ex.mentions[0].text = "me and my friend";
  EXPECT_NO_THROW(validate_example(ex));
  EXPECT_NO_THROW(validate_example(ex, people_schema()));
  ex.gold.assignments[0].value = "3 people";
  EXPECT_THROW(validate_example(ex, people_schema()), ValidationError);
  ex.mentions[0].end = 99;
  EXPECT_THROW(validate_example(ex), ValidationError);
}
