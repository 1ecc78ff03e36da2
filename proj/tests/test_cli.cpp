#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(FLIN_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

std::string generate_args(const fs::path& out, int count, int seed) {
  const fs::path d = flin::testing::data_dir() / "site1";
  return "generate --schema " + quoted(d / "schema.json") + " --templates " + quoted(d / "templates.jsonl") +
         " --paraphrases " + quoted(d / "paraphrases.json") + " --count " + std::to_string(count) + " --seed " +
         std::to_string(seed) + " --out " + quoted(out);
}

}  // namespace

TEST(Cli, GenerateIsSeededAndValidatesCount) {
  flin::testing::TempDir a("cli-a");
  flin::testing::TempDir b("cli-b");
  ASSERT_EQ(run(generate_args(a.path(), 60, 3)).code, 0);
  ASSERT_EQ(run(generate_args(b.path(), 60, 3)).code, 0);
  for (const char* f : {"train.jsonl", "valid.jsonl", "test.jsonl", "schema.json"}) {
    ASSERT_TRUE(fs::exists(a.path() / f)) << f;
    EXPECT_EQ(slurp(a.path() / f), slurp(b.path() / f)) << f;
  }
  EXPECT_EQ(run(generate_args(a.path(), 0, 3)).code, 2);
  EXPECT_EQ(run("generate --schema /no/such/file.json --templates x --paraphrases y --count 5 --out " +
                quoted(a.path()))
                .code,
            2);
  EXPECT_EQ(run("bogus-subcommand").code, 2);
}

TEST(Cli, TrainParseEvalTuneRoundTrip) {
  flin::testing::TempDir dir("cli-run");
  const fs::path data = dir.path() / "data";
  const fs::path bundle = dir.path() / "run";
  ASSERT_EQ(run(generate_args(data, 120, 4)).code, 0);
  std::ofstream(dir.path() / "config.json") << nlohmann::json{{"dim", 8},
                                                              {"epochs_action", 1},
                                                              {"epochs_mention", 1},
                                                              {"epochs_value", 1},
                                                              {"batch_size", 20},
                                                              {"learning_rate", 0.005},
                                                              {"mention", {{"layers", 1}, {"hash_buckets", 256}}}}
                                                   .dump();
  const std::string train = "train --config " + quoted(dir.path() / "config.json") + " --data " + quoted(data) +
                            " --out " + quoted(bundle);
  EXPECT_EQ(run(train + " --component everything").code, 2);
  const auto t = run(train);
  ASSERT_EQ(t.code, 0);
  std::istringstream lines(t.out);
  std::string line;
  int epochs = 0;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    EXPECT_TRUE(nlohmann::json::parse(line).contains("valid_metric"));
    ++epochs;
  }
  EXPECT_EQ(epochs, 3);

  const std::string schema = quoted(data / "schema.json");
  const std::string parse = "parse --bundle " + quoted(bundle) + " --schema " + schema;
  const auto ok = run(parse + " --page home --command 'find a table for two at 7 pm'");
  ASSERT_EQ(ok.code, 0);
  const auto j = nlohmann::json::parse(ok.out);
  EXPECT_EQ(j["version"], "1");
  EXPECT_EQ(j["page_id"], "home");
  EXPECT_TRUE(j.contains("prediction"));
  EXPECT_EQ(run(parse + " --page checkout --command 'sign in'").code, 4);
  EXPECT_EQ(run(parse + " --page home --command ''").code, 2);
  EXPECT_EQ(run("parse --bundle " + quoted(dir.path() / "missing") + " --schema " + schema +
                " --page home --command 'sign in'")
                .code,
            2);

  const auto ev = run("eval --bundle " + quoted(bundle) + " --test " + quoted(data / "test.jsonl") + " --schema " +
                      schema + " --out " + quoted(dir.path() / "eval"));
  ASSERT_EQ(ev.code, 0);
  EXPECT_NE(ev.out.find("PA-100"), std::string::npos);

  const auto tu = run("tune --bundle " + quoted(bundle) + " --valid " + quoted(data / "valid.jsonl") + " --schema " +
                      schema + " --rho 0.5 0.67 --alpha 0.4");
  ASSERT_EQ(tu.code, 0);
  const auto tuned = nlohmann::json::parse(slurp(bundle / "inference.json"));
  const double rho = tuned["rho"].get<double>();
  EXPECT_TRUE(rho == 0.5 || rho == 0.67);
  EXPECT_EQ(run("tune --bundle " + quoted(bundle) + " --valid " + quoted(data / "valid.jsonl") + " --schema " +
                schema + " --rho 2")
                .code,
            2);
}
