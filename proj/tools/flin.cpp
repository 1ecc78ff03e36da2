// flin: generate data, train, evaluate, parse and serve.
//
// Exit codes: 0 success, 1 unexpected failure, 2 usage or validation error,
// 3 training failure, 4 unknown page.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "flin/dataset.hpp"
#include "flin/error.hpp"
#include "flin/evaluation.hpp"
#include "flin/io.hpp"
#include "flin/log.hpp"
#include "flin/schema.hpp"
#include "flin/service.hpp"
#include "flin/training_orchestrator.hpp"

namespace fs = std::filesystem;
using namespace flin;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;
constexpr int kTraining = 3;
constexpr int kUnknownPage = 4;

struct UnknownPage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<Component> parse_components(const std::string& name) {
  if (name == "all") return {Component::action, Component::mention, Component::value};
  if (name == "action") return {Component::action};
  if (name == "mention") return {Component::mention};
  if (name == "value") return {Component::value};
  throw ValidationError("unknown component \"" + name + "\" (expected action, mention, value or all)");
}

SchemaSet schema_set(const std::vector<std::string>& paths) {
  SchemaSet set;
  for (const auto& p : paths) set.add(load_site_schema(p));
  return set;
}

int cmd_generate(const std::string& schema_path, const std::string& templates_path,
                 const std::string& paraphrases_path, long count, std::uint64_t seed, const std::string& out,
                 const std::vector<double>& ratios) {
  if (count <= 0) throw ValidationError("--count must be positive");
  if (ratios.size() != 3) throw ValidationError("--split needs three ratios");
  const SiteSchema schema = load_site_schema(schema_path);
  const auto examples = generate(schema, load_templates(templates_path), load_paraphrases(paraphrases_path),
                                 static_cast<std::size_t>(count), seed);
  const Split s = split(examples, {ratios[0], ratios[1], ratios[2]}, seed);
  fs::create_directories(out);
  save_examples(s.train, fs::path(out) / "train.jsonl");
  save_examples(s.valid, fs::path(out) / "valid.jsonl");
  save_examples(s.test, fs::path(out) / "test.jsonl");
  save_site_schema(schema, fs::path(out) / "schema.json");
  std::cerr << "wrote " << s.train.size() << " train, " << s.valid.size() << " valid, " << s.test.size()
            << " test examples to " << out << "\n";
  return kOk;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out,
              const std::string& component, std::vector<std::string> schemas) {
  const auto components = parse_components(component);
  const TrainingConfig config = config_path.empty() ? TrainingConfig{} : load_training_config(config_path);
  if (schemas.empty()) schemas.push_back((fs::path(data) / "schema.json").string());
  const SchemaSet set = schema_set(schemas);
  const auto train = load_examples(fs::path(data) / "train.jsonl");
  const fs::path valid_path = fs::path(data) / "valid.jsonl";
  if (!fs::exists(valid_path)) throw TrainingError("missing validation split " + valid_path.string());
  const auto valid = load_examples(valid_path);

  RunOptions options;
  options.run_dir = out;
  options.components = components;
  options.on_epoch = [](const EpochRecord& r) { std::cout << to_json(r).dump() << std::endl; };
  const TrainAllResult result = train_all(set, train, valid, config, options);
  if (result.bundle) {
    std::cerr << "bundle complete in " << out << "\n";
  } else {
    std::cerr << "partial run saved in " << out << "\n";
  }
  return kOk;
}

int cmd_eval(const std::string& bundle_dir, const std::string& test_path, const std::vector<std::string>& schemas,
             const std::string& out) {
  const SchemaSet set = schema_set(schemas);
  const auto examples = load_examples(test_path);
  if (examples.empty()) throw ValidationError(test_path + ": no test examples");
  for (const auto& ex : examples) validate_example(ex, set.site(ex.site_id));
  const auto bundle = ModelBundle::load(bundle_dir);
  const Evaluation ev = evaluate(bundle->scorers(), set, examples, bundle->inference());

  nlohmann::ordered_json j;
  j["report"] = to_json(ev.report);
  nlohmann::ordered_json preds = nlohmann::ordered_json::array();
  for (const auto& r : ev.results) preds.push_back(parse_response(r));
  j["predictions"] = std::move(preds);
  if (!out.empty()) io::write_json(out, j);
  std::cout << format_table(ev.report, fs::path(test_path).stem().string());
  return kOk;
}

int cmd_tune(const std::string& bundle_dir, const std::string& valid_path, const std::vector<std::string>& schemas,
             const std::vector<double>& rho_grid, const std::vector<double>& alpha_grid) {
  const SchemaSet set = schema_set(schemas);
  const auto valid = load_examples(valid_path);
  const auto bundle = ModelBundle::load(bundle_dir);
  const TuneResult t = tune_inference(bundle->scorers(), set, valid, rho_grid, alpha_grid, bundle->inference());
  io::write_json(fs::path(bundle_dir) / "inference.json", to_json(t.config));
  nlohmann::ordered_json j = to_json(t.config);
  j["valid"] = to_json(t.report);
  std::cout << j.dump() << "\n";
  return kOk;
}

int parse_one(const ModelBundle& bundle, const SiteSchema& schema, const std::string& page,
              const std::string& command) {
  std::cout << parse_response(bundle.parse(schema, page, command)).dump() << std::endl;
  return kOk;
}

int cmd_parse(const std::string& bundle_dir, const std::string& schema_path, const std::string& page,
              const std::string& command, bool repl) {
  const SiteSchema schema = load_site_schema(schema_path);
  if (schema.find_page(page) == nullptr) throw UnknownPage("unknown page \"" + page + "\"");
  if (!repl && command.find_first_not_of(" \t") == std::string::npos) {
    throw ValidationError("empty command");
  }
  const auto bundle = ModelBundle::load(bundle_dir);
  if (!repl) return parse_one(*bundle, schema, page, command);
  std::string line;
  while (true) {
    std::cerr << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    parse_one(*bundle, schema, page, line);
  }
  return kOk;
}

int cmd_serve(const std::string& bundle_dir, const std::string& schema_path, const std::string& host, int port) {
  SiteSchema schema = load_site_schema(schema_path);
  ParseServer server;
  const int bound = server.bind(host, port);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  std::thread loader([&] {
    try {
      server.load(ModelBundle::load(bundle_dir), std::move(schema));
      log().info("models loaded from {}", bundle_dir);
    } catch (const std::exception& e) {
      log().error("loading {} failed: {}", bundle_dir, e.what());
      server.stop();
    }
  });
  std::cerr << "listening on " << host << ":" << bound << "\n";
  server.listen();
  loader.join();
  return server.loaded() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parse natural-language web commands into navigation instructions"};
  app.require_subcommand(1);

  std::string schema, templates, paraphrases, out, data, config, component = "all", bundle, test, page, command;
  std::string host = "127.0.0.1", valid;
  std::vector<std::string> schemas;
  long count = 0;
  std::uint64_t seed = 0;
  int port = 8080;
  bool repl = false;
  std::vector<double> ratios{0.8, 0.1, 0.1};
  std::vector<double> rho_grid{0.5, 0.6, 0.67, 0.75, 0.85};
  std::vector<double> alpha_grid{0.2, 0.4, 0.6, 0.8};

  auto* gen = app.add_subcommand("generate", "Instantiate templates into train/valid/test JSONL files");
  gen->add_option("--schema", schema, "Site schema JSON")->required();
  gen->add_option("--templates", templates, "Command templates JSONL")->required();
  gen->add_option("--paraphrases", paraphrases, "Value paraphrase table JSON")->required();
  gen->add_option("--count", count, "Number of examples")->required();
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--split", ratios, "Train/valid/test ratios")->expected(3);

  auto* tr = app.add_subcommand("train", "Train the three components into a run directory");
  tr->add_option("--config", config, "Training config JSON (defaults if omitted)");
  tr->add_option("--data", data, "Directory with train.jsonl, valid.jsonl and schema.json")->required();
  tr->add_option("--out", out, "Run directory")->required();
  tr->add_option("--component", component, "action, mention, value or all");
  tr->add_option("--schema", schemas, "Site schema(s); defaults to DATA/schema.json");

  auto* ev = app.add_subcommand("eval", "Evaluate a bundle on a test split");
  ev->add_option("--bundle", bundle, "Run directory")->required();
  ev->add_option("--test", test, "Test JSONL")->required();
  ev->add_option("--schema", schemas, "Site schema(s)")->required();
  ev->add_option("--out", out, "Write predictions and report JSON here");

  auto* tu = app.add_subcommand("tune", "Grid-search rho and alpha on a validation split");
  tu->add_option("--bundle", bundle, "Run directory")->required();
  tu->add_option("--valid", valid, "Validation JSONL")->required();
  tu->add_option("--schema", schemas, "Site schema(s)")->required();
  tu->add_option("--rho", rho_grid, "rho grid");
  tu->add_option("--alpha", alpha_grid, "alpha grid");

  auto* pa = app.add_subcommand("parse", "Parse one command or read commands from stdin");
  pa->add_option("--bundle", bundle, "Run directory")->required();
  pa->add_option("--schema", schema, "Site schema JSON")->required();
  pa->add_option("--page", page, "Page id")->required();
  auto* cmd_opt = pa->add_option("--command", command, "Command text");
  auto* repl_opt = pa->add_flag("--repl", repl, "Read commands line by line until EOF");
  cmd_opt->excludes(repl_opt);

  auto* sv = app.add_subcommand("serve", "Serve POST /v1/parse and GET /v1/health");
  sv->add_option("--bundle", bundle, "Run directory")->required();
  sv->add_option("--schema", schema, "Site schema JSON")->required();
  sv->add_option("--port", port, "TCP port");
  sv->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_generate(schema, templates, paraphrases, count, seed, out, ratios);
    if (*tr) return cmd_train(config, data, out, component, schemas);
    if (*ev) return cmd_eval(bundle, test, schemas, out);
    if (*tu) return cmd_tune(bundle, valid, schemas, rho_grid, alpha_grid);
    if (*pa) {
      if (!repl && cmd_opt->count() == 0) throw ValidationError("pass --command or --repl");
      return cmd_parse(bundle, schema, page, command, repl);
    }
    if (*sv) return cmd_serve(bundle, schema, host, port);
  } catch (const UnknownPage& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnknownPage;
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTraining;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
