#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "flin/error.hpp"
#include "flin/training_orchestrator.hpp"
#include "support.hpp"

using namespace flin;
namespace fs = std::filesystem;

namespace {

TrainingConfig tiny_config() { return flin::testing::tiny_training_config(); }

class Orchestrator : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    auto data = flin::testing::site_data("site1", 240, 11);
    schemas_ = new SchemaSet(std::move(data.schemas));
    split_ = new Split(std::move(data.split));
    const Split& s = *split_;
    trained_ = new TrainAllResult(train_all(*schemas_, s.train, s.valid, tiny_config()));
  }
  static void TearDownTestSuite() {
    delete trained_;
    delete split_;
    delete schemas_;
  }

  static SchemaSet* schemas_;
  static Split* split_;
  static TrainAllResult* trained_;
};

SchemaSet* Orchestrator::schemas_ = nullptr;
Split* Orchestrator::split_ = nullptr;
TrainAllResult* Orchestrator::trained_ = nullptr;

std::vector<std::string> predictions(const ModelBundle& b, const SchemaSet& schemas, const std::vector<Example>& xs) {
  std::vector<std::string> out;
  for (const auto& ex : xs) out.push_back(to_json(b.parse(schemas.site(ex.site_id), ex.page_id, ex.command)).dump());
  return out;
}

}  // namespace

TEST(TrainingConfig, DefaultHyperparameters) {
  const TrainingConfig c;
  EXPECT_EQ(c.batch_size, 50u);
  EXPECT_EQ(c.epochs_action, 7);
  EXPECT_EQ(c.epochs_mention, 3);
  EXPECT_EQ(c.epochs_value, 22);
  EXPECT_EQ(c.n_negatives, 1u);
  EXPECT_DOUBLE_EQ(c.dropout, 0.1);
  EXPECT_EQ(c.dim, 300);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-4);
  EXPECT_DOUBLE_EQ(c.l2, 0.001);
  EXPECT_DOUBLE_EQ(c.inference.rho, 0.67);
  EXPECT_DOUBLE_EQ(c.inference.alpha, 0.4);
  EXPECT_EQ(c.resolved_mention().dim, 300);
  EXPECT_EQ(c.resolved_value().char_dim, 300);
  EXPECT_NO_THROW(c.validate());
}

TEST(TrainingConfig, JsonRoundTripAndRejection) {
  TrainingConfig c = tiny_config();
  c.value.four_way_mean = true;
  c.inference.rho = 0.5;
  const auto back = training_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_TRUE(back.value.four_way_mean);

  const auto partial = training_config_from_json({{"dim", 32}, {"learning_rate", 0.005}});
  EXPECT_EQ(partial.dim, 32);
  EXPECT_EQ(partial.epochs_value, 22);
  EXPECT_EQ(partial.resolved_mention().dim, 32);
  EXPECT_THROW(training_config_from_json({{"epochs", 3}}), ParseError);
  EXPECT_THROW(training_config_from_json({{"dim", "big"}}), ParseError);
  EXPECT_THROW(training_config_from_json(nlohmann::json::array()), ParseError);

  TrainingConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = TrainingConfig{};
  bad.epochs_value = 0;
  EXPECT_THROW(bad.validate(), ValidationError);

  flin::testing::TempDir dir("cfg");
  std::ofstream(dir.path() / "c.json") << R"({"dim": 16, "seed": 9})";
  EXPECT_EQ(load_training_config(dir.path() / "c.json").seed, 9u);
  EXPECT_THROW(load_training_config(dir.path() / "missing.json"), Error);
}

TEST(Provenance, HashesTrackConfigAndData) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  SchemaSet schemas;
  schemas.add(flin::testing::opentable_schema());
  const std::vector<Example> data = {Example{"sign in", "opentable", "home", {"sign in", {}}, {}}};
  auto other = data;
  other[0].command = "sign me in";
  TrainingConfig c;
  const auto a = provenance_of(c, data, data, schemas);
  EXPECT_EQ(a.config_hash, provenance_of(c, data, data, schemas).config_hash);
  EXPECT_EQ(a.dataset_hash, provenance_of(c, data, data, schemas).dataset_hash);
  EXPECT_NE(a.dataset_hash, provenance_of(c, other, data, schemas).dataset_hash);
  EXPECT_NE(a.dataset_hash, provenance_of(c, data, other, schemas).dataset_hash);
  c.seed = 4;
  const auto b = provenance_of(c, data, data, schemas);
  EXPECT_NE(a.config_hash, b.config_hash);
  EXPECT_EQ(b.seed, 4u);
  EXPECT_EQ(a.dataset_hash, b.dataset_hash);
}

TEST_F(Orchestrator, TrainsAllComponentsInMemory) {
  ASSERT_NE(trained_->bundle, nullptr);
  ASSERT_EQ(trained_->history.size(), 3u);
  EXPECT_EQ(trained_->history[0].component, "action");
  EXPECT_EQ(trained_->history[1].component, "mention");
  EXPECT_EQ(trained_->history[2].component, "value");
  const auto ev = evaluate(trained_->bundle->scorers(), *schemas_, split_->test, trained_->bundle->inference());
  EXPECT_EQ(ev.results.size(), split_->test.size());
  EXPECT_EQ(ev.report.n, split_->test.size());
}

TEST_F(Orchestrator, IdenticalSeedsGiveIdenticalRuns) {
  const auto again = train_all(*schemas_, split_->train, split_->valid, tiny_config());
  ASSERT_EQ(again.history.size(), trained_->history.size());
  for (std::size_t i = 0; i < again.history.size(); ++i) {
    EXPECT_EQ(again.history[i].train_loss, trained_->history[i].train_loss);
    EXPECT_EQ(again.history[i].valid_metric, trained_->history[i].valid_metric);
  }
  EXPECT_EQ(predictions(*again.bundle, *schemas_, split_->test),
            predictions(*trained_->bundle, *schemas_, split_->test));
}

TEST_F(Orchestrator, RunDirectoryRoundTripAndResume) {
  flin::testing::TempDir dir("run");
  RunOptions opt;
  opt.run_dir = dir.path();
  std::vector<EpochRecord> seen;
  opt.on_epoch = [&](const EpochRecord& r) { seen.push_back(r); };
  const auto first = train_all(*schemas_, split_->train, split_->valid, tiny_config(), opt);
  EXPECT_EQ(seen.size(), 3u);
  for (const char* f : {"config.json", "dataset-manifest.json", "history.jsonl", "inference.json",
                        "action/checkpoint", "mention/checkpoint", "value/checkpoint"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  const auto loaded = ModelBundle::load(dir.path());
  EXPECT_EQ(loaded->provenance().dataset_hash, first.bundle->provenance().dataset_hash);
  EXPECT_EQ(predictions(*loaded, *schemas_, split_->test), predictions(*first.bundle, *schemas_, split_->test));

  const auto resumed = train_all(*schemas_, split_->train, split_->valid, tiny_config(), opt);
  EXPECT_TRUE(resumed.history.empty());
  EXPECT_EQ(predictions(*resumed.bundle, *schemas_, split_->test),
            predictions(*first.bundle, *schemas_, split_->test));

  TrainingConfig changed = tiny_config();
  changed.seed = 2;
  EXPECT_THROW(train_all(*schemas_, split_->train, split_->valid, changed, opt), ValidationError);
}

TEST_F(Orchestrator, ComponentsTrainSeparately) {
  flin::testing::TempDir dir("partial");
  RunOptions opt;
  opt.run_dir = dir.path();
  opt.components = {Component::value};
  EXPECT_THROW(train_all(*schemas_, split_->train, split_->valid, tiny_config(), opt), TrainingError);

  opt.components = {Component::action};
  auto r = train_all(*schemas_, split_->train, split_->valid, tiny_config(), opt);
  EXPECT_EQ(r.bundle, nullptr);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_THROW(ModelBundle::load(dir.path()), NotFoundError);

  opt.components = {Component::mention};
  r = train_all(*schemas_, split_->train, split_->valid, tiny_config(), opt);
  EXPECT_EQ(r.bundle, nullptr);
  EXPECT_EQ(r.history.at(0).component, "mention");

  opt.components = {Component::value};
  r = train_all(*schemas_, split_->train, split_->valid, tiny_config(), opt);
  ASSERT_NE(r.bundle, nullptr);
  EXPECT_EQ(r.history.at(0).component, "value");
  // Same seeds, same order: the staged run equals the one-shot run.
  EXPECT_EQ(predictions(*r.bundle, *schemas_, split_->test),
            predictions(*trained_->bundle, *schemas_, split_->test));
}

TEST_F(Orchestrator, RejectsMissingSplits) {
  EXPECT_THROW(train_all(*schemas_, split_->train, {}, tiny_config()), TrainingError);
  EXPECT_THROW(train_all(*schemas_, {}, split_->valid, tiny_config()), TrainingError);
  EXPECT_THROW(ModelBundle::load(fs::temp_directory_path() / "flin-no-such-run"), NotFoundError);
}

TEST_F(Orchestrator, TuneMatchesExhaustiveGridSearch) {
  const auto scorers = trained_->bundle->scorers();
  const auto& valid = split_->valid;
  const auto single = tune_inference(scorers, *schemas_, valid, {0.67}, {0.4});
  EXPECT_DOUBLE_EQ(single.config.rho, 0.67);
  EXPECT_DOUBLE_EQ(single.config.alpha, 0.4);

  const std::vector<double> rhos = {0.4, 0.55, 0.67};
  const std::vector<double> alphas = {0.2, 0.4, 0.8};
  const auto tuned = tune_inference(scorers, *schemas_, valid, rhos, alphas);
  double best_ema = -1.0;
  double best_pa = -1.0;
  InferenceConfig want;
  for (double rho : rhos) {
    for (double alpha : alphas) {
      InferenceConfig cfg;
      cfg.rho = rho;
      cfg.alpha = alpha;
      const auto r = evaluate(scorers, *schemas_, valid, cfg).report;
      if (r.ema > best_ema || (r.ema == best_ema && r.pa100 > best_pa)) {
        best_ema = r.ema;
        best_pa = r.pa100;
        want = cfg;
      }
    }
  }
  EXPECT_DOUBLE_EQ(tuned.config.rho, want.rho);
  EXPECT_DOUBLE_EQ(tuned.config.alpha, want.alpha);
  EXPECT_DOUBLE_EQ(tuned.report.ema, best_ema);
  EXPECT_DOUBLE_EQ(tuned.report.pa100, best_pa);

  const auto strict = tune_inference(scorers, *schemas_, valid, {1.0}, {0.4});
  EXPECT_EQ(strict.accepted_closed, 0u);
  EXPECT_THROW(tune_inference(scorers, *schemas_, valid, {1.5}, {0.4}), ValidationError);
  EXPECT_THROW(tune_inference(scorers, *schemas_, valid, {}, {0.4}), ValidationError);
  EXPECT_THROW(tune_inference(scorers, *schemas_, {}, {0.5}, {0.4}), ValidationError);
}
