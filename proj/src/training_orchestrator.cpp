#include "flin/training_orchestrator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "flin/error.hpp"
#include "flin/io.hpp"
#include "flin/log.hpp"
#include "flin/vocabulary.hpp"

namespace flin {

namespace fs = std::filesystem;

namespace {

const std::set<std::string> kConfigKeys = {"batch_size", "epochs_action", "epochs_mention", "epochs_value",
                                           "n_negatives", "dropout", "dim", "learning_rate", "l2", "seed",
                                           "mention", "value", "inference", "merged_domains"};

std::uint64_t component_seed(std::uint64_t seed, std::uint64_t k) { return seed + k * 0x9E3779B97F4A7C15ULL; }

std::string_view component_name(Component c) {
  switch (c) {
    case Component::action: return "action";
    case Component::mention: return "mention";
    case Component::value: return "value";
  }
  return "action";
}

fs::path checkpoint_dir(const fs::path& run, Component c) { return run / component_name(c) / "checkpoint"; }

bool has_checkpoint(const fs::path& run, Component c) {
  const fs::path dir = checkpoint_dir(run, c);
  return fs::exists(dir / "weights.bin") && (fs::exists(dir / "metadata.json") || fs::exists(dir / "config.json"));
}

// Writes into a sibling directory and renames it into place so an interrupted
// save never looks like a finished checkpoint.
template <typename Model>
void save_checkpoint(const Model& model, const fs::path& run, Component c) {
  const fs::path dir = checkpoint_dir(run, c);
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  model.save(tmp);
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

std::string examples_blob(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json(ex).dump();
    out += '\n';
  }
  return out;
}

TrainOptions options_for(const TrainingConfig& c, int epochs, std::uint64_t k, const EpochCallback& cb) {
  TrainOptions o;
  o.epochs = epochs;
  o.batch_size = c.batch_size;
  o.negatives = c.n_negatives;
  o.learning_rate = c.learning_rate;
  o.l2 = c.l2;
  o.dropout = c.dropout;
  o.seed = component_seed(c.seed, k);
  o.on_epoch = cb;
  return o;
}

template <typename Model>
void check_finite(const Model& m, Component c) {
  if (!m.parameters().all_finite()) {
    throw TrainingError(std::string(component_name(c)) + " training diverged: non-finite weights");
  }
}

// Memoizing decorators used to replay component scores across grid cells.
// Single-threaded use only.
class MemoAction final : public ActionScoring {
 public:
  explicit MemoAction(const ActionScoring& inner) : inner_(inner) {}
  double action_score(std::string_view command, const ActionSchema& action) const override {
    std::string key(command);
    key += '\x1f';
    key += action.name;
    for (const auto& p : action.parameters) (key += '\x1e') += p.name;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, inner_.action_score(command, action)).first;
    return it->second;
  }

 private:
  const ActionScoring& inner_;
  mutable std::map<std::string, double> cache_;
};

class MemoMention final : public MentionExtraction {
 public:
  explicit MemoMention(const MentionExtraction& inner) : inner_(inner) {}
  std::optional<MentionSpan> mention(std::string_view parameter, std::string_view command) const override {
    std::string key(parameter);
    (key += '\x1f') += command;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, inner_.mention(parameter, command)).first;
    return it->second;
  }

 private:
  const MentionExtraction& inner_;
  mutable std::map<std::string, std::optional<MentionSpan>> cache_;
};

class MemoValue final : public ValueScoring {
 public:
  explicit MemoValue(const ValueScoring& inner) : inner_(inner) {}
  double value_score(std::string_view mention, std::string_view value) const override {
    const std::string v(value);
    return value_scores(mention, std::span<const std::string>(&v, 1)).front();
  }
  std::vector<double> value_scores(std::string_view mention, std::span<const std::string> domain) const override {
    std::string key(mention);
    for (const auto& v : domain) (key += '\x1f') += v;
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, inner_.value_scores(mention, domain)).first;
    return it->second;
  }

 private:
  const ValueScoring& inner_;
  mutable std::map<std::string, std::vector<double>> cache_;
};

std::size_t accepted_closed(const std::vector<ParseResult>& results) {
  std::size_t n = 0;
  for (const auto& r : results) {
    if (!r.prediction) continue;
    for (const auto& c : r.trace) {
      if (c.action != r.prediction->instruction.action) continue;
      for (const auto& p : c.parameters) n += p.status == AssignmentStatus::accepted ? 1 : 0;
      break;
    }
  }
  return n;
}

}  // namespace

MentionExtractorConfig TrainingConfig::resolved_mention() const {
  MentionExtractorConfig m = mention;
  if (m.dim == 0) m.dim = dim;
  if (m.hidden == 0) m.hidden = dim;
  return m;
}

ValueScorerConfig TrainingConfig::resolved_value() const {
  ValueScorerConfig v = value;
  if (v.char_dim == 0) v.char_dim = dim;
  return v;
}

void TrainingConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("training config: ") + what);
  };
  require(batch_size > 0, "batch_size must be positive");
  require(epochs_action > 0 && epochs_mention > 0 && epochs_value > 0, "epoch counts must be positive");
  require(n_negatives > 0, "n_negatives must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(dim > 0, "dim must be positive");
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(l2 >= 0.0, "l2 must be non-negative");
  require(mention.dim >= 0 && mention.hidden >= 0 && mention.layers > 0 && mention.hash_buckets > 0,
          "mention sizes must be positive");
  require(value.char_dim >= 0, "value.char_dim must be non-negative");
  require(inference.rho >= 0.0 && inference.rho <= 1.0, "inference.rho must lie in [0, 1]");
  require(inference.alpha >= 0.0 && inference.alpha <= 1.0, "inference.alpha must lie in [0, 1]");
}

nlohmann::ordered_json to_json(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["epochs_action"] = c.epochs_action;
  j["epochs_mention"] = c.epochs_mention;
  j["epochs_value"] = c.epochs_value;
  j["n_negatives"] = c.n_negatives;
  j["dropout"] = c.dropout;
  j["dim"] = c.dim;
  j["learning_rate"] = c.learning_rate;
  j["l2"] = c.l2;
  j["seed"] = c.seed;
  j["mention"] = {{"dim", c.mention.dim},
                  {"hidden", c.mention.hidden},
                  {"layers", c.mention.layers},
                  {"hash_buckets", c.mention.hash_buckets},
                  {"max_seq_len", c.mention.max_seq_len},
                  {"span_max_len", c.mention.span_max_len},
                  {"encoder_init", c.mention.encoder_init}};
  j["value"] = {{"char_dim", c.value.char_dim},
                {"four_way_mean", c.value.four_way_mean},
                {"max_word_chars", c.value.max_word_chars},
                {"max_words", c.value.max_words}};
  j["inference"] = to_json(c.inference);
  j["merged_domains"] = c.merged_domains;
  return j;
}

TrainingConfig training_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("training config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kConfigKeys.contains(key)) throw ParseError("training config: unknown key \"" + key + "\"");
  }
  TrainingConfig c;
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs_action = j.value("epochs_action", c.epochs_action);
    c.epochs_mention = j.value("epochs_mention", c.epochs_mention);
    c.epochs_value = j.value("epochs_value", c.epochs_value);
    c.n_negatives = j.value("n_negatives", c.n_negatives);
    c.dropout = j.value("dropout", c.dropout);
    c.dim = j.value("dim", c.dim);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.l2 = j.value("l2", c.l2);
    c.seed = j.value("seed", c.seed);
    if (j.contains("mention")) {
      const auto& m = j.at("mention");
      c.mention.dim = m.value("dim", c.mention.dim);
      c.mention.hidden = m.value("hidden", c.mention.hidden);
      c.mention.layers = m.value("layers", c.mention.layers);
      c.mention.hash_buckets = m.value("hash_buckets", c.mention.hash_buckets);
      c.mention.max_seq_len = m.value("max_seq_len", c.mention.max_seq_len);
      c.mention.span_max_len = m.value("span_max_len", c.mention.span_max_len);
      c.mention.encoder_init = m.value("encoder_init", c.mention.encoder_init);
    }
    if (j.contains("value")) {
      const auto& v = j.at("value");
      c.value.char_dim = v.value("char_dim", c.value.char_dim);
      c.value.four_way_mean = v.value("four_way_mean", c.value.four_way_mean);
      c.value.max_word_chars = v.value("max_word_chars", c.value.max_word_chars);
      c.value.max_words = v.value("max_words", c.value.max_words);
    }
    if (j.contains("inference")) c.inference = inference_config_from_json(j.at("inference"));
    c.merged_domains = j.value("merged_domains", c.merged_domains);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainingConfig load_training_config(const fs::path& path) {
  try {
    return training_config_from_json(io::read_json(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json to_json(const Provenance& p) {
  return {{"config_hash", p.config_hash}, {"dataset_hash", p.dataset_hash}, {"seed", p.seed}};
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

Provenance provenance_of(const TrainingConfig& config, const std::vector<Example>& train,
                         const std::vector<Example>& valid, const SchemaSet& schemas) {
  std::string data = "train\n" + examples_blob(train) + "valid\n" + examples_blob(valid) + "schemas\n";
  for (const auto& site : schemas.sites()) data += to_json(site).dump() + '\n';
  return Provenance{sha256_hex(to_json(config).dump()), sha256_hex(data), config.seed};
}

ModelBundle::ModelBundle(std::shared_ptr<const ActionScorer> action, std::shared_ptr<const MentionExtractor> mention,
                         std::shared_ptr<const ValueScorer> value, InferenceConfig inference, Provenance provenance)
    : action_(std::move(action)),
      mention_(std::move(mention)),
      value_(std::move(value)),
      inference_(inference),
      provenance_(std::move(provenance)),
      action_scoring_(*action_),
      mention_extraction_(*mention_),
      value_scoring_(*value_) {}

std::shared_ptr<ModelBundle> ModelBundle::load(const fs::path& run_dir) {
  for (Component c : {Component::action, Component::mention, Component::value}) {
    if (!has_checkpoint(run_dir, c)) {
      throw NotFoundError(run_dir.string() + ": missing " + std::string(component_name(c)) + " checkpoint");
    }
  }
  auto action = std::make_shared<const ActionScorer>(ActionScorer::load(checkpoint_dir(run_dir, Component::action)));
  auto mention =
      std::make_shared<const MentionExtractor>(MentionExtractor::load(checkpoint_dir(run_dir, Component::mention)));
  auto value = std::make_shared<const ValueScorer>(ValueScorer::load(checkpoint_dir(run_dir, Component::value)));
  InferenceConfig inference;
  if (fs::exists(run_dir / "inference.json")) inference = inference_config_from_json(io::read_json(run_dir / "inference.json"));
  Provenance prov;
  if (fs::exists(run_dir / "dataset-manifest.json")) {
    const auto m = io::read_json(run_dir / "dataset-manifest.json");
    prov.config_hash = m.value("config_hash", "");
    prov.dataset_hash = m.value("dataset_hash", "");
    prov.seed = m.value("seed", std::uint64_t{0});
  }
  return std::make_shared<ModelBundle>(std::move(action), std::move(mention), std::move(value), inference,
                                       std::move(prov));
}

ParseResult ModelBundle::parse(const SiteSchema& schema, std::string_view page_id, std::string_view command) const {
  return parse(schema, page_id, command, inference_);
}

ParseResult ModelBundle::parse(const SiteSchema& schema, std::string_view page_id, std::string_view command,
                               const InferenceConfig& config) const {
  return flin::parse(scorers(), schema, page_id, command, config);
}

TrainAllResult train_all(const SchemaSet& schemas, const std::vector<Example>& train,
                         const std::vector<Example>& valid, const TrainingConfig& config,
                         const RunOptions& options) {
  config.validate();
  if (train.empty()) throw TrainingError("empty training split");
  if (valid.empty()) throw TrainingError("missing or empty validation split");
  std::set<DomainTag> domains;
  for (const auto* part : {&train, &valid}) {
    for (const auto& ex : *part) {
      validate_example(ex, schemas.site(ex.site_id));
      domains.insert(schemas.site(ex.site_id).domain_tag);
    }
  }
  if (domains.size() > 1 && !config.merged_domains) {
    throw ValidationError("training data spans several domains; set merged_domains to train one bundle");
  }

  const Provenance prov = provenance_of(config, train, valid, schemas);
  TrainAllResult result;
  auto record = [&](const EpochRecord& r) {
    result.history.push_back(r);
    if (options.run_dir) {
      std::ofstream out(*options.run_dir / "history.jsonl", std::ios::app);
      out << to_json(r).dump() << '\n';
    }
    if (options.on_epoch) options.on_epoch(r);
  };

  if (options.run_dir) {
    const fs::path& run = *options.run_dir;
    fs::create_directories(run);
    if (fs::exists(run / "dataset-manifest.json")) {
      const auto m = io::read_json(run / "dataset-manifest.json");
      if (m.value("config_hash", "") != prov.config_hash || m.value("dataset_hash", "") != prov.dataset_hash) {
        throw ValidationError(run.string() + " holds a run with a different config or dataset");
      }
    }
    io::write_json(run / "config.json", to_json(config));
    nlohmann::ordered_json manifest = to_json(prov);
    manifest["train_count"] = train.size();
    manifest["valid_count"] = valid.size();
    nlohmann::ordered_json sites = nlohmann::ordered_json::array();
    for (const auto& site : schemas.sites()) sites.push_back(site.site_id);
    manifest["sites"] = std::move(sites);
    io::write_json(run / "dataset-manifest.json", manifest);
  }

  auto wanted = [&](Component c) {
    return std::find(options.components.begin(), options.components.end(), c) != options.components.end();
  };
  auto resumable = [&](Component c) { return options.run_dir && has_checkpoint(*options.run_dir, c); };

  auto vocab = std::make_shared<const Vocabulary>(build_word_vocabulary(train, schemas));

  std::shared_ptr<ActionScorer> action;
  if (resumable(Component::action)) {
    action = std::make_shared<ActionScorer>(ActionScorer::load(checkpoint_dir(*options.run_dir, Component::action)));
    vocab = action->shared_vocabulary();
    log().info("resumed action scorer from {}", options.run_dir->string());
  } else if (wanted(Component::action)) {
    action = std::make_shared<ActionScorer>(vocab, config.dim, component_seed(config.seed, 1));
    train_action_scorer(*action, train, valid, schemas, options_for(config, config.epochs_action, 2, record));
    check_finite(*action, Component::action);
    if (options.run_dir) save_checkpoint(*action, *options.run_dir, Component::action);
  }

  std::shared_ptr<MentionExtractor> mention;
  if (resumable(Component::mention)) {
    mention = std::make_shared<MentionExtractor>(
        MentionExtractor::load(checkpoint_dir(*options.run_dir, Component::mention)));
    log().info("resumed mention extractor from {}", options.run_dir->string());
  } else if (wanted(Component::mention)) {
    mention = std::make_shared<MentionExtractor>(vocab, config.resolved_mention(), component_seed(config.seed, 3));
    train_mention_extractor(*mention, train, valid, schemas, options_for(config, config.epochs_mention, 4, record));
    check_finite(*mention, Component::mention);
    if (options.run_dir) save_checkpoint(*mention, *options.run_dir, Component::mention);
  }

  std::shared_ptr<ValueScorer> value;
  if (resumable(Component::value)) {
    value = std::make_shared<ValueScorer>(ValueScorer::load(checkpoint_dir(*options.run_dir, Component::value)));
    log().info("resumed value scorer from {}", options.run_dir->string());
  } else if (wanted(Component::value)) {
    if (!action) throw TrainingError("value scorer needs a trained action scorer for its word embedding");
    // The value scorer fine-tunes its own copy so the selected action scorer
    // stays as validated.
    auto embedding = std::make_shared<nn::Parameter>(*action->word_embedding());
    embedding->grad.setZero();
    embedding->adam_m.resize(0, 0);
    embedding->adam_v.resize(0, 0);
    value = std::make_shared<ValueScorer>(action->shared_vocabulary(), embedding, config.resolved_value(),
                                          component_seed(config.seed, 5));
    train_value_scorer(*value, train, valid, schemas, options_for(config, config.epochs_value, 6, record));
    check_finite(*value, Component::value);
    if (options.run_dir) save_checkpoint(*value, *options.run_dir, Component::value);
  }

  if (!action || !mention || !value) return result;
  if (options.run_dir) io::write_json(*options.run_dir / "inference.json", to_json(config.inference));
  result.bundle = std::make_shared<ModelBundle>(action, mention, value, config.inference, prov);
  return result;
}

Evaluation evaluate(const Scorers& scorers, const SchemaSet& schemas, const std::vector<Example>& examples,
                    const InferenceConfig& config) {
  if (examples.empty()) throw ValidationError("cannot evaluate an empty example set");
  Evaluation out;
  std::vector<EvalPair> pairs;
  out.results.reserve(examples.size());
  pairs.reserve(examples.size());
  for (const auto& ex : examples) {
    out.results.push_back(parse(scorers, schemas.site(ex.site_id), ex.page_id, ex.command, config));
    const auto& pred = out.results.back().prediction;
    pairs.emplace_back(ex.gold, pred ? std::optional<NavigationInstruction>(pred->instruction) : std::nullopt);
  }
  out.report = report(pairs, examples, schemas);
  return out;
}

TuneResult tune_inference(const Scorers& scorers, const SchemaSet& schemas, const std::vector<Example>& valid,
                          const std::vector<double>& rho_grid, const std::vector<double>& alpha_grid,
                          const InferenceConfig& base) {
  if (valid.empty()) throw ValidationError("tune_inference: empty validation set");
  if (rho_grid.empty() || alpha_grid.empty()) throw ValidationError("tune_inference: empty grid");
  for (const auto* grid : {&rho_grid, &alpha_grid}) {
    for (double v : *grid) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("tune_inference: grid values must lie in [0, 1]");
    }
  }
  MemoAction action(scorers.action);
  MemoMention mention(scorers.mention);
  MemoValue value(scorers.value);
  const Scorers memo{action, mention, value};

  std::optional<TuneResult> best;
  for (double rho : rho_grid) {
    for (double alpha : alpha_grid) {
      InferenceConfig cfg = base;
      cfg.rho = rho;
      cfg.alpha = alpha;
      Evaluation ev = evaluate(memo, schemas, valid, cfg);
      TuneResult cell{cfg, ev.report, accepted_closed(ev.results)};
      log().debug("tune rho={} alpha={}: EMA {:.4f} PA-100 {:.4f}", rho, alpha, ev.report.ema, ev.report.pa100);
      auto better = [&] {
        if (!best) return true;
        const auto& b = *best;
        if (cell.report.ema != b.report.ema) return cell.report.ema > b.report.ema;
        if (cell.report.pa100 != b.report.pa100) return cell.report.pa100 > b.report.pa100;
        if (cell.config.rho != b.config.rho) return cell.config.rho < b.config.rho;
        return cell.config.alpha < b.config.alpha;
      };
      if (better()) best = std::move(cell);
    }
  }
  std::size_t closed_gold = 0;
  for (const auto& ex : valid) {
    const ActionSchema* a = schemas.site(ex.site_id).find_action(ex.page_id, ex.gold.action);
    for (const auto& asg : ex.gold.assignments) {
      const ParameterSpec* p = a == nullptr ? nullptr : a->find_parameter(asg.parameter);
      closed_gold += (p != nullptr && p->is_closed()) ? 1 : 0;
    }
  }
  if (best->accepted_closed == 0 && closed_gold > 0) {
    log().warn("rho={} rejects every closed-domain value; EMA is 0 on commands with closed-domain gold parameters",
               best->config.rho);
  }
  return *best;
}

}  // namespace flin
