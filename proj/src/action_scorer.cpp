#include "flin/action_scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "flin/error.hpp"
#include "flin/io.hpp"
#include "flin/log.hpp"
#include "flin/nn/adam.hpp"
#include "flin/text.hpp"

namespace flin {

using nn::Graph;
using nn::Index;
using nn::NodeId;

ActionScorer::ActionScorer(std::shared_ptr<const Vocabulary> vocab, Index dim, std::uint64_t seed)
    : vocab_(std::move(vocab)), dim_(dim) {
  if (dim <= 0) throw ValidationError("action scorer dimension must be positive");
  if (vocab_->size() < 2) throw ValidationError("vocabulary needs at least <pad> and <unk>");
  nn::Rng rng(seed);
  auto& emb = params_.add("word_embedding", dim, vocab_->size());
  nn::init_uniform(emb, std::sqrt(3.0 / static_cast<double>(dim)), rng);
  encoder_ = nn::BiLstm(params_, "encoder", dim, dim, rng);
  auto& w = params_.add("action_ff.W", 2 * dim, 4 * dim);
  params_.add("action_ff.b", 2 * dim, 1);
  nn::init_uniform(w, std::sqrt(6.0 / static_cast<double>(6 * dim)), rng);
  bind();
}

void ActionScorer::bind() {
  embedding_ = &params_.at("word_embedding");
  encoder_ = nn::BiLstm::bind(params_, "encoder");
  ff_weight_ = &params_.at("action_ff.W");
  ff_bias_ = &params_.at("action_ff.b");
}

ActionScorer ActionScorer::load(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "metadata.json");
  if (meta.value("kind", "") != "action_scorer") throw ParseError(dir.string() + ": not an action scorer checkpoint");
  auto vocab = std::make_shared<const Vocabulary>(meta.at("vocab").get<std::vector<std::string>>());
  ActionScorer s(vocab, meta.at("dim").get<Index>(), 0);
  nn::load_weights(s.params_, dir / "weights.bin");
  return s;
}

void ActionScorer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["kind"] = "action_scorer";
  meta["dim"] = dim_;
  meta["vocab"] = vocab_->tokens();
  io::write_json(dir / "metadata.json", meta);
  nn::save_weights(params_, dir / "weights.bin");
}

NodeId ActionScorer::text_node(Graph& g, std::string_view text) const {
  const auto ids = vocab_->encode(text);
  if (ids.empty()) throw ValidationError("text \"" + std::string(text) + "\" has no tokens");
  std::vector<NodeId> xs;
  xs.reserve(ids.size());
  for (Index id : ids) xs.push_back(g.lookup(*embedding_, id));
  return g.dropout(encoder_.encode(g, xs), dropout);
}

NodeId ActionScorer::command_node(Graph& g, std::string_view command) const { return text_node(g, command); }

NodeId ActionScorer::action_node(Graph& g, const ActionSchema& action) const {
  const NodeId name = text_node(g, action.name);
  NodeId params;
  if (action.parameters.empty()) {
    params = g.zeros(2 * dim_);
  } else {
    std::vector<NodeId> ps;
    for (const auto& p : action.parameters) ps.push_back(text_node(g, p.name));
    params = g.mean(ps);
  }
  const NodeId parts[2] = {name, params};
  return g.tanh(g.add(g.matvec(g.param(*ff_weight_), g.concat(parts)), g.param(*ff_bias_)));
}

nn::Vector ActionScorer::encode_command(std::string_view command) const {
  Graph g;
  return g.value(command_node(g, command)).col(0);
}

nn::Vector ActionScorer::encode_action(const ActionSchema& action) const {
  Graph g;
  return g.value(action_node(g, action)).col(0);
}

double ActionScorer::score(const nn::Vector& command, const nn::Vector& action) {
  const double nc = command.norm();
  const double na = action.norm();
  const double cos = (nc == 0.0 || na == 0.0) ? 0.0 : std::clamp(command.dot(action) / (nc * na), -1.0, 1.0);
  return 0.5 * (cos + 1.0);
}

double ActionScorer::score(std::string_view command, const ActionSchema& action) const {
  Graph g;
  return g.scalar(g.cosine_score(command_node(g, command), action_node(g, action)));
}

NodeId ActionScorer::ranking_loss_node(Graph& g, std::string_view command, std::span<const ActionSchema> positives,
                                       std::span<const ActionSchema> negatives) const {
  if (positives.empty()) throw ValidationError("ranking loss needs at least one positive action");
  if (negatives.empty()) return -1;
  const NodeId c = command_node(g, command);
  std::vector<NodeId> pos;
  std::vector<NodeId> neg;
  for (const auto& a : positives) pos.push_back(g.cosine_score(c, action_node(g, a)));
  for (const auto& a : negatives) neg.push_back(g.cosine_score(c, action_node(g, a)));
  std::vector<NodeId> terms;
  for (NodeId p : pos) {
    for (NodeId n : neg) terms.push_back(g.relu(g.shift(g.sub(n, p), 1.0)));
  }
  return g.sum(terms);
}

double ActionScorer::ranking_loss(std::string_view command, std::span<const ActionSchema> positives,
                                  std::span<const ActionSchema> negatives) const {
  if (negatives.empty()) {
    log().warn("action ranking loss with no negatives; loss is 0");
    return 0.0;
  }
  Graph g;
  return g.scalar(ranking_loss_node(g, command, positives, negatives));
}

double action_accuracy(const ActionScorer& scorer, const std::vector<Example>& examples, const SchemaSet& schemas) {
  if (examples.empty()) return 0.0;
  std::map<std::pair<std::string, std::string>, std::vector<nn::Vector>> cache;
  std::size_t correct = 0;
  for (const auto& ex : examples) {
    const auto& actions = actions_of(schemas.site(ex.site_id), ex.page_id);
    auto& enc = cache[{ex.site_id, ex.page_id}];
    if (enc.empty()) {
      for (const auto& a : actions) enc.push_back(scorer.encode_action(a));
    }
    const nn::Vector c = scorer.encode_command(ex.command);
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const double s = ActionScorer::score(c, enc[i]);
      if (s > best_score) {
        best_score = s;
        best = i;
      }
    }
    if (text::normalize(actions[best].name) == text::normalize(ex.gold.action)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainingHistory train_action_scorer(ActionScorer& scorer, const std::vector<Example>& train,
                                    const std::vector<Example>& valid, const SchemaSet& schemas,
                                    const TrainOptions& options) {
  if (train.empty()) throw TrainingError("action scorer: empty training set");
  if (valid.empty()) throw TrainingError("action scorer: empty validation set");
  for (const auto& ex : train) {
    if (schemas.site(ex.site_id).find_action(ex.page_id, ex.gold.action) == nullptr) {
      throw TrainingError("action scorer: gold action \"" + ex.gold.action + "\" missing from schema");
    }
  }

  nn::Rng rng(options.seed);
  nn::Adam adam({.learning_rate = options.learning_rate, .l2 = options.l2});
  scorer.parameters().zero_grad();
  scorer.dropout = options.dropout;
  TrainingHistory history;
  history.best_metric = -1.0;
  std::vector<nn::Matrix> best;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  Graph g(true, &rng);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t terms = 0;
    std::size_t skipped = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      std::size_t in_batch = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const Example& ex = train[order[k]];
        const auto& actions = actions_of(schemas.site(ex.site_id), ex.page_id);
        const ActionSchema* gold = schemas.site(ex.site_id).find_action(ex.page_id, ex.gold.action);
        std::vector<const ActionSchema*> pool;
        for (const auto& a : actions) {
          if (&a != gold) pool.push_back(&a);
        }
        if (pool.empty()) {
          ++skipped;
          continue;
        }
        const std::size_t take = std::min(options.negatives, pool.size());
        for (std::size_t i = 0; i < take; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
          std::swap(pool[i], pool[pick(rng)]);
        }
        std::vector<ActionSchema> negatives;
        for (std::size_t i = 0; i < take; ++i) negatives.push_back(*pool[i]);
        const ActionSchema positives[1] = {*gold};
        g.clear();
        const NodeId loss = scorer.ranking_loss_node(g, ex.command, positives, negatives);
        total += g.scalar(loss);
        g.backward(loss);
        ++in_batch;
        ++terms;
      }
      if (in_batch > 0) {
        adam.step(scorer.parameters(), 1.0 / static_cast<double>(in_batch));
      }
    }
    if (skipped > 0) log().info("action scorer epoch {}: {} examples had no negatives", epoch, skipped);
    scorer.dropout = 0.0;
    const double acc = action_accuracy(scorer, valid, schemas);
    scorer.dropout = options.dropout;
    EpochRecord rec{"action", epoch, terms == 0 ? 0.0 : total / static_cast<double>(terms), acc, skipped};
    history.epochs.push_back(rec);
    if (acc > history.best_metric) {
      history.best_metric = acc;
      history.best_epoch = epoch;
      best = scorer.parameters().snapshot();
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  scorer.dropout = 0.0;
  if (!best.empty()) scorer.parameters().restore(best);
  return history;
}

}  // namespace flin
