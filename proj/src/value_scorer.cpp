#include "flin/value_scorer.hpp"

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

LexicalScore lexical_similarity(std::string_view mention, std::string_view value) {
  return {text::fuzzy_ratio(mention, value), text::value_match(mention, value)};
}

CharVocabulary::CharVocabulary() {
  entries_ = {"<pad>", "<unk>"};
  for (char c = 32; c < 127; ++c) entries_.emplace_back(1, c);
}

CharVocabulary::CharVocabulary(const std::vector<std::string>& entries) : CharVocabulary() {
  if (entries != entries_) throw ParseError("unsupported character vocabulary");
}

Index CharVocabulary::index(char c) const {
  const auto u = static_cast<unsigned char>(c);
  if (u < 32 || u >= 127) return kUnknown;
  return static_cast<Index>(u - 32 + 2);
}

ValueScorer::ValueScorer(std::shared_ptr<const Vocabulary> vocab, std::shared_ptr<nn::Parameter> word_embedding,
                         ValueScorerConfig config, std::uint64_t seed)
    : vocab_(std::move(vocab)), config_(config) {
  if (word_embedding == nullptr || word_embedding->value.cols() != vocab_->size()) {
    throw ValidationError("word embedding does not match the vocabulary");
  }
  if (config_.char_dim <= 0) throw ValidationError("char_dim must be positive");
  nn::Rng rng(seed);
  const Index d = word_embedding->value.rows();
  const Index c = config_.char_dim;
  if (word_embedding->name != "word_embedding") throw ValidationError("shared embedding must be named word_embedding");
  params_.adopt(std::move(word_embedding));
  word_encoder_ = nn::BiLstm(params_, "value_word", d, d, rng);
  nn::init_uniform(params_.add("char_embedding", c, chars_.size()), std::sqrt(3.0 / static_cast<double>(c)), rng);
  char_word_encoder_ = nn::Lstm(params_, "char_word", c, c, rng);
  char_encoder_ = nn::BiLstm(params_, "value_char", c, c, rng);
  bind();
}

void ValueScorer::bind() {
  word_embedding_ = &params_.at("word_embedding");
  char_embedding_ = &params_.at("char_embedding");
  word_encoder_ = nn::BiLstm::bind(params_, "value_word");
  char_word_encoder_ = nn::Lstm::bind(params_, "char_word");
  char_encoder_ = nn::BiLstm::bind(params_, "value_char");
}

ValueScorer ValueScorer::load(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "metadata.json");
  if (meta.value("kind", "") != "value_scorer") throw ParseError(dir.string() + ": not a value scorer checkpoint");
  CharVocabulary check(io::read_json(dir / "chars.json").get<std::vector<std::string>>());
  auto vocab = std::make_shared<const Vocabulary>(meta.at("vocab").get<std::vector<std::string>>());
  auto emb = std::make_shared<nn::Parameter>("word_embedding", meta.at("dim").get<Index>(), vocab->size());
  ValueScorerConfig cfg;
  cfg.char_dim = meta.at("char_dim").get<Index>();
  cfg.four_way_mean = meta.at("four_way_mean").get<bool>();
  cfg.max_word_chars = meta.at("max_word_chars").get<std::size_t>();
  cfg.max_words = meta.at("max_words").get<std::size_t>();
  ValueScorer s(vocab, emb, cfg, 0);
  nn::load_weights(s.params_, dir / "weights.bin");
  return s;
}

void ValueScorer::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json meta;
  meta["kind"] = "value_scorer";
  meta["dim"] = word_embedding_->value.rows();
  meta["char_dim"] = config_.char_dim;
  meta["four_way_mean"] = config_.four_way_mean;
  meta["max_word_chars"] = config_.max_word_chars;
  meta["max_words"] = config_.max_words;
  meta["vocab"] = vocab_->tokens();
  io::write_json(dir / "metadata.json", meta);
  io::write_json(dir / "chars.json", chars_.entries());
  nn::save_weights(params_, dir / "weights.bin");
}

ValueScorer::Nodes ValueScorer::encode_nodes(Graph& g, std::string_view text) const {
  const auto ids = vocab_->encode(text);
  if (ids.empty()) throw ValidationError("value scorer input \"" + std::string(text) + "\" has no tokens");
  std::vector<NodeId> xs;
  for (Index id : ids) xs.push_back(g.lookup(*word_embedding_, id));
  const NodeId word = g.dropout(word_encoder_.encode(g, xs), dropout);

  auto words = text::words(text);
  if (words.size() > config_.max_words) {
    log().warn("value scorer input truncated to {} words", config_.max_words);
    words.resize(config_.max_words);
  }
  std::vector<NodeId> word_vectors;
  for (auto& w : words) {
    if (w.size() > config_.max_word_chars) {
      log().warn("word \"{}\" truncated to {} characters", w, config_.max_word_chars);
      w.resize(config_.max_word_chars);
    }
    std::vector<NodeId> cs;
    for (char c : w) cs.push_back(g.lookup(*char_embedding_, chars_.index(c)));
    word_vectors.push_back(char_word_encoder_.final_state(g, cs));
  }
  const NodeId chr = g.dropout(char_encoder_.encode(g, word_vectors), dropout);
  return {word, chr};
}

double ValueScorer::combine(double word, double chr, const LexicalScore& lex) const {
  if (config_.four_way_mean) return (word + chr + lex.fuzzy + lex.value_match) / 4.0;
  return (word + chr + 0.5 * (lex.fuzzy + lex.value_match)) / 3.0;
}

NodeId ValueScorer::net_node(Graph& g, const Nodes& mention, const Nodes& value, const LexicalScore& lex) const {
  const NodeId semantic = g.add(g.cosine_score(mention.word, value.word), g.cosine_score(mention.chr, value.chr));
  if (config_.four_way_mean) return g.shift(g.scale(semantic, 0.25), (lex.fuzzy + lex.value_match) / 4.0);
  return g.shift(g.scale(semantic, 1.0 / 3.0), 0.5 * (lex.fuzzy + lex.value_match) / 3.0);
}

ValueScorer::Encoding ValueScorer::encode(std::string_view text) const {
  Graph g;
  const Nodes n = encode_nodes(g, text);
  return {g.value(n.word).col(0), g.value(n.chr).col(0)};
}

namespace {

double half_cosine(const nn::Vector& a, const nn::Vector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  const double cos = (na == 0.0 || nb == 0.0) ? 0.0 : std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return 0.5 * (cos + 1.0);
}

}  // namespace

ValueScore ValueScorer::score(const Encoding& mention, const Encoding& value, std::string_view mention_text,
                              std::string_view value_text) const {
  ValueScore s;
  s.word = half_cosine(mention.word, value.word);
  s.chr = half_cosine(mention.chr, value.chr);
  s.lex = lexical_similarity(mention_text, value_text);
  s.net = combine(s.word, s.chr, s.lex);
  return s;
}

ValueScore ValueScorer::score(std::string_view mention, std::string_view value) const {
  return score(encode(mention), encode(value), mention, value);
}

double ValueScorer::word_similarity(std::string_view mention, std::string_view value) const {
  return half_cosine(encode(mention).word, encode(value).word);
}

double ValueScorer::char_similarity(std::string_view mention, std::string_view value) const {
  return half_cosine(encode(mention).chr, encode(value).chr);
}

NodeId ValueScorer::ranking_loss_node(Graph& g, std::string_view mention, std::string_view positive,
                                      std::span<const std::string> negatives) const {
  if (negatives.empty()) return -1;
  const Nodes m = encode_nodes(g, mention);
  const NodeId pos = net_node(g, m, encode_nodes(g, positive), lexical_similarity(mention, positive));
  std::vector<NodeId> terms;
  for (const auto& neg : negatives) {
    const NodeId n = net_node(g, m, encode_nodes(g, neg), lexical_similarity(mention, neg));
    terms.push_back(g.relu(g.shift(g.sub(n, pos), 1.0)));
  }
  return g.sum(terms);
}

double ValueScorer::ranking_loss(std::string_view mention, std::string_view positive,
                                 std::span<const std::string> negatives) const {
  if (negatives.empty()) {
    log().warn("value ranking loss with no negatives; loss is 0");
    return 0.0;
  }
  Graph g;
  return g.scalar(ranking_loss_node(g, mention, positive, negatives));
}

std::vector<ValueRecord> value_records(const std::vector<Example>& examples, const SchemaSet& schemas) {
  std::vector<ValueRecord> out;
  for (const auto& ex : examples) {
    const ActionSchema* action = schemas.site(ex.site_id).find_action(ex.page_id, ex.gold.action);
    if (action == nullptr) throw ValidationError("gold action \"" + ex.gold.action + "\" missing from schema");
    for (const auto& a : ex.gold.assignments) {
      const ParameterSpec* p = action->find_parameter(a.parameter);
      const MentionSpan* m = ex.mention_for(a.parameter);
      if (p == nullptr || !p->is_closed() || m == nullptr) continue;
      out.push_back(ValueRecord{m->text, p->name, a.value, p->domain});
    }
  }
  return out;
}

double value_accuracy(const ValueScorer& scorer, const std::vector<ValueRecord>& records) {
  if (records.empty()) return 0.0;
  std::map<std::string, ValueScorer::Encoding> cache;
  auto encoded = [&](const std::string& v) -> const ValueScorer::Encoding& {
    auto it = cache.find(v);
    if (it == cache.end()) it = cache.emplace(v, scorer.encode(v)).first;
    return it->second;
  };
  std::size_t correct = 0;
  for (const auto& r : records) {
    const auto m = scorer.encode(r.mention);
    double best = -1.0;
    const std::string* best_value = nullptr;
    for (const auto& v : r.domain) {
      const double s = scorer.score(m, encoded(v), r.mention, v).net;
      if (s > best) {
        best = s;
        best_value = &v;
      }
    }
    if (best_value != nullptr && text::normalize(*best_value) == text::normalize(r.gold)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

TrainingHistory train_value_scorer(ValueScorer& scorer, const std::vector<Example>& train,
                                   const std::vector<Example>& valid, const SchemaSet& schemas,
                                   const TrainOptions& options) {
  if (train.empty()) throw TrainingError("value scorer: empty training set");
  if (valid.empty()) throw TrainingError("value scorer: empty validation set");
  const auto records = value_records(train, schemas);
  const auto valid_records = value_records(valid, schemas);
  if (records.empty()) throw TrainingError("value scorer: no closed-domain assignments to train on");

  nn::Rng rng(options.seed);
  nn::Adam adam({.learning_rate = options.learning_rate, .l2 = options.l2});
  scorer.parameters().zero_grad();
  TrainingHistory history;
  history.best_metric = -1.0;
  std::vector<nn::Matrix> best;
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Graph g(true, &rng);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    scorer.dropout = options.dropout;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t terms = 0;
    std::size_t skipped = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      std::size_t in_batch = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const ValueRecord& r = records[order[k]];
        std::vector<std::string> pool;
        const std::string gold_key = text::normalize(r.gold);
        for (const auto& v : r.domain) {
          if (text::normalize(v) != gold_key) pool.push_back(v);
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
        pool.resize(take);
        g.clear();
        const NodeId loss = scorer.ranking_loss_node(g, r.mention, r.gold, pool);
        total += g.scalar(loss);
        g.backward(loss);
        ++in_batch;
        ++terms;
      }
      if (in_batch > 0) adam.step(scorer.parameters(), 1.0 / static_cast<double>(in_batch));
    }
    if (skipped > 0) log().info("value scorer epoch {}: {} single-value domains skipped", epoch, skipped);
    scorer.dropout = 0.0;
    const double acc = value_accuracy(scorer, valid_records);
    EpochRecord rec{"value", epoch, terms == 0 ? 0.0 : total / static_cast<double>(terms), acc, skipped};
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
