#include "flin/mention_extractor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "flin/error.hpp"
#include "flin/io.hpp"
#include "flin/log.hpp"
#include "flin/nn/adam.hpp"
#include "flin/text.hpp"

namespace flin {

using nn::Graph;
using nn::Index;
using nn::NodeId;

namespace {

constexpr const char* kCls = "[CLS]";
constexpr const char* kSep = "[SEP]";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<Index> trigram_buckets(const std::string& token, Index buckets) {
  const std::string padded = "<" + token + ">";
  std::vector<Index> out;
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    out.push_back(static_cast<Index>(fnv1a(std::string_view(padded).substr(i, 3)) % static_cast<std::uint64_t>(buckets)));
  }
  return out;
}

std::shared_ptr<const Vocabulary> with_specials(const Vocabulary& base) {
  auto v = std::make_shared<Vocabulary>(base);
  v->add(kCls);
  v->add(kSep);
  return v;
}

nlohmann::ordered_json config_json(const MentionExtractorConfig& c) {
  nlohmann::ordered_json j;
  j["max_seq_len"] = c.max_seq_len;
  j["span_max_len"] = c.span_max_len;
  j["dim"] = c.dim;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["hash_buckets"] = c.hash_buckets;
  return j;
}

std::vector<double> softmax(const nn::Matrix& logits) {
  const double m = logits.maxCoeff();
  std::vector<double> p(static_cast<std::size_t>(logits.rows()));
  double z = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) z += (p[static_cast<std::size_t>(i)] = std::exp(logits(i, 0) - m));
  for (double& x : p) x /= z;
  return p;
}

}  // namespace

MentionExtractor::MentionExtractor(std::shared_ptr<const Vocabulary> vocab, MentionExtractorConfig config,
                                   std::uint64_t seed)
    : vocab_(with_specials(*vocab)), config_(std::move(config)) {
  if (config_.dim <= 0 || config_.hidden <= 0 || config_.layers <= 0 || config_.hash_buckets <= 0) {
    throw ValidationError("mention extractor dimensions must be positive");
  }
  if (config_.max_seq_len < 4) throw ValidationError("max_seq_len must be at least 4");
  nn::Rng rng(seed);
  const Index d = config_.dim;
  nn::init_uniform(params_.add("word_embedding", d, vocab_->size()), std::sqrt(3.0 / static_cast<double>(d)), rng);
  nn::init_uniform(params_.add("ngram_embedding", d, config_.hash_buckets), std::sqrt(3.0 / static_cast<double>(d)),
                   rng);
  Index input = 4 * d + 1;
  for (Index l = 0; l < config_.layers; ++l) {
    layers_.emplace_back(params_, "encoder.l" + std::to_string(l), input, config_.hidden, rng);
    input = 2 * config_.hidden;
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(2 * config_.hidden));
  nn::init_uniform(params_.add("span.start", 2 * config_.hidden, 1), bound, rng);
  nn::init_uniform(params_.add("span.end", 2 * config_.hidden, 1), bound, rng);
  bind();
  if (!config_.encoder_init.empty()) warm_start(config_.encoder_init);
}

void MentionExtractor::bind() {
  word_embedding_ = &params_.at("word_embedding");
  ngram_embedding_ = &params_.at("ngram_embedding");
  start_vector_ = &params_.at("span.start");
  end_vector_ = &params_.at("span.end");
  layers_.clear();
  for (Index l = 0; l < config_.layers; ++l) layers_.push_back(nn::BiLstm::bind(params_, "encoder.l" + std::to_string(l)));
}

void MentionExtractor::warm_start(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "config.json");
  const Vocabulary other_vocab(io::read_json(dir / "vocab.json").get<std::vector<std::string>>());
  MentionExtractorConfig other_cfg = config_;
  other_cfg.dim = meta.at("dim").get<Index>();
  other_cfg.hidden = meta.at("hidden").get<Index>();
  other_cfg.layers = meta.at("layers").get<Index>();
  other_cfg.hash_buckets = meta.at("hash_buckets").get<Index>();
  other_cfg.encoder_init.clear();
  MentionExtractor other(std::make_shared<const Vocabulary>(other_vocab), other_cfg, 0);
  nn::load_weights(other.params_, dir / "weights.bin");
  std::size_t copied = 0;
  for (const auto& p : params_.items()) {
    if (!other.params_.contains(p->name)) continue;
    const auto& src = other.params_.at(p->name);
    if (p->name == "word_embedding") {
      if (src.value.rows() != p->value.rows()) continue;
      for (Index i = 0; i < vocab_->size(); ++i) {
        const Index j = other.vocab_->index(vocab_->token(i));
        if (j != Vocabulary::kUnknown || i == Vocabulary::kUnknown) p->value.col(i) = src.value.col(j);
      }
      ++copied;
    } else if (src.value.rows() == p->value.rows() && src.value.cols() == p->value.cols()) {
      p->value = src.value;
      ++copied;
    }
  }
  log().info("mention extractor warm-started {} tensors from {}", copied, dir.string());
}

MentionExtractor MentionExtractor::load(const std::filesystem::path& dir) {
  const auto meta = io::read_json(dir / "config.json");
  MentionExtractorConfig cfg;
  cfg.max_seq_len = meta.at("max_seq_len").get<std::size_t>();
  cfg.span_max_len = meta.at("span_max_len").get<std::size_t>();
  cfg.dim = meta.at("dim").get<Index>();
  cfg.hidden = meta.at("hidden").get<Index>();
  cfg.layers = meta.at("layers").get<Index>();
  cfg.hash_buckets = meta.at("hash_buckets").get<Index>();
  const auto tokens = io::read_json(dir / "vocab.json").get<std::vector<std::string>>();
  MentionExtractor m(std::make_shared<const Vocabulary>(tokens), cfg, 0);
  if (m.vocab_->size() != static_cast<Index>(tokens.size())) throw ParseError(dir.string() + ": vocabulary lacks specials");
  nn::load_weights(m.params_, dir / "weights.bin");
  return m;
}

void MentionExtractor::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  io::write_json(dir / "config.json", config_json(config_));
  io::write_json(dir / "vocab.json", vocab_->tokens());
  nn::save_weights(params_, dir / "weights.bin");
}

PackedSequence MentionExtractor::pack(std::string_view parameter, std::string_view command) const {
  PackedSequence seq;
  seq.tokens.push_back(kCls);
  seq.in_question.push_back(false);
  for (auto& t : text::token_texts(parameter)) {
    seq.tokens.push_back(std::move(t));
    seq.in_question.push_back(true);
  }
  seq.tokens.push_back(kSep);
  seq.in_question.push_back(false);
  if (seq.tokens.size() + 1 > config_.max_seq_len) throw ValidationError("parameter name exceeds max_seq_len");
  seq.command_begin = seq.tokens.size();
  seq.command_tokens = text::tokenize(command);
  if (seq.command_tokens.empty()) throw ValidationError("command has no tokens");
  const std::size_t room = config_.max_seq_len - seq.tokens.size();
  if (seq.command_tokens.size() > room) {
    log().warn("command truncated from {} to {} tokens", seq.command_tokens.size(), room);
    seq.command_tokens.resize(room);
    seq.truncated = true;
  }
  for (const auto& t : seq.command_tokens) {
    seq.tokens.push_back(t.text);
    seq.in_question.push_back(false);
  }
  return seq;
}

NodeId MentionExtractor::token_features(Graph& g, const std::string& token) const {
  std::vector<NodeId> grams;
  for (Index b : trigram_buckets(token, config_.hash_buckets)) grams.push_back(g.lookup(*ngram_embedding_, b));
  const NodeId parts[2] = {g.lookup(*word_embedding_, vocab_->index(token)), g.mean(grams)};
  return g.concat(parts);
}

MentionExtractor::Logits MentionExtractor::logits(Graph& g, const PackedSequence& seq) const {
  std::vector<NodeId> features;
  std::vector<NodeId> question;
  std::set<std::string> question_words;
  features.reserve(seq.tokens.size());
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    features.push_back(token_features(g, seq.tokens[i]));
    if (seq.in_question[i]) {
      question.push_back(features.back());
      question_words.insert(seq.tokens[i]);
    }
  }
  const NodeId q = question.empty() ? g.zeros(2 * config_.dim) : g.mean(question);
  std::vector<NodeId> inputs;
  inputs.reserve(features.size());
  nn::Matrix flag(1, 1);
  for (std::size_t i = 0; i < features.size(); ++i) {
    flag(0, 0) = (i >= seq.command_begin && question_words.count(seq.tokens[i]) != 0) ? 1.0 : 0.0;
    const NodeId parts[3] = {features[i], q, g.constant(flag)};
    inputs.push_back(g.concat(parts));
  }
  std::vector<NodeId> states = inputs;
  for (const auto& layer : layers_) {
    states = layer.states(g, states);
    for (auto& s : states) s = g.dropout(s, dropout);
  }
  const NodeId s_vec = g.param(*start_vector_);
  const NodeId e_vec = g.param(*end_vector_);
  std::vector<NodeId> start_scores;
  std::vector<NodeId> end_scores;
  start_scores.push_back(g.dot(s_vec, states[0]));
  end_scores.push_back(g.dot(e_vec, states[0]));
  for (std::size_t k = 0; k < seq.command_tokens.size(); ++k) {
    start_scores.push_back(g.dot(s_vec, states[seq.command_begin + k]));
    end_scores.push_back(g.dot(e_vec, states[seq.command_begin + k]));
  }
  return {g.stack(start_scores), g.stack(end_scores)};
}

NodeId MentionExtractor::loss_node(Graph& g, const PackedSequence& seq, std::size_t gold_start,
                                   std::size_t gold_end) const {
  const Logits l = logits(g, seq);
  const NodeId parts[2] = {g.neg_log_softmax(l.start, static_cast<Index>(gold_start)),
                           g.neg_log_softmax(l.end, static_cast<Index>(gold_end))};
  return g.sum(parts);
}

std::optional<std::pair<std::size_t, std::size_t>> MentionExtractor::align(const PackedSequence& seq,
                                                                           std::size_t start, std::size_t end,
                                                                           bool* snapped) {
  std::optional<std::size_t> first;
  std::optional<std::size_t> last;
  for (std::size_t k = 0; k < seq.command_tokens.size(); ++k) {
    const auto& t = seq.command_tokens[k];
    if (t.end > start && t.begin < end) {
      if (!first) first = k;
      last = k;
    }
  }
  if (!first) return std::nullopt;
  if (snapped != nullptr) {
    *snapped = seq.command_tokens[*first].begin != start || seq.command_tokens[*last].end != end;
  }
  return std::make_pair(*first + 1, *last + 1);
}

MentionPrediction MentionExtractor::extract(std::string_view parameter, std::string_view command) const {
  const PackedSequence seq = pack(parameter, command);
  Graph g;
  const Logits l = logits(g, seq);
  MentionPrediction out;
  out.start_distribution = softmax(g.value(l.start));
  out.end_distribution = softmax(g.value(l.end));
  const auto& ps = out.start_distribution;
  const std::size_t i = static_cast<std::size_t>(std::max_element(ps.begin(), ps.end()) - ps.begin());
  out.start_prob = ps[i];
  if (i == 0) {
    out.end_prob = out.end_distribution[0];
    return out;
  }
  std::size_t j = i;
  const std::size_t last = std::min(out.end_distribution.size() - 1, i + config_.span_max_len);
  for (std::size_t k = i; k <= last; ++k) {
    if (out.end_distribution[k] > out.end_distribution[j]) j = k;
  }
  out.end_prob = out.end_distribution[j];
  const auto& first_tok = seq.command_tokens[i - 1];
  const auto& last_tok = seq.command_tokens[j - 1];
  MentionSpan span;
  span.parameter = std::string(parameter);
  span.start = first_tok.begin;
  span.end = last_tok.end;
  span.text = std::string(command.substr(span.start, span.end - span.start));
  out.span = std::move(span);
  return out;
}

std::vector<MentionPrediction> MentionExtractor::extract_batch(
    std::span<const std::pair<std::string, std::string>> queries) const {
  std::vector<MentionPrediction> out;
  out.reserve(queries.size());
  for (const auto& [parameter, command] : queries) out.push_back(extract(parameter, command));
  return out;
}

std::vector<MentionRecord> mention_records(const std::vector<Example>& examples, const SchemaSet& schemas) {
  std::vector<MentionRecord> out;
  for (const auto& ex : examples) {
    const ActionSchema* action = schemas.site(ex.site_id).find_action(ex.page_id, ex.gold.action);
    if (action == nullptr) throw ValidationError("gold action \"" + ex.gold.action + "\" missing from schema");
    for (const auto& p : action->parameters) {
      MentionRecord r{p.name, ex.command, std::nullopt};
      if (const MentionSpan* m = ex.mention_for(p.name)) r.span = std::make_pair(m->start, m->end);
      out.push_back(std::move(r));
    }
  }
  return out;
}

double exact_span_accuracy(const MentionExtractor& extractor, const std::vector<MentionRecord>& records) {
  if (records.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& r : records) {
    const auto pred = extractor.extract(r.parameter, r.command);
    const bool ok = r.span ? (pred.span && pred.span->start == r.span->first && pred.span->end == r.span->second)
                           : !pred.span.has_value();
    correct += ok ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

TrainingHistory train_mention_extractor(MentionExtractor& extractor, const std::vector<Example>& train,
                                        const std::vector<Example>& valid, const SchemaSet& schemas,
                                        const TrainOptions& options) {
  if (train.empty()) throw TrainingError("mention extractor: empty training set");
  if (valid.empty()) throw TrainingError("mention extractor: empty validation set");

  struct Prepared {
    PackedSequence seq;
    std::size_t start;
    std::size_t end;
  };
  std::vector<Prepared> prepared;
  std::size_t snapped_count = 0;
  std::size_t dropped = 0;
  for (const auto& r : mention_records(train, schemas)) {
    Prepared p{extractor.pack(r.parameter, r.command), 0, 0};
    if (r.span) {
      bool snapped = false;
      const auto aligned = MentionExtractor::align(p.seq, r.span->first, r.span->second, &snapped);
      if (!aligned) {
        ++dropped;
        continue;
      }
      snapped_count += snapped ? 1 : 0;
      p.start = aligned->first;
      p.end = aligned->second;
    }
    prepared.push_back(std::move(p));
  }
  if (snapped_count > 0) log().info("mention extractor: {} gold spans snapped to token boundaries", snapped_count);
  if (dropped > 0) log().warn("mention extractor: {} gold spans outside the (truncated) command dropped", dropped);
  if (prepared.empty()) throw TrainingError("mention extractor: no training records");
  const auto valid_records = mention_records(valid, schemas);

  nn::Rng rng(options.seed);
  nn::Adam adam({.learning_rate = options.learning_rate, .l2 = options.l2});
  extractor.parameters().zero_grad();
  TrainingHistory history;
  history.best_metric = -1.0;
  std::vector<nn::Matrix> best;
  std::vector<std::size_t> order(prepared.size());
  std::iota(order.begin(), order.end(), 0);
  Graph g(true, &rng);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    extractor.dropout = options.dropout;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      for (std::size_t k = start; k < stop; ++k) {
        const Prepared& p = prepared[order[k]];
        g.clear();
        const NodeId loss = extractor.loss_node(g, p.seq, p.start, p.end);
        total += g.scalar(loss);
        g.backward(loss);
      }
      adam.step(extractor.parameters(), 1.0 / static_cast<double>(stop - start));
    }
    extractor.dropout = 0.0;
    const double acc = exact_span_accuracy(extractor, valid_records);
    EpochRecord rec{"mention", epoch, total / static_cast<double>(prepared.size()), acc, dropped};
    history.epochs.push_back(rec);
    if (acc > history.best_metric) {
      history.best_metric = acc;
      history.best_epoch = epoch;
      best = extractor.parameters().snapshot();
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  extractor.dropout = 0.0;
  if (!best.empty()) extractor.parameters().restore(best);
  return history;
}

}  // namespace flin
