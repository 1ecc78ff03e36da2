#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "flin/dataset.hpp"
#include "flin/nn/graph.hpp"
#include "flin/nn/parameters.hpp"
#include "flin/schema.hpp"
#include "flin/training_orchestrator.hpp"

namespace flin::testing {

inline std::filesystem::path data_dir() { return FLIN_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("flin-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ParameterSpec closed(std::string name, std::vector<std::string> domain) {
  return ParameterSpec{std::move(name), ParameterKind::closed, std::move(domain), std::nullopt};
}

inline ParameterSpec open(std::string name) { return ParameterSpec{std::move(name), ParameterKind::open, {}, std::nullopt}; }

inline ActionSchema action(std::string name, std::vector<ParameterSpec> params, std::string page = "home") {
  return ActionSchema{std::move(name), std::move(params), std::move(page)};
}

/// Home page with "let's go" (time, date, people closed; search term open)
/// and "sign in".
inline SiteSchema opentable_schema() {
  SiteSchema s;
  s.site_id = "opentable";
  s.domain_tag = DomainTag::restaurants;
  s.pages.push_back(Page{"home",
                         {action("let's go", {closed("time", {"18:00", "19:00", "20:00"}),
                                              closed("date", {"today", "tomorrow"}),
                                              closed("people", {"1 person", "2 people", "3 people"}),
                                              open("location, restaurant, or cuisine")}),
                          action("sign in", {})}});
  return s;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/// Compares analytic gradients of a scalar loss against central differences.
/// `build` must construct the loss on a fresh (non-training) graph and return
/// its node. At most `per_tensor` random entries of each tensor are probed
/// (all entries when per_tensor is 0).
inline GradCheck check_gradients(nn::ParameterSet& params, const std::function<nn::NodeId(nn::Graph&)>& build,
                                 std::mt19937_64& rng, std::size_t per_tensor = 0, double h = 1e-5) {
  params.zero_grad();
  {
    nn::Graph g;
    const nn::NodeId loss = build(g);
    g.backward(loss);
  }
  auto eval = [&] {
    nn::Graph g;
    return g.scalar(build(g));
  };
  GradCheck out;
  for (const auto& p : params.items()) {
    const auto n = static_cast<std::size_t>(p->value.size());
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (per_tensor > 0 && per_tensor < n) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(per_tensor);
    }
    for (std::size_t i : idx) {
      double& w = p->value.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = eval();
      w = saved - h;
      const double down = eval();
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = p->name + "[" + std::to_string(i) + "] analytic=" + std::to_string(analytic) +
                    " numeric=" + std::to_string(numeric);
      }
    }
  }
  params.zero_grad();
  return out;
}

/// Generated examples for the bundled toy restaurant site.
struct SiteData {
  SchemaSet schemas;
  Split split;
};

inline SiteData site_data(const std::string& site, std::size_t count, std::uint64_t seed,
                          std::array<double, 3> ratios = {0.75, 0.125, 0.125}) {
  const std::filesystem::path d = data_dir() / site;
  const SiteSchema schema = load_site_schema(d / "schema.json");
  SiteData out;
  out.schemas.add(schema);
  const auto all =
      generate(schema, load_templates(d / "templates.jsonl"), load_paraphrases(d / "paraphrases.json"), count, seed);
  out.split = split(all, ratios, seed);
  return out;
}

/// Small enough to train all three components in well under a second.
inline TrainingConfig tiny_training_config() {
  TrainingConfig c;
  c.dim = 8;
  c.mention.layers = 1;
  c.mention.hash_buckets = 256;
  c.epochs_action = 1;
  c.epochs_mention = 1;
  c.epochs_value = 1;
  c.batch_size = 20;
  c.learning_rate = 5e-3;
  c.seed = 1;
  return c;
}

}  // namespace flin::testing
