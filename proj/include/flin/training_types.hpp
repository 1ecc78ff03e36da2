#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace flin {

struct EpochRecord {
  std::string component;  // "action", "mention" or "value"
  int epoch = 0;
  double train_loss = 0.0;
  double valid_metric = 0.0;  // component-specific selection metric
  std::size_t skipped = 0;    // training records that produced no loss term
};

nlohmann::ordered_json to_json(const EpochRecord& r);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Optimization settings shared by the three component trainers.
struct TrainOptions {
  int epochs = 1;
  std::size_t batch_size = 50;
  std::size_t negatives = 1;  // N1
  double learning_rate = 1e-4;
  double l2 = 1e-3;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  EpochCallback on_epoch;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_metric = 0.0;
};

}  // namespace flin
