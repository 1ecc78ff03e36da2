#include "flin/training_types.hpp"

namespace flin {

nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["component"] = r.component;
  j["epoch"] = r.epoch;
  j["train_loss"] = r.train_loss;
  j["valid_metric"] = r.valid_metric;
  j["skipped"] = r.skipped;
  return j;
}

}  // namespace flin
