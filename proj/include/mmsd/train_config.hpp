#pragma once

#include <cstdint>

#include <json.hpp>

#include "mmsd/config.hpp"

namespace mmsd {

struct TrainConfig {
  int batch_size = 8;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double adam_epsilon = 1e-8;
  double lambda1 = 0.01;
  double lambda2 = 0.001;
  int warmup_epochs = 2;
  int epochs = 4;
  std::uint64_t seed = 0;
  bool miniature = false;

  void validate() const {
    require(batch_size > 0, "train config: batch_size must be positive");
    require(lr > 0 && beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1 && adam_epsilon > 0,
            "train config: invalid Adam settings");
    require(lambda1 >= 0 && lambda2 >= 0, "train config: loss weights must be non-negative");
    require(epochs > 0 && warmup_epochs >= 0 && warmup_epochs <= epochs,
            "train config: need 0 <= warmup_epochs <= epochs and epochs > 0");
  }
};

nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
/// Unknown keys are rejected; missing keys keep the value already in `c`.
void update_from_json(ModelConfig& c, const nlohmann::json& j);
void update_from_json(TrainConfig& c, const nlohmann::json& j);

}  // namespace mmsd
