#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/strict_json.hpp"

namespace sim2real::cyclegan {

using nlohmann::json;

/// Translation-model hyperparameters. The first ten fields carry the published
/// training setup; the rest size the networks for a given run.
struct CycleGanConfig {
  int training_images = 2000;
  int iterations = 30000;
  std::string normalization = "instance";
  int batch_size = 1;
  std::string optimizer = "adam";
  double generator_lr = 2e-4;
  double discriminator_lr = 2e-5;
  double adam_beta1 = 0.5;
  int pool_size = 50;
  double cycle_lambda = 10.0;

  double adam_beta2 = 0.999;
  int image_size = 128;
  double channel_width_scale = 1.0;
  int base_channels = 64;
  int downsampling = 2;
  int residual_blocks = 6;
  int discriminator_layers = 3;
  int checkpoint_interval = 1000;
  std::uint64_t seed = 0;

  /// Base channel count after width scaling (at least 1).
  int scaled_channels() const { return std::max(1, int(std::lround(base_channels * channel_width_scale))); }

  void validate() const {
    if (normalization != "instance") throw ConfigError("cyclegan.normalization: only 'instance' is supported");
    if (optimizer != "adam") throw ConfigError("cyclegan.optimizer: only 'adam' is supported");
    if (!(generator_lr > 0) || !(discriminator_lr > 0)) throw ConfigError("cyclegan: learning rates must be positive");
    if (!(cycle_lambda >= 0)) throw ConfigError("cyclegan.cycle_lambda must be non-negative");
    if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
      throw ConfigError("cyclegan: Adam betas must lie in (0, 1)");
    if (batch_size < 1 || iterations < 0 || training_images < 0 || pool_size < 0 || checkpoint_interval < 1)
      throw ConfigError("cyclegan: counts out of range");
    if (!(channel_width_scale > 0)) throw ConfigError("cyclegan.channel_width_scale must be positive");
    if (residual_blocks < 0 || downsampling < 0 || discriminator_layers < 1 || base_channels < 1)
      throw ConfigError("cyclegan: invalid network topology");
    if (image_size <= 0 || image_size % (1 << downsampling) != 0)
      throw ConfigError("cyclegan.image_size must be a positive multiple of 2^downsampling");
  }
};

inline json to_json(const CycleGanConfig& c) {
  return json{{"training_images", c.training_images},
              {"iterations", c.iterations},
              {"normalization", c.normalization},
              {"batch_size", c.batch_size},
              {"optimizer", c.optimizer},
              {"generator_lr", c.generator_lr},
              {"discriminator_lr", c.discriminator_lr},
              {"adam_beta1", c.adam_beta1},
              {"pool_size", c.pool_size},
              {"cycle_lambda", c.cycle_lambda},
              {"adam_beta2", c.adam_beta2},
              {"image_size", c.image_size},
              {"channel_width_scale", c.channel_width_scale},
              {"base_channels", c.base_channels},
              {"downsampling", c.downsampling},
              {"residual_blocks", c.residual_blocks},
              {"discriminator_layers", c.discriminator_layers},
              {"checkpoint_interval", c.checkpoint_interval}};
}

/// Strict parse of the `cyclegan` config section over the given defaults.
inline CycleGanConfig cyclegan_config_from_json(const json& j, CycleGanConfig c = {}) {
  StrictObject o(j, "cyclegan");
  o.read("training_images", c.training_images);
  o.read("iterations", c.iterations);
  o.read("normalization", c.normalization);
  o.read("batch_size", c.batch_size);
  o.read("optimizer", c.optimizer);
  o.read("generator_lr", c.generator_lr);
  o.read("discriminator_lr", c.discriminator_lr);
  o.read("adam_beta1", c.adam_beta1);
  o.read("pool_size", c.pool_size);
  o.read("cycle_lambda", c.cycle_lambda);
  o.read("adam_beta2", c.adam_beta2);
  o.read("image_size", c.image_size);
  o.read("channel_width_scale", c.channel_width_scale);
  o.read("base_channels", c.base_channels);
  o.read("downsampling", c.downsampling);
  o.read("residual_blocks", c.residual_blocks);
  o.read("discriminator_layers", c.discriminator_layers);
  o.read("checkpoint_interval", c.checkpoint_interval);
  o.finish();
  return c;
}

}  // namespace sim2real::cyclegan
