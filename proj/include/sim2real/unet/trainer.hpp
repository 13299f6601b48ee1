#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/augment/pipeline.hpp"
#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/imaging/png_io.hpp"
#include "sim2real/nn/adam.hpp"
#include "sim2real/nn/checkpoint_io.hpp"
#include "sim2real/scenegen/manifest.hpp"
#include "sim2real/unet/loss.hpp"
#include "sim2real/unet/model.hpp"

namespace sim2real::unet {

namespace fs = std::filesystem;
using nlohmann::json;

struct SegTrainConfig {
  double adam_beta1 = 0.5;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double adam_beta2 = 0.999;
  int epochs = 50;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(adam_beta1 > 0 && adam_beta1 < 1)) throw ConfigError("unet: beta must lie in (0, 1)");
    if (batch_size < 1) throw ConfigError("unet: batch size must be at least 1");
    if (!(learning_rate >= 0)) throw ConfigError("unet: learning rate must be non-negative");
    if (epochs < 0) throw ConfigError("unet: epochs must be non-negative");
    if (!(threshold > 0 && threshold < 1)) throw ConfigError("unet: threshold must lie in (0, 1)");
  }
};

inline json to_json(const UNetSpec& s) { return {{"depth", s.depth}, {"base_channels", s.base_channels}}; }
inline json to_json(const SegTrainConfig& c) {
  return {{"adam_beta1", c.adam_beta1}, {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
          {"adam_beta2", c.adam_beta2}, {"epochs", c.epochs},         {"threshold", c.threshold},
          {"seed", c.seed}};
}

/// Trained (or freshly initialized) segmenter plus the settings it was built with.
struct SegmentationModel {
  UNetSpec spec;
  SegTrainConfig config;
  UNet<float> net;

  SegmentationModel(UNetSpec s, SegTrainConfig c) : spec(s), config(c), net(s) {
    Rng rng(derive_seed(c.seed, {tag("unet-init")}));
    net.init(rng);
  }

  void save(const fs::path& path, int epoch) {
    nn::CheckpointWriter w("unet", json{{"spec", to_json(spec)}, {"train", to_json(config)}, {"epoch", epoch}});
    w.add_params("", net.parameters());
    w.save(path);
  }

  static std::unique_ptr<SegmentationModel> load(const fs::path& path) {
    nn::CheckpointReader r(path);
    if (r.kind() != "unet") throw IoError(path.string() + ": not a segmentation checkpoint");
    const auto& s = r.meta().at("spec");
    const auto& t = r.meta().at("train");
    UNetSpec spec{s.at("depth").get<int>(), s.at("base_channels").get<int>()};
    SegTrainConfig c;
    c.adam_beta1 = t.at("adam_beta1").get<double>();
    c.batch_size = t.at("batch_size").get<int>();
    c.learning_rate = t.at("learning_rate").get<double>();
    c.adam_beta2 = t.at("adam_beta2").get<double>();
    c.epochs = t.at("epochs").get<int>();
    c.threshold = t.at("threshold").get<double>();
    c.seed = t.at("seed").get<std::uint64_t>();
    auto m = std::make_unique<SegmentationModel>(spec, c);
    r.load_params("", m->net.parameters());
    return m;
  }
};

/// Foreground probabilities as a 1 x 1 x H x W tensor.
using ProbabilityMap = Tensor<float>;

/// Nearest size at or above `divisor` that the network accepts.
inline int nearest_valid_size(int size, int divisor) {
  return std::max(divisor, int(std::lround(double(size) / divisor)) * divisor);
}

/// Inference with the resize policy: inputs whose sides are not multiples of
/// 2^depth are bilinearly resized to the nearest valid size; the probability
/// map is brought back to the original size by nearest-neighbour sampling.
inline ProbabilityMap predict(const SegmentationModel& model, const imaging::RasterImage& image) {
  const int div = model.spec.divisor();
  const int w = nearest_valid_size(image.width(), div), h = nearest_valid_size(image.height(), div);
  const auto input = imaging::resize_bilinear(image, w, h);
  const ProbabilityMap p = model.net.forward(imaging::normalize(input));
  if (w == image.width() && h == image.height()) return p;
  ProbabilityMap out(1, 1, image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    const int sy = std::min(int((y + 0.5) * h / image.height()), h - 1);
    for (int x = 0; x < image.width(); ++x) {
      const int sx = std::min(int((x + 0.5) * w / image.width()), w - 1);
      out.at(0, 0, y, x) = p.at(0, 0, sy, sx);
    }
  }
  return out;
}

/// Pixels with probability >= threshold are foreground.
inline imaging::BinaryMask binarize(const ProbabilityMap& p, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ParameterError("binarize: threshold must lie in (0, 1)");
  imaging::BinaryMask m(p.w, p.h);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) m.set(x, y, double(p.at(0, 0, y, x)) >= threshold);
  return m;
}

inline Tensor<float> mask_tensor(const std::vector<const imaging::BinaryMask*>& masks) {
  Tensor<float> t(int(masks.size()), 1, masks.front()->height(), masks.front()->width());
  for (std::size_t n = 0; n < masks.size(); ++n)
    for (std::size_t i = 0; i < masks[n]->pixels(); ++i) t.sample(int(n))[i] = (*masks[n])[i] ? 1.0f : 0.0f;
  return t;
}

struct SegTrainResult {
  fs::path best_checkpoint;
  fs::path final_checkpoint;
  fs::path loss_csv;
  std::vector<double> epoch_losses;
};

inline constexpr const char* kSegLossCsvHeader = "epoch,step,loss";

/// Adam training over augmented mini-batches. Each epoch reshuffles with a
/// seed-derived order and augments each sample with an rng keyed by
/// (pipeline seed, epoch, sample index). Writes run_dir/loss.csv (one row per
/// epoch: epoch, cumulative step count, mean batch loss), best.ckpt and final.ckpt.
inline SegTrainResult train(const SegTrainConfig& config, const UNetSpec& spec, const scenegen::DatasetManifest& manifest,
                            const augment::AugmentationPipeline& pipeline, const fs::path& run_dir) {
  config.validate();
  spec.validate();
  pipeline.validate();
  if (manifest.empty()) throw StageError("segmentation training needs a nonempty manifest");

  std::vector<imaging::RasterImage> images;
  std::vector<imaging::BinaryMask> masks;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    images.push_back(imaging::read_image(manifest.image_path(i)));
    masks.push_back(imaging::read_mask(manifest.mask_path(i)));
    imaging::require_same_dims(images.back(), masks.back(), "segmentation training sample");
    if (images.back().width() % spec.divisor() || images.back().height() % spec.divisor())
      throw ShapeError("training image size must be divisible by " + std::to_string(spec.divisor()));
  }

  fs::create_directories(run_dir);
  SegTrainResult result{run_dir / "best.ckpt", run_dir / "final.ckpt", run_dir / "loss.csv", {}};
  SegmentationModel model(spec, config);
  nn::Adam<float> opt(model.net.parameters(), {config.learning_rate, config.adam_beta1, config.adam_beta2, 1e-8});

  std::ofstream csv(result.loss_csv, std::ios::trunc);
  if (!csv) throw IoError("cannot open " + result.loss_csv.string());
  csv << kSegLossCsvHeader << '\n';

  const std::size_t n = images.size();
  std::vector<std::size_t> order(n);
  double best = std::numeric_limits<double>::infinity();
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {tag("unet-shuffle"), std::uint64_t(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<augment::AugmentResult> samples;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        Rng rng(derive_seed(pipeline.master_seed, {std::uint64_t(epoch), idx}));
        samples.push_back(augment::apply_pipeline(images[idx], masks[idx], pipeline, rng));
      }
      std::vector<const imaging::RasterImage*> ip;
      std::vector<const imaging::BinaryMask*> mp;
      for (const auto& s : samples) {
        ip.push_back(&s.image);
        mp.push_back(&s.mask);
      }
      Tensor<float> x(int(ip.size()), 3, ip.front()->height(), ip.front()->width());
      for (std::size_t k = 0; k < ip.size(); ++k) {
        const auto t = imaging::normalize(*ip[k]);
        std::copy(t.data.begin(), t.data.end(), x.sample(int(k)));
      }
      const auto truth = mask_tensor(mp);

      typename UNet<float>::Cache cache;
      nn::zero_grads(model.net.parameters());
      const auto prob = model.net.forward(x, cache);
      const double loss = segmentation_loss(prob, truth);
      model.net.backward_from_logits(cache, segmentation_loss_logit_grad(prob, truth));
      opt.step();
      epoch_loss += loss;
      ++batches;
      ++step;
    }
    epoch_loss /= std::max(1, batches);
    result.epoch_losses.push_back(epoch_loss);
    char row[128];
    std::snprintf(row, sizeof row, "%d,%ld,%.9g", epoch, step, epoch_loss);
    csv << row << '\n';
    csv.flush();
    if (epoch_loss < best) {
      best = epoch_loss;
      model.save(result.best_checkpoint, epoch);
    }
  }
  if (config.epochs == 0) model.save(result.best_checkpoint, 0);
  model.save(result.final_checkpoint, config.epochs);
  return result;
}

}  // namespace sim2real::unet
