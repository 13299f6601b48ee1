#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/augment/pipeline.hpp"
#include "sim2real/core/errors.hpp"
#include "sim2real/core/files.hpp"
#include "sim2real/core/strict_json.hpp"
#include "sim2real/cyclegan/config.hpp"
#include "sim2real/scenegen/scene.hpp"
#include "sim2real/unet/model.hpp"
#include "sim2real/unet/trainer.hpp"

namespace sim2real::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kConfigVersion = 1;

struct SceneSection {
  int image_size = 128;
  scenegen::SceneRanges ranges;
  int adapt_count = 2500;          // synthetic images minted into the adapted set
  int rough_mask_dilation = 1;     // pixels added around realistic masks before compositing
};

struct AugmentSection {
  std::vector<augment::AugmentationSpec> specs = augment::AugmentationPipeline::defaults().specs;
};

struct GridCell {
  double beta = 0.5;
  int batch_size = 8;
  bool operator==(const GridCell&) const = default;
};

/// The momentum / batch-size cells of the published U-Net experiments.
inline std::vector<GridCell> default_grid() { return {{0.5, 8}, {0.75, 4}, {0.99, 8}}; }

struct UNetSection {
  unet::UNetSpec spec;
  double learning_rate = 1e-4;
  double adam_beta2 = 0.999;
  int epochs = 50;
  double threshold = 0.5;
  std::vector<GridCell> grid = default_grid();
};

struct EvalSection {
  int images_per_tier = 200;
  int background_pool = 200;
  double heavy_probability = 0.6;
  std::string checkpoint = "final";  // "final" or "best"
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  std::string run_dir = "runs/default";
  SceneSection scenegen;
  AugmentSection augment;
  cyclegan::CycleGanConfig cyclegan;
  UNetSection unet;
  EvalSection evalkit;

  void validate() const {
    if (version != kConfigVersion) throw ConfigError("config version " + std::to_string(version) + " is not supported");
    if (scenegen.image_size < 16) throw ConfigError("scenegen.image_size must be at least 16");
    scenegen.ranges.validate();
    if (scenegen.adapt_count < 1) throw ConfigError("scenegen.adapt_count must be positive");
    if (scenegen.rough_mask_dilation < 0) throw ConfigError("scenegen.rough_mask_dilation must be non-negative");
    for (const auto& s : augment.specs) s.validate();
    cyclegan.validate();
    if (cyclegan.image_size != scenegen.image_size)
      throw ConfigError("cyclegan.image_size must equal scenegen.image_size");
    if (cyclegan.training_images < 1) throw ConfigError("cyclegan.training_images must be positive");
    unet.spec.validate();
    if (scenegen.image_size % unet.spec.divisor())
      throw ConfigError("scenegen.image_size must be divisible by 2^unet.depth");
    if (unet.grid.empty()) throw ConfigError("unet.grid must not be empty");
    for (std::size_t i = 0; i < unet.grid.size(); ++i) train_config(i).validate();
    if (evalkit.images_per_tier < 1) throw ConfigError("evalkit.images_per_tier must be positive");
    if (evalkit.background_pool < 1) throw ConfigError("evalkit.background_pool must be positive");
    if (!(evalkit.heavy_probability >= 0 && evalkit.heavy_probability <= 1))
      throw ConfigError("evalkit.heavy_probability must lie in [0, 1]");
    if (evalkit.checkpoint != "final" && evalkit.checkpoint != "best")
      throw ConfigError("evalkit.checkpoint must be 'final' or 'best'");
  }

  /// Settings for grid cell i, with its own seed.
  unet::SegTrainConfig train_config(std::size_t i) const {
    const auto& cell = unet.grid.at(i);
    unet::SegTrainConfig c;
    c.adam_beta1 = cell.beta;
    c.batch_size = cell.batch_size;
    c.learning_rate = unet.learning_rate;
    c.adam_beta2 = unet.adam_beta2;
    c.epochs = unet.epochs;
    c.threshold = unet.threshold;
    c.seed = derive_seed(seed, {tag("unet"), i});
    return c;
  }

  augment::AugmentationPipeline augmentation() const { return {augment.specs, derive_seed(seed, {tag("augment")})}; }

  cyclegan::CycleGanConfig cyclegan_config() const {
    auto c = cyclegan;
    c.seed = derive_seed(seed, {tag("cyclegan")});
    return c;
  }
};

inline json range_to_json(const scenegen::Range& r) { return json::array({r.min, r.max}); }

inline scenegen::Range range_from_json(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ConfigError("config key '" + key + "' must be a [min, max] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void read_range(StrictObject& o, const char* key, scenegen::Range& r) {
  if (const json* v = o.child(key)) r = range_from_json(*v, o.qualified(key));
}

inline json to_json(const RunConfig& c) {
  const auto& r = c.scenegen.ranges;
  json ops = json::object();
  for (const auto& s : c.augment.specs) {
    json o{{"probability", s.probability}, {"range", range_to_json(s.range)}, {"range2", range_to_json(s.range2)}};
    if (s.op == augment::Op::ChannelInvert) o["channels"] = s.channels;
    ops[augment::op_name(s.op)] = o;
  }
  json grid = json::array();
  for (const auto& g : c.unet.grid) grid.push_back({{"beta", g.beta}, {"batch_size", g.batch_size}});
  return {{"version", c.version},
          {"seed", c.seed},
          {"run_dir", c.run_dir},
          {"scenegen",
           {{"image_size", c.scenegen.image_size},
            {"position_x", range_to_json(r.position_x)},
            {"position_y", range_to_json(r.position_y)},
            {"rotation_deg", range_to_json(r.rotation_deg)},
            {"scale", range_to_json(r.scale)},
            {"joint_deg", range_to_json(r.joint_deg)},
            {"light_deg", range_to_json(r.light_deg)},
            {"adapt_count", c.scenegen.adapt_count},
            {"rough_mask_dilation", c.scenegen.rough_mask_dilation}}},
          {"augment", {{"ops", ops}}},
          {"cyclegan", cyclegan::to_json(c.cyclegan)},
          {"unet",
           {{"depth", c.unet.spec.depth},
            {"base_channels", c.unet.spec.base_channels},
            {"learning_rate", c.unet.learning_rate},
            {"adam_beta2", c.unet.adam_beta2},
            {"epochs", c.unet.epochs},
            {"threshold", c.unet.threshold},
            {"grid", grid}}},
          {"evalkit",
           {{"images_per_tier", c.evalkit.images_per_tier},
            {"background_pool", c.evalkit.background_pool},
            {"heavy_probability", c.evalkit.heavy_probability},
            {"checkpoint", c.evalkit.checkpoint}}}};
}

/// Strict parse: every key must be known; absent keys keep their defaults.
inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictObject top(j, "");
  top.read("version", c.version);
  top.read("seed", c.seed);
  top.read("run_dir", c.run_dir);

  if (const json* s = top.child("scenegen")) {
    StrictObject o(*s, "scenegen");
    o.read("image_size", c.scenegen.image_size);
    read_range(o, "position_x", c.scenegen.ranges.position_x);
    read_range(o, "position_y", c.scenegen.ranges.position_y);
    read_range(o, "rotation_deg", c.scenegen.ranges.rotation_deg);
    read_range(o, "scale", c.scenegen.ranges.scale);
    read_range(o, "joint_deg", c.scenegen.ranges.joint_deg);
    read_range(o, "light_deg", c.scenegen.ranges.light_deg);
    o.read("adapt_count", c.scenegen.adapt_count);
    o.read("rough_mask_dilation", c.scenegen.rough_mask_dilation);
    o.finish();
  }

  if (const json* s = top.child("augment")) {
    StrictObject o(*s, "augment");
    if (const json* ops = o.child("ops")) {
      StrictObject ops_obj(*ops, "augment.ops");
      for (auto& spec : c.augment.specs) {
        const char* name = augment::op_name(spec.op);
        const json* op = ops_obj.child(name);
        if (!op) continue;
        StrictObject oo(*op, ops_obj.qualified(name));
        oo.read("probability", spec.probability);
        read_range(oo, "range", spec.range);
        read_range(oo, "range2", spec.range2);
        if (spec.op == augment::Op::ChannelInvert) oo.read("channels", spec.channels);
        oo.finish();
      }
      ops_obj.finish();
    }
    o.finish();
  }

  bool cyclegan_size_given = false;
  if (const json* s = top.child("cyclegan")) {
    c.cyclegan = cyclegan::cyclegan_config_from_json(*s, c.cyclegan);
    cyclegan_size_given = s->contains("image_size");
  }
  if (!cyclegan_size_given) c.cyclegan.image_size = c.scenegen.image_size;

  if (const json* s = top.child("unet")) {
    StrictObject o(*s, "unet");
    o.read("depth", c.unet.spec.depth);
    o.read("base_channels", c.unet.spec.base_channels);
    o.read("learning_rate", c.unet.learning_rate);
    o.read("adam_beta2", c.unet.adam_beta2);
    o.read("epochs", c.unet.epochs);
    o.read("threshold", c.unet.threshold);
    if (const json* g = o.child("grid")) {
      if (!g->is_array()) throw ConfigError("config key 'unet.grid' must be an array");
      c.unet.grid.clear();
      for (std::size_t i = 0; i < g->size(); ++i) {
        GridCell cell;
        StrictObject co((*g)[i], "unet.grid[" + std::to_string(i) + "]");
        co.read("beta", cell.beta);
        co.read("batch_size", cell.batch_size);
        co.finish();
        c.unet.grid.push_back(cell);
      }
    }
    o.finish();
  }

  if (const json* s = top.child("evalkit")) {
    StrictObject o(*s, "evalkit");
    o.read("images_per_tier", c.evalkit.images_per_tier);
    o.read("background_pool", c.evalkit.background_pool);
    o.read("heavy_probability", c.evalkit.heavy_probability);
    o.read("checkpoint", c.evalkit.checkpoint);
    o.finish();
  }
  top.finish();
  c.validate();
  return c;
}

/// Applies one `section.key=value` override to a raw config document. The
/// value is taken as JSON when it parses, otherwise as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

inline json load_config_document(const fs::path& path) {
  const std::string text = read_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return doc;
}

/// Hash of everything that shapes a run's outputs (the run directory excluded).
inline std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("run_dir");
  return fnv1a_hex(j.dump());
}

}  // namespace sim2real::pipeline
