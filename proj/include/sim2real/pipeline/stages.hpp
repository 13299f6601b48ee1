#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/files.hpp"
#include "sim2real/cyclegan/trainer.hpp"
#include "sim2real/evalkit/metrics.hpp"
#include "sim2real/evalkit/report.hpp"
#include "sim2real/evalkit/suite.hpp"
#include "sim2real/nn/checkpoint_io.hpp"
#include "sim2real/pipeline/config.hpp"
#include "sim2real/scenegen/dataset.hpp"
#include "sim2real/unet/trainer.hpp"

namespace sim2real::pipeline {

inline constexpr const char* kMarkerName = "stage.done";

/// Exclusive advisory lock on run_dir/.lock for the lifetime of the object.
class RunLock {
 public:
  explicit RunLock(const fs::path& run_dir) {
    fs::create_directories(run_dir);
    const auto path = run_dir / ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw StageError("run directory " + run_dir.string() + " is in use by another process");
    }
  }
  ~RunLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

struct Marker {
  std::string stage;
  std::string fingerprint;
  std::vector<std::string> outputs;  // relative to the stage directory
};

inline std::optional<Marker> read_marker(const fs::path& stage_dir) {
  const auto path = stage_dir / kMarkerName;
  if (!fs::exists(path)) return std::nullopt;
  const json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  Marker m{j.value("stage", ""), j.value("fingerprint", ""), j.value("outputs", std::vector<std::string>{})};
  return m;
}

inline void write_marker(const fs::path& stage_dir, const Marker& m) {
  for (const auto& o : m.outputs)
    if (!fs::exists(stage_dir / o)) throw StageError("stage '" + m.stage + "' did not produce declared output " + o);
  write_file_atomic(stage_dir / kMarkerName,
                    json{{"stage", m.stage}, {"fingerprint", m.fingerprint}, {"outputs", m.outputs}}.dump(2) + "\n");
}

/// A marker counts only if every output it declares is still on disk.
inline std::optional<Marker> complete_marker(const fs::path& stage_dir) {
  auto m = read_marker(stage_dir);
  if (!m) return std::nullopt;
  for (const auto& o : m->outputs)
    if (!fs::exists(stage_dir / o)) return std::nullopt;
  return m;
}

struct Options {
  bool resume = false;
  std::optional<std::size_t> cell;                  // single U-Net grid cell
  std::optional<fs::path> cyclegan_checkpoint;      // adapt input override
  std::vector<fs::path> unet_checkpoints;           // evaluate input override
};

class Pipeline {
 public:
  Pipeline(RunConfig config, fs::path run_dir, Options options)
      : config_(std::move(config)), run_dir_(std::move(run_dir)), options_(std::move(options)) {
    config_.validate();
    if (options_.cell && *options_.cell >= config_.unet.grid.size())
      throw ConfigError("--cell " + std::to_string(*options_.cell) + " is outside the " +
                        std::to_string(config_.unet.grid.size()) + "-cell grid");
  }

  const RunConfig& config() const noexcept { return config_; }
  fs::path stage_dir(const std::string& stage) const { return run_dir_ / stage; }
  fs::path cell_dir(std::size_t i) const {
    const auto& g = config_.unet.grid.at(i);
    return stage_dir("train-unet") / evalkit::config_id(g.beta, g.batch_size);
  }

  void render() {
    const json fp{{"stage", "render"},
                  {"seed", config_.seed},
                  {"scenegen", to_json(config_)["scenegen"]},
                  {"training_images", config_.cyclegan.training_images}};
    run_stage("render", fingerprint(fp), {"synthetic/manifest.jsonl", "realistic/manifest.jsonl", "source/manifest.jsonl"},
              [&](const fs::path& dir) {
                const auto& s = config_.scenegen;
                const auto n = std::size_t(config_.cyclegan.training_images);
                scenegen::build_dataset(n, scenegen::Style::Synthetic, s.ranges, s.image_size, dir / "synthetic",
                                        derive_seed(config_.seed, {tag("render-synthetic")}));
                scenegen::build_dataset(n, scenegen::Style::Realistic, s.ranges, s.image_size, dir / "realistic",
                                        derive_seed(config_.seed, {tag("render-realistic")}));
                scenegen::build_dataset(std::size_t(s.adapt_count), scenegen::Style::Synthetic, s.ranges, s.image_size,
                                        dir / "source", derive_seed(config_.seed, {tag("render-source")}));
              });
  }

  /// Realistic images composited over random backgrounds through a slightly
  /// dilated ("rough") mask, so the translator never learns a fixed backdrop.
  void prepare() {
    const auto render_fp = require("render");
    const json fp{{"stage", "prepare"}, {"render", render_fp}, {"dilation", config_.scenegen.rough_mask_dilation}};
    run_stage("prepare", fingerprint(fp), {"realistic/manifest.jsonl"}, [&](const fs::path& dir) {
      const auto src = scenegen::read_manifest(stage_dir("render") / "realistic" / "manifest.jsonl");
      scenegen::DatasetManifest out;
      out.base_dir = dir / "realistic";
      out.seed = src.seed;
      out.metadata = {{"style", "REALISTIC"}, {"backgrounds", "randomized"}};
      fs::create_directories(out.base_dir / "images");
      fs::create_directories(out.base_dir / "masks");
      out.rows = src.rows;
      parallel_for(src.size(), [&](std::size_t i) {
        const auto image = imaging::read_image(src.image_path(i));
        const auto mask = imaging::read_mask(src.mask_path(i));
        Rng rng(derive_seed(config_.seed, {tag("prepare-bg"), i}));
        const auto bg = scenegen::random_background(image.width(), image.height(), rng);
        const auto rough = imaging::dilate(mask, config_.scenegen.rough_mask_dilation);
        imaging::write_image(out.image_path(i), imaging::composite(image, rough, bg));
        fs::copy_file(src.mask_path(i), out.mask_path(i), fs::copy_options::overwrite_existing);
      });
      scenegen::write_manifest(out.base_dir / "manifest.jsonl", out);
    });
  }

  void train_cyclegan() {
    const auto render_fp = require("render");
    const auto prepare_fp = require("prepare");
    const auto cfg = config_.cyclegan_config();
    json cj = cyclegan::to_json(cfg);
    cj["seed"] = cfg.seed;
    const json fp{{"stage", "train-cyclegan"}, {"render", render_fp}, {"prepare", prepare_fp}, {"cyclegan", cj}};
    run_stage("train-cyclegan", fingerprint(fp), {"final.ckpt", "loss.csv"}, [&](const fs::path& dir) {
      const auto ms = scenegen::read_manifest(stage_dir("render") / "synthetic" / "manifest.jsonl");
      const auto mr = scenegen::read_manifest(stage_dir("prepare") / "realistic" / "manifest.jsonl");
      spdlog::info("training translator: {} iterations, {} + {} images", cfg.iterations, ms.size(), mr.size());
      cyclegan::train(cfg, ms, mr, dir);
    });
  }

  void adapt() {
    const auto render_fp = require("render");
    fs::path ckpt;
    json fp{{"stage", "adapt"}, {"render", render_fp}};
    if (options_.cyclegan_checkpoint) {
      ckpt = *options_.cyclegan_checkpoint;
      if (!fs::exists(ckpt)) throw StageError("checkpoint " + ckpt.string() + " does not exist");
    } else {
      fp["train-cyclegan"] = require("train-cyclegan");
      ckpt = stage_dir("train-cyclegan") / "final.ckpt";
    }
    fp["checkpoint"] = nn::file_digest(ckpt);
    run_stage("adapt", fingerprint(fp), {"manifest.jsonl"}, [&](const fs::path& dir) {
      const auto src = scenegen::read_manifest(stage_dir("render") / "source" / "manifest.jsonl");
      spdlog::info("translating {} synthetic images", src.size());
      cyclegan::adapt_dataset(ckpt, src, dir);
    });
  }

  /// Trains every grid cell (or the selected one). Each cell keeps its own
  /// marker; the stage marker appears once all cells are complete.
  void train_unet() {
    const auto adapt_fp = require("adapt");
    const auto dir = stage_dir("train-unet");
    fs::create_directories(dir);
    std::error_code ec;
    fs::remove(dir / kMarkerName, ec);

    std::vector<std::string> cell_fps;
    for (std::size_t i = 0; i < config_.unet.grid.size(); ++i) {
      const auto tc = config_.train_config(i);
      const auto cdir = cell_dir(i);
      const std::string fp = fingerprint({{"stage", "train-unet"},
                                          {"adapt", adapt_fp},
                                          {"spec", unet::to_json(config_.unet.spec)},
                                          {"train", unet::to_json(tc)},
                                          {"augment", to_json(config_)["augment"]}});
      cell_fps.push_back(fp);
      if (options_.cell && *options_.cell != i) continue;
      run_in(cdir, "train-unet/" + cdir.filename().string(), fp, {"best.ckpt", "final.ckpt", "loss.csv"},
             [&](const fs::path& out) {
               const auto m = scenegen::read_manifest(stage_dir("adapt") / "manifest.jsonl");
               spdlog::info("training segmenter {}: beta={}, batch={}, {} epochs", i + 1, tc.adam_beta1, tc.batch_size,
                            tc.epochs);
               unet::train(tc, config_.unet.spec, m, config_.augmentation(), out);
             });
    }
    for (std::size_t i = 0; i < cell_fps.size(); ++i) {
      const auto m = complete_marker(cell_dir(i));
      if (!m || m->fingerprint != cell_fps[i]) return;
    }
    write_marker(dir, {"train-unet", fingerprint({{"cells", cell_fps}}), {}});
  }

  void evaluate() {
    const auto render_fp = require("render");
    struct Target {
      std::string id, label;
      fs::path checkpoint;
    };
    std::vector<Target> targets;
    json fp{{"stage", "evaluate"}, {"render", render_fp}, {"evalkit", to_json(config_)["evalkit"]},
            {"scenegen", to_json(config_)["scenegen"]}};
    if (!options_.unet_checkpoints.empty()) {
      for (const auto& p : options_.unet_checkpoints) {
        if (!fs::exists(p)) throw StageError("checkpoint " + p.string() + " does not exist");
        const auto m = unet::SegmentationModel::load(p);
        targets.push_back({evalkit::config_id(m->config.adam_beta1, m->config.batch_size),
                           p.filename().string(), p});
      }
    } else {
      for (std::size_t i = 0; i < config_.unet.grid.size(); ++i) {
        if (options_.cell && *options_.cell != i) continue;
        const auto cdir = cell_dir(i);
        if (!complete_marker(cdir))
          throw StageError("stage 'train-unet' has not completed cell " + cdir.filename().string() + " under " +
                           run_dir_.string() + "; run `train-unet` first");
        const auto& g = config_.unet.grid[i];
        targets.push_back({evalkit::config_id(g.beta, g.batch_size), evalkit::config_label(int(i) + 1, g.beta, g.batch_size),
                           cdir / (config_.evalkit.checkpoint + ".ckpt")});
      }
    }
    json ck = json::array();
    for (const auto& t : targets) ck.push_back({t.id, t.label, nn::file_digest(t.checkpoint)});
    fp["checkpoints"] = ck;

    run_stage("evaluate", fingerprint(fp), {"report.csv", "report.md"}, [&](const fs::path& dir) {
      const auto& e = config_.evalkit;
      const int size = config_.scenegen.image_size;
      const auto suite = evalkit::build_test_suite(
          config_.scenegen.ranges, evalkit::organ_pool(std::size_t(e.background_pool), size, derive_seed(config_.seed, {tag("organ")})),
          heavy_pipeline(), derive_seed(config_.seed, {tag("evalkit")}), std::size_t(e.images_per_tier), size, dir / "suite");
      std::vector<scenegen::DatasetManifest> training;
      for (const char* sub : {"synthetic", "realistic", "source"})
        training.push_back(scenegen::read_manifest(stage_dir("render") / sub / "manifest.jsonl"));
      evalkit::require_disjoint_seeds(suite, {&training[0], &training[1], &training[2]});

      std::vector<evalkit::EvalReport> reports;
      fs::create_directories(dir / "reports");
      for (const auto& t : targets) {
        const auto model = unet::SegmentationModel::load(t.checkpoint);
        const double threshold = config_.unet.threshold;
        auto predictor = [&](const imaging::RasterImage& img) { return unet::binarize(unet::predict(*model, img), threshold); };
        std::vector<std::pair<std::string, evalkit::EvalResult>> results;
        for (auto tier : evalkit::kAllTiers) {
          auto r = evalkit::evaluate(predictor, suite[tier]);
          for (const auto& f : r.failures) spdlog::warn("{} {} row {}: {}", t.id, evalkit::tier_name(tier), f.row, f.message);
          results.emplace_back(evalkit::tier_name(tier), std::move(r));
        }
        auto report = evalkit::make_report(t.id, t.label, config_hash(config_), nn::file_digest(t.checkpoint), std::move(results));
        evalkit::verify_report(report);
        write_file_atomic(dir / "reports" / (t.id + ".json"), evalkit::to_json(report).dump(2) + "\n");
        spdlog::info("{}: overall IoU {}", t.label, evalkit::format_percent(report.overall));
        reports.push_back(std::move(report));
      }
      evalkit::report(reports, dir);
    });
  }

  void all() {
    render();
    prepare();
    train_cyclegan();
    adapt();
    train_unet();
    evaluate();
  }

  augment::AugmentationPipeline heavy_pipeline() const {
    auto p = evalkit::heavy_pipeline(derive_seed(config_.seed, {tag("heavy")}));
    for (auto& s : p.specs)
      if (s.probability > 0) s.probability = config_.evalkit.heavy_probability;
    return p;
  }

 private:
  static std::string fingerprint(const json& j) { return fnv1a_hex(j.dump()); }

  /// Fingerprint of a completed predecessor, or an error naming it.
  std::string require(const std::string& stage) const {
    const auto m = complete_marker(stage_dir(stage));
    if (!m)
      throw StageError("stage '" + stage + "' has not completed under " + run_dir_.string() + "; run `" + stage +
                       "` first");
    return m->fingerprint;
  }

  void run_stage(const std::string& stage, const std::string& fp, std::vector<std::string> outputs,
                 const std::function<void(const fs::path&)>& body) {
    run_in(stage_dir(stage), stage, fp, std::move(outputs), body);
  }

  void run_in(const fs::path& dir, const std::string& stage, const std::string& fp, std::vector<std::string> outputs,
              const std::function<void(const fs::path&)>& body) {
    if (options_.resume) {
      if (const auto m = complete_marker(dir); m && m->fingerprint == fp) {
        spdlog::info("{}: complete, skipping", stage);
        return;
      }
    }
    spdlog::info("{}: starting", stage);
    fs::remove_all(dir);
    fs::create_directories(dir);
    body(dir);
    write_marker(dir, {stage, fp, std::move(outputs)});
    spdlog::info("{}: done", stage);
  }

  RunConfig config_;
  fs::path run_dir_;
  Options options_;
};

}  // namespace sim2real::pipeline
