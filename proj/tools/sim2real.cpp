// Command-line front end: one subcommand per pipeline stage.
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sim2real/pipeline/stages.hpp"

namespace fs = std::filesystem;
using namespace sim2real;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kStageFailure = 3, kNumericDivergence = 4 };

void setup_logging(const fs::path& run_dir) {
  auto console = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>((run_dir / "log.txt").string());
  auto logger = std::make_shared<spdlog::logger>("sim2real", spdlog::sinks_init_list{console, file});
  logger->set_pattern("%Y-%m-%dT%H:%M:%S.%e%z [%l] %v");
  logger->flush_on(spdlog::level::info);
  spdlog::set_default_logger(logger);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sim-to-real segmentation pipeline"};
  app.require_subcommand(1);

  std::string config_path, run_dir_arg, cyclegan_ckpt;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides, unet_ckpts;
  std::optional<std::size_t> cell;
  bool resume = false;

  app.add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
  app.add_option("--run-dir", run_dir_arg, "Run directory (overrides run_dir in the config)");
  app.add_option("--seed", seed, "Global seed (overrides seed in the config)");
  app.add_option("--set", overrides, "Override a config value: section.key=value")->take_all();
  app.add_flag("--resume", resume, "Skip stages whose outputs are already complete");

  const std::pair<const char*, const char*> stages[] = {
      {"render", "Render synthetic and realistic training sets"},
      {"prepare", "Composite realistic images over random backgrounds"},
      {"train-cyclegan", "Train the synthetic-to-realistic translator"},
      {"adapt", "Translate the synthetic source set, keeping its masks"},
      {"train-unet", "Train the segmenter for each (beta, batch size) grid cell"},
      {"evaluate", "Build the three test tiers and report IoU"},
      {"pipeline", "Run every stage in order, skipping completed ones"}};
  for (const auto& [name, help] : stages) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "adapt") sub->add_option("--checkpoint", cyclegan_ckpt, "Translator checkpoint to use");
    if (std::string(name) == "train-unet" || std::string(name) == "evaluate")
      sub->add_option("--cell", cell, "Only this 0-based grid cell");
    if (std::string(name) == "evaluate") sub->add_option("--checkpoint", unet_ckpts, "Segmenter checkpoint(s) to evaluate");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  pipeline::RunConfig config;
  fs::path run_dir;
  try {
    nlohmann::json doc = config_path.empty() ? nlohmann::json::object() : pipeline::load_config_document(config_path);
    for (const auto& o : overrides) pipeline::apply_override(doc, o);
    if (seed) doc["seed"] = *seed;
    config = pipeline::run_config_from_json(doc);
    run_dir = run_dir_arg.empty() ? fs::path(config.run_dir) : fs::path(run_dir_arg);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  }

  try {
    pipeline::RunLock lock(run_dir);
    setup_logging(run_dir);
    pipeline::Options options;
    options.resume = resume || command == "pipeline";
    options.cell = cell;
    if (!cyclegan_ckpt.empty()) options.cyclegan_checkpoint = cyclegan_ckpt;
    for (const auto& p : unet_ckpts) options.unet_checkpoints.emplace_back(p);
    pipeline::Pipeline p(config, run_dir, options);
    spdlog::info("{} in {} (config {})", command, run_dir.string(), pipeline::config_hash(config));

    if (command == "render") p.render();
    else if (command == "prepare") p.prepare();
    else if (command == "train-cyclegan") p.train_cyclegan();
    else if (command == "adapt") p.adapt();
    else if (command == "train-unet") p.train_unet();
    else if (command == "evaluate") p.evaluate();
    else p.all();
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfigError;
  } catch (const NumericError& e) {
    spdlog::error("numeric divergence: {}", e.what());
    return kNumericDivergence;
  } catch (const std::exception& e) {
    spdlog::error("stage failed: {}", e.what());
    return kStageFailure;
  }
  return kOk;
}
