// Acceptance runner: executes each criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit status is non-zero if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sim2real/augment/ops.hpp"
#include "sim2real/augment/pipeline.hpp"
#include "sim2real/cyclegan/image_pool.hpp"
#include "sim2real/cyclegan/losses.hpp"
#include "sim2real/cyclegan/trainer.hpp"
#include "sim2real/evalkit/metrics.hpp"
#include "sim2real/evalkit/suite.hpp"
#include "sim2real/pipeline/config.hpp"
#include "sim2real/unet/loss.hpp"
#include "sim2real/unet/model.hpp"

namespace fs = std::filesystem;
using namespace sim2real;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

struct Context {
  fs::path repo, work, cli;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <typename S>
Tensor<S> random_tensor(std::mt19937_64& rng, int n, int c, int h, int w, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor<S> t(n, c, h, w);
  for (auto& v : t.data) v = S(d(rng));
  return t;
}

imaging::BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
  imaging::BinaryMask m(w, h);
  std::bernoulli_distribution b(density);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, b(rng));
  return m;
}

int run_cli(const Context& ctx, const std::string& args, const fs::path& log) {
  const std::string cmd = ctx.cli.string() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int fresh_pipeline(const Context& ctx, const std::string& config, const fs::path& run_dir) {
  fs::remove_all(run_dir);
  fs::create_directories(run_dir.parent_path());
  return run_cli(ctx, "--config " + (ctx.repo / "configs" / config).string() + " --run-dir " + run_dir.string() + " pipeline",
                 run_dir.string() + ".log");
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).string();
    if (rel == "log.txt" || rel == ".lock") continue;
    files[rel] = read_file(e.path());
  }
  return files;
}

// Relative error with a floor so that gradients that are both ~0 compare as equal.
double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

/// Central differences on `count` parameters drawn uniformly from `ps`.
template <typename Objective>
double worst_fd_error(const nn::ParamList<double>& ps, Objective objective, int count, std::mt19937_64& rng) {
  std::size_t total = nn::count_parameters(ps);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  double worst = 0.0;
  const double h = 1e-6;
  for (int k = 0; k < count; ++k) {
    std::size_t idx = pick(rng), j = 0;
    while (idx >= ps[j]->size()) idx -= ps[j++]->size();
    auto& v = ps[j]->value[idx];
    const double keep = v;
    v = keep + h;
    const double up = objective();
    v = keep - h;
    const double down = objective();
    v = keep;
    worst = std::max(worst, rel_error((up - down) / (2 * h), ps[j]->grad[idx]));
  }
  return worst;
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence(const Context&) {
  Outcome o;
  std::mt19937_64 rng(2026);
  constexpr int kTrials = 200;

  int iou_bad = 0;
  for (int t = 0; t < kTrials; ++t) {
    const int w = 1 + int(rng() % 8), h = 1 + int(rng() % 8);
    const double density = t % 10 == 0 ? 0.0 : 0.4;
    const auto a = random_mask(rng, w, h, density), b = random_mask(rng, w, h, t % 20 == 0 ? 0.0 : 0.4);
    std::size_t inter = 0, uni = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        inter += a.at(x, y) && b.at(x, y);
        uni += a.at(x, y) || b.at(x, y);
      }
    const double expect = uni == 0 ? 1.0 : double(inter) / double(uni);
    iou_bad += imaging::iou(a, b) != expect;
  }
  o.require(iou_bad == 0, "iou exact on " + std::to_string(kTrials) + " masks (" + std::to_string(iou_bad) + " mismatches)");

  double cyc = 0, seg = 0, adv = 0, agg = 0;
  for (int t = 0; t < kTrials; ++t) {
    const int c = 1 + int(rng() % 3), hh = 1 + int(rng() % 4), ww = 1 + int(rng() % 4);
    const auto a = random_tensor<float>(rng, 1, c, hh, ww), b = random_tensor<float>(rng, 1, c, hh, ww);
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(double(a.data[i]) - double(b.data[i]));
    cyc = std::max(cyc, std::abs(cyclegan::cycle_loss(a, b) - s / a.size()));

    const auto p = random_tensor<float>(rng, 1, 1, hh, ww, 0.0, 1.0);
    Tensor<float> truth(1, 1, hh, ww);
    for (auto& v : truth.data) v = rng() & 1 ? 1.0f : 0.0f;
    s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double q = std::clamp(double(p.data[i]), 1e-7, 1 - 1e-7);
      s += truth.data[i] ? -std::log(q) : -std::log(1 - q);
    }
    seg = std::max(seg, std::abs(unet::segmentation_loss(p, truth) - s / p.size()));

    const auto real = random_tensor<float>(rng, 1, 1, hh, ww, -2, 2), fake = random_tensor<float>(rng, 1, 1, hh, ww, -2, 2);
    double dr = 0, df = 0, g = 0;
    for (std::size_t i = 0; i < real.size(); ++i) {
      dr += (real.data[i] - 1.0) * (real.data[i] - 1.0);
      df += double(fake.data[i]) * fake.data[i];
      g += (fake.data[i] - 1.0) * (fake.data[i] - 1.0);
    }
    const auto l = cyclegan::adversarial_losses(real, fake);
    const double n = double(real.size());
    adv = std::max({adv, std::abs(l.disc_loss - (0.5 * dr / n + 0.5 * df / n)), std::abs(l.gen_loss - g / n)});

    std::vector<double> vals(1 + rng() % 50);
    for (auto& v : vals) v = std::uniform_real_distribution<double>(0, 1)(rng);
    long double sum = 0;
    for (double v : vals) sum += v;
    const long double mean = sum / vals.size();
    long double ss = 0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double sd = vals.size() > 1 ? double(std::sqrt(ss / (vals.size() - 1))) : 0.0;
    const auto a2 = evalkit::aggregate(vals);
    agg = std::max({agg, std::abs(a2.mean - double(mean)), std::abs(a2.std - sd)});
  }
  o.require(cyc <= 1e-6, fmt("cycle_loss max error %.3g", cyc));
  o.require(seg <= 1e-6, fmt("segmentation_loss max error %.3g", seg));
  o.require(adv <= 1e-6, fmt("adversarial_losses max error %.3g", adv));
  o.require(agg <= 1e-12, fmt("aggregate max error %.3g", agg));
  o.note(fmt("%d instances each; max errors cycle %.2g, seg %.2g", kTrials, cyc, seg) +
         fmt(", adversarial %.2g, aggregate %.2g", adv, agg));
  return o;
}

Outcome gradient_checks(const Context&) {
  Outcome o;
  std::mt19937_64 rng(2026);

  cyclegan::CycleGanConfig c;
  c.image_size = 16;
  c.channel_width_scale = 1.0 / 16;
  c.residual_blocks = 1;
  c.discriminator_layers = 2;
  cyclegan::CycleGanModel<double> m(c);
  m.init(3);
  const auto s = random_tensor<double>(rng, 1, 3, 16, 16), r = random_tensor<double>(rng, 1, 3, 16, 16);
  cyclegan::generator_pass(m, s, r);
  const double gen = worst_fd_error(m.generator_parameters(), [&] { return cyclegan::generator_objective(m, s, r).total_gen; },
                                    20, rng);
  const auto fs_ = random_tensor<double>(rng, 1, 3, 16, 16), fr = random_tensor<double>(rng, 1, 3, 16, 16);
  cyclegan::discriminator_pass(m, s, r, fs_, fr);
  const double disc = worst_fd_error(
      m.discriminator_parameters(),
      [&] {
        const auto [a, b] = cyclegan::discriminator_objective(m, s, r, fs_, fr);
        return a + b;
      },
      20, rng);

  unet::UNet<double> net({2, 8});
  Rng init(5);
  net.init(init);
  const auto x = random_tensor<double>(rng, 2, 3, 8, 8);
  Tensor<double> t(2, 1, 8, 8);
  for (auto& v : t.data) v = rng() % 3 == 0 ? 1.0 : 0.0;
  typename unet::UNet<double>::Cache cache;
  const auto p = net.forward(x, cache);
  nn::zero_grads(net.parameters());
  net.backward_from_logits(cache, unet::segmentation_loss_logit_grad(p, t));
  const double seg = worst_fd_error(net.parameters(), [&] { return unet::segmentation_loss(net.forward(x), t); }, 20, rng);

  o.require(gen < 1e-3, fmt("CycleGAN generator objective: worst relative error %.3g", gen));
  o.require(disc < 1e-3, fmt("CycleGAN discriminator objective: worst relative error %.3g", disc));
  o.require(seg < 1e-3, fmt("U-Net segmentation loss: worst relative error %.3g", seg));
  o.note(fmt("20 params each, worst rel error: generator %.2g, discriminator %.2g, U-Net %.2g", gen, disc, seg));
  return o;
}

Outcome augmentation_suite(const Context&) {
  using namespace augment;
  Outcome o;
  std::mt19937_64 gen(2026);
  imaging::RasterImage img(64, 48);
  for (auto& v : img.data()) v = std::uint8_t(gen());
  const auto mask = random_mask(gen, 64, 48, 0.3);
  Rng rng(1);

  // Identity settings.
  o.require(channel_add(img, 0) == img, "channel_add(0) identity");
  o.require(multiply(img, 1.0) == img, "multiply(1) identity");
  o.require(contrast_normalize(img, 1.0) == img, "contrast_normalize(1) identity");
  o.require(salt_pepper(img, 0.0, rng) == img, "salt_pepper(0) identity");
  o.require(edge_blur(img, 0.0) == img, "edge_blur(0) identity");
  o.require(black_patches(img, 0, 8, rng) == img, "black_patches(0) identity");
  const auto [ei, em] = elastic_transform(img, mask, 0.0, 4.0, rng);
  o.require(ei == img && em == mask, "elastic(alpha 0) identity");
  o.require(channel_invert(channel_invert(img, 0b101), 0b101) == img, "channel_invert involution");

  // Clamping.
  imaging::RasterImage bright(4, 4);
  for (auto& v : bright.data()) v = 230;
  imaging::RasterImage dark(4, 4);
  for (auto& v : dark.data()) v = 20;
  const auto up = channel_add(bright, 50), scaled = multiply(bright, 1.5), down = channel_add(dark, -50);
  bool clamp_ok = true;
  for (std::size_t i = 0; i < up.data().size(); ++i)
    clamp_ok &= up.data()[i] == 255 && scaled.data()[i] == 255 && down.data()[i] == 0;
  o.require(clamp_ok, "channel_add / multiply saturate at 0 and 255");

  // Salt-and-pepper flip fraction.
  imaging::RasterImage grey(256, 256);
  for (auto& v : grey.data()) v = 128;
  Rng sp(2026);
  const auto noisy = salt_pepper(grey, 0.05, sp);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < noisy.pixels(); ++i) flipped += noisy.data()[3 * i] != 128;
  const double frac = double(flipped) / noisy.pixels();
  o.require(std::abs(frac - 0.05) <= 0.005, fmt("salt_pepper flip fraction %.4f within 0.05 +- 0.005", frac));

  // Label safety: photometric ops never touch the mask; the elastic warp moves
  // mask and image together (nearest sample carries bilinear weight >= 1/4).
  for (Op op : kAllOps) {
    if (op_kind(op) != Kind::Photometric) continue;
    AugmentationPipeline p{{default_spec(op, 1.0)}, 3};
    for (int i = 0; i < 20; ++i) {
      Rng r = p.rng_for(i);
      if (!(apply_pipeline(img, mask, p, r).mask == mask)) {
        o.require(false, std::string("mask unchanged under ") + op_name(op));
        break;
      }
    }
  }
  imaging::RasterImage painted(64, 48);
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      for (int ch = 0; ch < 3; ++ch) painted.at(x, y, ch) = mask.at(x, y) ? 255 : 0;
  bool aligned = true;
  for (int i = 0; i < 20; ++i) {
    Rng r(100 + i);
    const auto [wi, wm] = elastic_transform(painted, mask, 40.0, 5.0, r);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 64; ++x) aligned &= wm.at(x, y) ? wi.at(x, y, 0) >= 63 : wi.at(x, y, 0) <= 192;
  }
  o.require(aligned, "elastic warp keeps mask aligned with image");

  // Replay.
  const auto pipe = AugmentationPipeline::defaults(0.5, 77);
  bool replay = true;
  for (int i = 0; i < 50; ++i) {
    Rng r1 = pipe.rng_for(i), r2 = pipe.rng_for(i);
    const auto a = apply_pipeline(img, mask, pipe, r1), b = apply_pipeline(img, mask, pipe, r2);
    replay &= a.image == b.image && a.mask == b.mask && log_to_json(a.log) == log_to_json(b.log);
  }
  o.require(replay, "pipeline replay from seed is bit-identical");
  o.note(fmt("8 ops checked; salt-pepper flip fraction %.4f", frac));
  return o;
}

Outcome config_fidelity(const Context& ctx) {
  Outcome o;
  auto golden = [&](const char* name) {
    std::ifstream in(ctx.repo / "tests" / "golden" / name);
    return json::parse(in);
  };
  const auto table = golden("cyclegan_defaults.json");
  const auto j = cyclegan::to_json(cyclegan::CycleGanConfig{});
  for (const auto& [key, value] : table.items())
    o.require(j.contains(key) && j.at(key) == value, "CycleGanConfig." + key + " = " + value.dump());
  const auto run = pipeline::to_json(pipeline::RunConfig{});
  o.require(run["cyclegan"] == j, "run config embeds the CycleGAN defaults");
  o.require(run["unet"]["grid"] == golden("unet_grid.json"), "default U-Net grid equals the published cells");
  o.note("translation defaults: " + std::to_string(table.size()) + " fields; grid " + run["unet"]["grid"].dump());
  return o;
}

Outcome pool_statistics(const Context&) {
  Outcome o;
  cyclegan::ImagePool<float> pool(50);
  Rng rng(2026);
  for (int i = 0; i < 50; ++i) pool.query(Tensor<float>(1, 1, 1, 1, float(i)), rng);
  const int n = 10000;
  int fresh = 0;
  bool within = true;
  for (int i = 0; i < n; ++i) {
    const float id = float(1000 + i);
    fresh += pool.query(Tensor<float>(1, 1, 1, 1, id), rng).data[0] == id;
    within &= pool.size() <= 50;
  }
  const double frac = double(fresh) / n;
  o.require(within, "capacity never exceeded");
  o.require(std::abs(frac - 0.5) <= 0.02, fmt("fresh fraction %.4f within 0.5 +- 0.02", frac));
  o.note(fmt("fresh fraction %.4f over %d queries", frac, n));
  return o;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

Outcome desk_analog(const Context& ctx) {
  Outcome o;
  const auto dir = ctx.work / "desk";
  const auto t0 = std::chrono::steady_clock::now();
  const int rc = fresh_pipeline(ctx, "desk.json", dir);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  o.require(rc == 0, "desk pipeline exit status " + std::to_string(rc) + " (log " + dir.string() + ".log)");
  if (rc != 0) return o;

  // (a) generator objective, first vs last 200-step window.
  const auto rows = read_csv(dir / "train-cyclegan" / "loss.csv");
  std::size_t col = 0;
  while (col < rows[0].size() && rows[0][col] != "total_gen") ++col;
  const std::size_t n = rows.size() - 1;
  double first = 0, last = 0;
  for (std::size_t i = 1; i <= 200; ++i) first += std::stod(rows[i][col]);
  for (std::size_t i = n - 199; i <= n; ++i) last += std::stod(rows[i][col]);
  first /= 200;
  last /= 200;
  o.require(n >= 400 && last < first, fmt("(a) generator objective %.4f -> %.4f", first, last));

  // (b) CLEAN tier IoU against the all-foreground baseline.
  const auto suite = evalkit::read_test_suite(dir / "evaluate" / "suite");
  const auto baseline = evalkit::evaluate(
      [](const imaging::RasterImage& img) { return imaging::BinaryMask(img.width(), img.height(), true); },
      suite[evalkit::Tier::Clean]);
  const double base = evalkit::aggregate(baseline.valid_ious()).mean;
  const auto report = json::parse(read_file(dir / "evaluate" / "reports" / "beta0.5_bz8.json"));
  double clean = -1;
  for (const auto& t : report.at("tiers"))
    if (t.at("tier") == "CLEAN") clean = t.at("mean_iou").get<double>();
  o.require(clean >= 0.80, fmt("(b) CLEAN mean IoU %.4f >= 0.80", clean));
  o.require(clean - base >= 0.25, fmt("(b) CLEAN IoU exceeds all-foreground baseline %.4f by %.4f >= 0.25", base, clean - base));

  // (c) Report layout: one row per grid cell, mean ± std per tier.
  const auto md = read_file(dir / "evaluate" / "report.md");
  const std::regex row(R"(\| Training 1: \xCE\xB2=0\.5, BZ = 8 \|( \d+\.\d\d% \xC2\xB1 \d+\.\d\d% \|){5})");
  o.require(md.find("| Configuration | CLEAN | COMPOSED | COMPOSED_AUGMENTED | Overall | Mean of tiers |") == 0,
            "(c) report header");
  o.require(std::regex_search(md, row), "(c) report row 'Training 1: beta=0.5, BZ = 8' with mean +- std percentages");

  std::string tiers;
  for (const auto& t : report.at("tiers"))
    tiers += fmt(" %.4f", t.at("mean_iou").get<double>());
  o.note(fmt("generator objective %.3f -> %.3f; CLEAN IoU %.4f", first, last, clean) + fmt(" vs all-foreground %.4f; ", base) +
         "tiers" + tiers + fmt("; %.1f min", minutes));
  return o;
}

Outcome reproducibility(const Context& ctx) {
  Outcome o;
  const auto a = ctx.work / "repro_a", b = ctx.work / "repro_b";
  const int ra = fresh_pipeline(ctx, "smoke.json", a), rb = fresh_pipeline(ctx, "smoke.json", b);
  o.require(ra == 0 && rb == 0, "both smoke runs exit 0");
  if (ra || rb) return o;
  const auto sa = snapshot(a), sb = snapshot(b);
  std::size_t manifests = 0, csvs = 0, reports = 0, differing = 0;
  for (const auto& [path, bytes] : sa) {
    const bool same = sb.count(path) && sb.at(path) == bytes;
    if (!same) {
      ++differing;
      o.require(false, "byte-identical " + path);
    }
    manifests += path.ends_with("manifest.jsonl");
    csvs += path.ends_with("loss.csv");
    reports += path.starts_with("evaluate/report") || path.starts_with("evaluate/reports/");
  }
  o.require(sa.size() == sb.size(), "same file set");
  o.require(manifests >= 8 && csvs >= 4 && reports >= 3, "manifests, loss CSVs and reports present");
  o.note(std::to_string(sa.size()) + " files compared (" + std::to_string(manifests) + " manifests, " + std::to_string(csvs) +
         " loss CSVs, " + std::to_string(reports) + " report files), " + std::to_string(differing) + " differ");
  return o;
}

Outcome label_preservation(const Context& ctx) {
  Outcome o;
  const auto dir = ctx.work / "labels";
  const int rc = fresh_pipeline(ctx, "smoke.json", dir);
  o.require(rc == 0, "smoke run exit 0");
  if (rc) return o;
  const auto src = scenegen::read_manifest(dir / "render" / "source" / "manifest.jsonl");
  const auto out = scenegen::read_manifest(dir / "adapt" / "manifest.jsonl");
  o.require(src.size() == out.size() && src.size() > 0, "adapted manifest covers the source manifest");
  std::size_t same = 0, images_changed = 0;
  for (std::size_t i = 0; i < std::min(src.size(), out.size()); ++i) {
    same += read_file(src.mask_path(i)) == read_file(out.mask_path(i));
    images_changed += read_file(src.image_path(i)) != read_file(out.image_path(i));
    if (out.rows[i].domain != scenegen::Domain::Adapted) o.require(false, "row " + std::to_string(i) + " domain ADAPTED");
  }
  o.require(same == src.size(), std::to_string(same) + "/" + std::to_string(src.size()) + " masks byte-identical");
  o.note(std::to_string(same) + "/" + std::to_string(src.size()) + " masks byte-identical; " + std::to_string(images_changed) +
         " images translated");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::vector<int> selected;
  Context ctx;
  std::string repo = SIM2REAL_REPO_DIR, work = "acceptance_work", cli = SIM2REAL_CLI;
  app.add_option("--criterion", selected, "Criterion number(s) to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--work-dir", work, "Scratch directory for pipeline runs");
  app.add_option("--repo", repo, "Repository root (configs/ and tests/golden/)");
  app.add_option("--cli", cli, "Path to the sim2real executable");
  CLI11_PARSE(app, argc, argv);
  ctx.repo = repo;
  ctx.work = fs::absolute(work);
  ctx.cli = cli;
  fs::create_directories(ctx.work);

  const std::vector<std::pair<const char*, std::function<Outcome(const Context&)>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"gradient checks", gradient_checks},
      {"augmentation suite", augmentation_suite},
      {"config fidelity", config_fidelity},
      {"image pool statistics", pool_statistics},
      {"desk-scale end-to-end analog", desk_analog},
      {"reproducibility", reproducibility},
      {"label preservation through adaptation", label_preservation}};
  if (selected.empty())
    for (int i = 1; i <= 8; ++i) selected.push_back(i);

  bool all = true;
  for (int k : selected) {
    const auto& [name, fn] = criteria[k - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn(ctx);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("CRITERION %d %s: %s (%.1f s)\n", k, name, o.pass ? "PASS" : "FAIL", secs);
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    all &= o.pass;
  }
  return all ? 0 : 1;
}
