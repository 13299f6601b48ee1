#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/parallel.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/cyclegan/config.hpp"
#include "sim2real/cyclegan/image_pool.hpp"
#include "sim2real/cyclegan/losses.hpp"
#include "sim2real/cyclegan/networks.hpp"
#include "sim2real/imaging/png_io.hpp"
#include "sim2real/nn/adam.hpp"
#include "sim2real/nn/checkpoint_io.hpp"
#include "sim2real/scenegen/manifest.hpp"

namespace sim2real::cyclegan {

namespace fs = std::filesystem;

/// One row of the loss log: the four adversarial curves plus cycle terms.
struct LossRecord {
  double disc_R = 0, disc_S = 0, gen_S2R = 0, gen_R2S = 0, cycle_S = 0, cycle_R = 0, total_gen = 0;
  bool operator==(const LossRecord&) const = default;
};

inline constexpr const char* kLossCsvHeader = "iter,disc_R,disc_S,gen_S2R,gen_R2S,cycle_S,cycle_R,total_gen";

inline std::string loss_csv_row(long iter, const LossRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", iter, r.disc_R, r.disc_S, r.gen_S2R, r.gen_R2S,
                r.cycle_S, r.cycle_R, r.total_gen);
  return buf;
}

inline GeneratorSpec generator_spec(const CycleGanConfig& c) {
  return {c.scaled_channels(), c.downsampling, c.residual_blocks};
}
inline DiscriminatorSpec discriminator_spec(const CycleGanConfig& c) { return {c.scaled_channels(), c.discriminator_layers}; }

/// Two generators (S->R, R->S) and two discriminators (on R, on S).
template <typename S>
struct CycleGanModel {
  CycleGanConfig config;
  ResnetGenerator<S> g_s2r;
  ResnetGenerator<S> g_r2s;
  PatchDiscriminator<S> d_r;
  PatchDiscriminator<S> d_s;

  explicit CycleGanModel(const CycleGanConfig& c)
      : config(c),
        g_s2r(generator_spec(c), "G_S2R"),
        g_r2s(generator_spec(c), "G_R2S"),
        d_r(discriminator_spec(c), "D_R"),
        d_s(discriminator_spec(c), "D_S") {}

  void init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, {tag("cyclegan-init")}));
    g_s2r.init(rng);
    g_r2s.init(rng);
    d_r.init(rng);
    d_s.init(rng);
  }

  nn::ParamList<S> generator_parameters() {
    auto ps = g_s2r.parameters();
    for (auto* p : g_r2s.parameters()) ps.push_back(p);
    return ps;
  }
  nn::ParamList<S> discriminator_parameters() {
    auto ps = d_r.parameters();
    for (auto* p : d_s.parameters()) ps.push_back(p);
    return ps;
  }
};

template <typename S>
struct GeneratorPass {
  LossRecord losses;
  Tensor<S> fake_r;  // G_S2R(S)
  Tensor<S> fake_s;  // G_R2S(R)
};

/// Generator objective evaluated forward-only (no gradients).
template <typename S>
LossRecord generator_objective(const CycleGanModel<S>& m, const Tensor<S>& real_s, const Tensor<S>& real_r) {
  LossRecord r;
  const auto fake_r = m.g_s2r.forward(real_s);
  const auto fake_s = m.g_r2s.forward(real_r);
  r.cycle_S = cycle_loss(real_s, m.g_r2s.forward(fake_r));
  r.cycle_R = cycle_loss(real_r, m.g_s2r.forward(fake_s));
  r.gen_S2R = mean_squared_from(m.d_r.forward(fake_r), 1.0);
  r.gen_R2S = mean_squared_from(m.d_s.forward(fake_s), 1.0);
  r.total_gen = total_generator_objective(r.gen_S2R, r.gen_R2S, r.cycle_S, r.cycle_R, m.config.cycle_lambda);
  return r;
}

/// Discriminator objectives (disc_R + disc_S) evaluated forward-only.
template <typename S>
std::pair<double, double> discriminator_objective(const CycleGanModel<S>& m, const Tensor<S>& real_s, const Tensor<S>& real_r,
                                                  const Tensor<S>& fake_s, const Tensor<S>& fake_r) {
  return {adversarial_losses(m.d_r.forward(real_r), m.d_r.forward(fake_r)).disc_loss,
          adversarial_losses(m.d_s.forward(real_s), m.d_s.forward(fake_s)).disc_loss};
}

/// Forward + backward of the full generator objective. Overwrites generator
/// gradients; discriminator gradients are left dirty.
template <typename S>
GeneratorPass<S> generator_pass(CycleGanModel<S>& m, const Tensor<S>& real_s, const Tensor<S>& real_r) {
  const double lambda = m.config.cycle_lambda;
  nn::zero_grads(m.generator_parameters());
  typename ResnetGenerator<S>::Cache c_fake_r, c_rec_s, c_fake_s, c_rec_r;
  typename PatchDiscriminator<S>::Cache c_dr, c_ds;

  GeneratorPass<S> out;
  out.fake_r = m.g_s2r.forward(real_s, c_fake_r);
  const auto rec_s = m.g_r2s.forward(out.fake_r, c_rec_s);
  out.fake_s = m.g_r2s.forward(real_r, c_fake_s);
  const auto rec_r = m.g_s2r.forward(out.fake_s, c_rec_r);
  const auto score_r = m.d_r.forward(out.fake_r, c_dr);
  const auto score_s = m.d_s.forward(out.fake_s, c_ds);

  auto& l = out.losses;
  l.gen_S2R = mean_squared_from(score_r, 1.0);
  l.gen_R2S = mean_squared_from(score_s, 1.0);
  l.cycle_S = cycle_loss(real_s, rec_s);
  l.cycle_R = cycle_loss(real_r, rec_r);
  l.total_gen = total_generator_objective(l.gen_S2R, l.gen_R2S, l.cycle_S, l.cycle_R, lambda);
  if (!std::isfinite(l.total_gen)) throw NumericError("non-finite generator objective");

  // d total / d fake_r: adversarial path through D_R plus cycle path through G_R2S.
  Tensor<S> g_fake_r = m.d_r.backward(c_dr, mean_squared_grad(score_r, 1.0));
  nn::add_inplace(g_fake_r, m.g_r2s.backward(c_rec_s, cycle_loss_grad(real_s, rec_s, lambda)));
  Tensor<S> g_fake_s = m.d_s.backward(c_ds, mean_squared_grad(score_s, 1.0));
  nn::add_inplace(g_fake_s, m.g_s2r.backward(c_rec_r, cycle_loss_grad(real_r, rec_r, lambda)));

  m.g_s2r.backward(c_fake_r, g_fake_r, false);
  m.g_r2s.backward(c_fake_s, g_fake_s, false);
  return out;
}

/// Forward + backward of both discriminator losses on the given fakes.
/// Overwrites discriminator gradients.
template <typename S>
std::pair<double, double> discriminator_pass(CycleGanModel<S>& m, const Tensor<S>& real_s, const Tensor<S>& real_r,
                                             const Tensor<S>& fake_s, const Tensor<S>& fake_r) {
  nn::zero_grads(m.discriminator_parameters());
  auto run = [](PatchDiscriminator<S>& d, const Tensor<S>& real, const Tensor<S>& fake) {
    typename PatchDiscriminator<S>::Cache c_real, c_fake;
    const auto s_real = d.forward(real, c_real);
    const auto s_fake = d.forward(fake, c_fake);
    const double loss = adversarial_losses(s_real, s_fake).disc_loss;
    d.backward(c_real, mean_squared_grad(s_real, 1.0, 0.5), false);
    d.backward(c_fake, mean_squared_grad(s_fake, 0.0, 0.5), false);
    return loss;
  };
  const double disc_r = run(m.d_r, real_r, fake_r);
  const double disc_s = run(m.d_s, real_s, fake_s);
  return {disc_r, disc_s};
}

/// Mutable training state: model, both optimizers, both image pools, rng.
template <typename S>
class CycleGanTrainer {
 public:
  explicit CycleGanTrainer(const CycleGanConfig& config)
      : model_(config),
        opt_g_(model_.generator_parameters(),
               {config.generator_lr, config.adam_beta1, config.adam_beta2, 1e-8}),
        opt_d_(model_.discriminator_parameters(),
               {config.discriminator_lr, config.adam_beta1, config.adam_beta2, 1e-8}),
        pool_r_(static_cast<std::size_t>(config.pool_size)),
        pool_s_(static_cast<std::size_t>(config.pool_size)),
        rng_(derive_seed(config.seed, {tag("cyclegan-train")})) {
    model_.init(config.seed);
  }

  // The optimizers hold pointers into model_, so the trainer stays put.
  CycleGanTrainer(const CycleGanTrainer&) = delete;
  CycleGanTrainer& operator=(const CycleGanTrainer&) = delete;

  /// One alternating update: generators first, then discriminators on pooled fakes.
  LossRecord train_step(const Tensor<S>& real_s, const Tensor<S>& real_r) {
    auto pass = generator_pass(model_, real_s, real_r);
    opt_g_.step();
    const auto pooled_r = query_pool(pool_r_, pass.fake_r);
    const auto pooled_s = query_pool(pool_s_, pass.fake_s);
    auto [disc_r, disc_s] = discriminator_pass(model_, real_s, real_r, pooled_s, pooled_r);
    opt_d_.step();
    pass.losses.disc_R = disc_r;
    pass.losses.disc_S = disc_s;
    if (!std::isfinite(disc_r) || !std::isfinite(disc_s)) throw NumericError("non-finite discriminator loss");
    ++iteration_;
    return pass.losses;
  }

  CycleGanModel<S>& model() noexcept { return model_; }
  const CycleGanModel<S>& model() const noexcept { return model_; }
  long iteration() const noexcept { return iteration_; }
  const ImagePool<S>& pool_r() const noexcept { return pool_r_; }
  const ImagePool<S>& pool_s() const noexcept { return pool_s_; }
  Rng& rng() noexcept { return rng_; }

  void save(const fs::path& path) {
    nlohmann::json meta{{"config", to_json(model_.config)},
                        {"iteration", iteration_},
                        {"seed", model_.config.seed},
                        {"scalar_bytes", sizeof(S)}};
    nn::CheckpointWriter w("cyclegan", meta);
    w.add_params("", model_.generator_parameters());
    w.add_params("", model_.discriminator_parameters());
    w.add_adam("opt_g", opt_g_);
    w.add_adam("opt_d", opt_d_);
    w.save(path);
  }

  static std::unique_ptr<CycleGanTrainer> load(const fs::path& path) {
    nn::CheckpointReader r(path);
    if (r.kind() != "cyclegan") throw IoError(path.string() + ": not a translation-model checkpoint");
    auto config = cyclegan_config_from_json(r.meta().at("config"));
    config.seed = r.meta().at("seed").get<std::uint64_t>();
    auto t = std::make_unique<CycleGanTrainer>(config);
    r.load_params("", t->model_.generator_parameters());
    r.load_params("", t->model_.discriminator_parameters());
    r.load_adam("opt_g", t->opt_g_);
    r.load_adam("opt_d", t->opt_d_);
    t->iteration_ = r.meta().at("iteration").get<long>();
    return t;
  }

 private:
  Tensor<S> query_pool(ImagePool<S>& pool, const Tensor<S>& batch) {
    Tensor<S> out(batch.n, batch.c, batch.h, batch.w);
    for (int n = 0; n < batch.n; ++n) {
      Tensor<S> one(1, batch.c, batch.h, batch.w);
      std::copy(batch.sample(n), batch.sample(n) + batch.sample_size(), one.data.begin());
      const auto q = pool.query(one, rng_);
      std::copy(q.data.begin(), q.data.end(), out.sample(n));
    }
    return out;
  }

  CycleGanModel<S> model_;
  nn::Adam<S> opt_g_, opt_d_;
  ImagePool<S> pool_r_, pool_s_;
  Rng rng_;
  long iteration_ = 0;
};

/// Stacks normalized images into one N x 3 x H x W batch.
inline Tensor<float> make_batch(const std::vector<const imaging::RasterImage*>& images) {
  const auto& first = *images.front();
  Tensor<float> out(int(images.size()), 3, first.height(), first.width());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto t = imaging::normalize(*images[i]);
    if (t.size() != out.sample_size()) throw ShapeError("batch images differ in size");
    std::copy(t.data.begin(), t.data.end(), out.sample(int(i)));
  }
  return out;
}

inline std::vector<imaging::RasterImage> load_images(const scenegen::DatasetManifest& m, int expected_size) {
  std::vector<imaging::RasterImage> out;
  out.reserve(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.push_back(imaging::read_image(m.image_path(i)));
    if (out.back().width() != expected_size || out.back().height() != expected_size)
      throw ShapeError("image " + m.image_path(i).string() + " is not " + std::to_string(expected_size) + "x" +
                       std::to_string(expected_size));
  }
  return out;
}

struct TrainResult {
  fs::path final_checkpoint;
  fs::path loss_csv;
  long iterations = 0;
};

/// Full training run. Writes run_dir/loss.csv (one row per step), periodic
/// checkpoints under run_dir/checkpoints/ and run_dir/final.ckpt.
inline TrainResult train(const CycleGanConfig& config, const scenegen::DatasetManifest& manifest_s,
                         const scenegen::DatasetManifest& manifest_r, const fs::path& run_dir) {
  config.validate();
  if (manifest_s.empty() || manifest_r.empty()) throw StageError("translation training needs nonempty manifests for both domains");
  const auto images_s = load_images(manifest_s, config.image_size);
  const auto images_r = load_images(manifest_r, config.image_size);

  fs::create_directories(run_dir / "checkpoints");
  TrainResult result{run_dir / "final.ckpt", run_dir / "loss.csv", 0};
  CycleGanTrainer<float> trainer(config);
  Rng sampler(derive_seed(config.seed, {tag("cyclegan-sampler")}));

  std::ofstream csv(result.loss_csv, std::ios::trunc);
  if (!csv) throw IoError("cannot open " + result.loss_csv.string());
  csv << kLossCsvHeader << '\n';

  std::vector<const imaging::RasterImage*> bs(config.batch_size), br(config.batch_size);
  for (int it = 1; it <= config.iterations; ++it) {
    for (int b = 0; b < config.batch_size; ++b) {
      bs[b] = &images_s[uniform_int(sampler, 0, int(images_s.size()) - 1)];
      br[b] = &images_r[uniform_int(sampler, 0, int(images_r.size()) - 1)];
    }
    const auto rec = trainer.train_step(make_batch(bs), make_batch(br));
    csv << loss_csv_row(it, rec) << '\n';
    if (it % config.checkpoint_interval == 0) {
      csv.flush();
      char name[64];
      std::snprintf(name, sizeof name, "iter_%07d.ckpt", it);
      trainer.save(run_dir / "checkpoints" / name);
    }
  }
  csv.flush();
  trainer.save(result.final_checkpoint);
  result.iterations = config.iterations;
  return result;
}

/// Passes every synthetic image through G_S2R. Masks are copied byte-for-byte
/// from the source dataset; rows keep their scene parameters and are tagged ADAPTED.
inline scenegen::DatasetManifest adapt_dataset(const fs::path& checkpoint, const scenegen::DatasetManifest& manifest_s,
                                               const fs::path& out_dir) {
  const auto trainer = CycleGanTrainer<float>::load(checkpoint);
  const auto& model = trainer->model();
  const int size = model.config.image_size;
  for (const auto& row : manifest_s.rows)
    if (row.domain != scenegen::Domain::Synthetic) throw StageError("adapt_dataset: source manifest must be all SYNTHETIC");

  scenegen::DatasetManifest out;
  out.base_dir = out_dir;
  out.seed = manifest_s.seed;
  out.metadata = {{"style", "ADAPTED"}, {"size", size}, {"checkpoint", nn::file_digest(checkpoint)}};
  for (const auto& src : manifest_s.rows) {
    out.rows.push_back({src.image, src.mask, scenegen::Domain::Adapted, src.params, src.seed});
    fs::create_directories((out_dir / src.image).parent_path());
    fs::create_directories((out_dir / src.mask).parent_path());
  }
  parallel_for(manifest_s.size(), [&](std::size_t i) {
    const auto image = imaging::read_image(manifest_s.image_path(i));
    if (image.width() != size || image.height() != size)
      throw ShapeError("adapt_dataset: image size " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
                       " does not match checkpoint image_size " + std::to_string(size));
    const auto translated = imaging::denormalize(model.g_s2r.forward(imaging::normalize(image)));
    imaging::write_image(out_dir / out.rows[i].image, translated);
    fs::copy_file(manifest_s.mask_path(i), out_dir / out.rows[i].mask, fs::copy_options::overwrite_existing);
  });
  scenegen::write_manifest(out_dir / "manifest.jsonl", out);
  return out;
}

}  // namespace sim2real::cyclegan
