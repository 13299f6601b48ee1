#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "sim2real/cyclegan/trainer.hpp"
#include "sim2real/scenegen/dataset.hpp"

using namespace sim2real;
using namespace sim2real::cyclegan;
namespace fs = std::filesystem;

namespace {

template <typename S>
Tensor<S> random_tensor(std::mt19937_64& rng, int n, int c, int h, int w, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Tensor<S> t(n, c, h, w);
  for (auto& v : t.data) v = S(d(rng));
  return t;
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("sim2real_cg_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

CycleGanConfig micro_config(int size = 32) {
  CycleGanConfig c;
  c.image_size = size;
  c.channel_width_scale = 1.0 / 16;
  c.residual_blocks = 1;
  c.training_images = 8;
  c.iterations = 4;
  c.checkpoint_interval = 2;
  c.seed = 11;
  return c;
}

std::vector<double> all_values(const nn::ParamList<float>& ps) {
  std::vector<double> v;
  for (auto* p : ps) v.insert(v.end(), p->value.begin(), p->value.end());
  return v;
}

}  // namespace

TEST(AdversarialLosses, Examples) {
  const Tensor<float> ones(1, 1, 3, 3, 1.0f), zeros(1, 1, 3, 3, 0.0f), half(1, 1, 3, 3, 0.5f);
  EXPECT_EQ(adversarial_losses(ones, zeros).disc_loss, 0.0);
  EXPECT_DOUBLE_EQ(adversarial_losses(half, half).disc_loss, 0.25);
  EXPECT_EQ(adversarial_losses(half, ones).gen_loss, 0.0);
  Tensor<float> bad = half;
  bad.data[4] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(adversarial_losses(half, bad), NumericError);
}

TEST(AdversarialLosses, MatchScalarOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> side(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = side(rng), w = side(rng);
    const auto real = random_tensor<float>(rng, 1, 1, h, w, 2.0), fake = random_tensor<float>(rng, 1, 1, h, w, 2.0);
    double dr = 0, df = 0, g = 0;
    for (int i = 0; i < h * w; ++i) {
      dr += (real.data[i] - 1.0) * (real.data[i] - 1.0);
      df += double(fake.data[i]) * fake.data[i];
      g += (fake.data[i] - 1.0) * (fake.data[i] - 1.0);
    }
    const auto l = adversarial_losses(real, fake);
    EXPECT_NEAR(l.disc_loss, dr / (h * w) / 2 + df / (h * w) / 2, 1e-6);
    EXPECT_NEAR(l.gen_loss, g / (h * w), 1e-6);
  }
}

TEST(CycleLoss, ExamplesAndOracle) {
  std::mt19937_64 rng(2);
  const auto x = random_tensor<float>(rng, 1, 3, 4, 4);
  EXPECT_EQ(cycle_loss(x, x), 0.0);
  auto shifted = x;
  for (auto& v : shifted.data) v += 0.2f;
  EXPECT_NEAR(cycle_loss(x, shifted), 0.2, 1e-6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_tensor<float>(rng, 1, 3, 4, 4), b = random_tensor<float>(rng, 1, 3, 4, 4);
    double s = 0;
    for (int i = 0; i < 48; ++i) s += std::abs(double(a.data[i]) - double(b.data[i]));
    EXPECT_NEAR(cycle_loss(a, b), s / 48, 1e-6);
  }
  EXPECT_THROW(cycle_loss(x, Tensor<float>(1, 3, 4, 5)), ShapeError);
}

TEST(TotalObjective, ExamplesAndOracle) {
  EXPECT_EQ(total_generator_objective(0, 0, 0, 0, 10), 0.0);
  EXPECT_DOUBLE_EQ(total_generator_objective(0.5, 0.5, 0.1, 0.1, 10), 3.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 5);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng), l = u(rng);
    EXPECT_NEAR(total_generator_objective(a, b, c, d, l), a + b + l * c + l * d, 1e-12);
  }
}

// With reconstructions equal to the inputs, only the adversarial terms remain.
TEST(TotalObjective, IdentityGeneratorsLeaveAdversarialTermsOnly) {
  std::mt19937_64 rng(4);
  const auto s = random_tensor<float>(rng, 1, 3, 8, 8), r = random_tensor<float>(rng, 1, 3, 8, 8);
  const double cs = cycle_loss(s, s), cr = cycle_loss(r, r);
  EXPECT_EQ(cs, 0.0);
  EXPECT_EQ(cr, 0.0);
  EXPECT_EQ(total_generator_objective(0.3, 0.7, cs, cr, 10.0), 0.3 + 0.7);
}

TEST(LossGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  auto s = random_tensor<double>(rng, 1, 1, 3, 3, 2.0);
  const auto g = mean_squared_grad(s, 1.0, 0.5);
  const double h = 1e-6;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double keep = s.data[i];
    s.data[i] = keep + h;
    const double up = 0.5 * mean_squared_from(s, 1.0);
    s.data[i] = keep - h;
    const double down = 0.5 * mean_squared_from(s, 1.0);
    s.data[i] = keep;
    EXPECT_NEAR(g.data[i], (up - down) / (2 * h), 1e-8);
  }
  const auto a = random_tensor<double>(rng, 1, 3, 2, 2);
  auto b = random_tensor<double>(rng, 1, 3, 2, 2);
  const auto gc = cycle_loss_grad(a, b, 10.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double keep = b.data[i];
    b.data[i] = keep + h;
    const double up = 10.0 * cycle_loss(a, b);
    b.data[i] = keep - h;
    const double down = 10.0 * cycle_loss(a, b);
    b.data[i] = keep;
    EXPECT_NEAR(gc.data[i], (up - down) / (2 * h), 1e-8);
  }
}

TEST(ImagePool, FillsThenSwaps) {
  ImagePool<float> pool(50);
  Rng rng(1);
  const Tensor<float> first(1, 1, 1, 1, -1.0f);
  EXPECT_EQ(pool.query(first, rng).data, first.data);
  EXPECT_EQ(pool.size(), 1u);
  for (int i = 1; i < 50; ++i) {
    const Tensor<float> t(1, 1, 1, 1, float(i));
    EXPECT_EQ(pool.query(t, rng).data, t.data);
  }
  EXPECT_EQ(pool.size(), 50u);
}

TEST(ImagePool, ZeroCapacityPassesThrough) {
  ImagePool<float> pool(0);
  Rng rng(1);
  const Tensor<float> t(1, 1, 1, 1, 3.0f);
  EXPECT_EQ(pool.query(t, rng).data, t.data);
  EXPECT_EQ(pool.size(), 0u);
}

// 10,000 Bernoulli(1/2) draws have a standard deviation of 0.005 in the
// fraction; the 0.02 band is four sigma.
TEST(ImagePool, FreshReturnFractionAndCapacity) {
  ImagePool<float> pool(50);
  Rng rng(2026);
  std::set<float> inserted;
  for (int i = 0; i < 50; ++i) {
    inserted.insert(float(i));
    pool.query(Tensor<float>(1, 1, 1, 1, float(i)), rng);
  }
  int fresh = 0;
  const int n = 10000;
  for (int i = 50; i < 50 + n; ++i) {
    const float id = float(i);
    inserted.insert(id);
    const auto out = pool.query(Tensor<float>(1, 1, 1, 1, id), rng);
    fresh += out.data[0] == id;
    EXPECT_TRUE(inserted.count(out.data[0]));
    ASSERT_LE(pool.size(), 50u);
  }
  for (const auto& t : pool.images()) EXPECT_TRUE(inserted.count(t.data[0]));
  EXPECT_NEAR(double(fresh) / n, 0.5, 0.02);
}

TEST(Config, DefaultsMatchGoldenFile) {
  std::ifstream in(fs::path(SIM2REAL_GOLDEN_DIR) / "cyclegan_defaults.json");
  ASSERT_TRUE(in);
  const auto golden = nlohmann::json::parse(in);
  const auto j = to_json(CycleGanConfig{});
  for (const auto& [key, value] : golden.items()) EXPECT_EQ(j.at(key), value) << key;
  EXPECT_EQ(cyclegan_config_from_json(j).generator_lr, 2e-4);
  EXPECT_EQ(to_json(cyclegan_config_from_json(j)), j);
}

TEST(Config, Validation) {
  auto c = CycleGanConfig{};
  c.normalization = "batch";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.generator_lr = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.cycle_lambda = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.image_size = 30;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(cyclegan_config_from_json({{"lamda", 3}}), ConfigError);
  c = {};
  c.discriminator_lr = 2e-3;
  EXPECT_NO_THROW(c.validate());
}

TEST(Networks, ShapesAndRanges) {
  std::mt19937_64 rng(6);
  ResnetGenerator<float> g({4, 2, 1});
  Rng init(1);
  g.init(init);
  for (int side : {8, 16, 24, 32}) {
    const auto y = g.forward(random_tensor<float>(rng, 1, 3, side, side));
    EXPECT_EQ(y.h, side);
    EXPECT_EQ(y.w, side);
    EXPECT_EQ(y.c, 3);
    for (float v : y.data) ASSERT_TRUE(v >= -1.0f && v <= 1.0f);
  }
  EXPECT_THROW(g.forward(Tensor<float>(1, 3, 10, 10)), ShapeError);
  PatchDiscriminator<float> d({4, 3});
  d.init(init);
  for (int side : {32, 48, 64}) EXPECT_EQ(d.forward(random_tensor<float>(rng, 1, 3, side, side)).h, d.output_size(side));
}

// Central differences on 20 sampled generator parameters. The step is 1e-6:
// at 1e-3 the L1 cycle term and the ReLUs put kinks inside the stencil for
// most parameters and the difference quotient itself is off by several percent.
TEST(TrainStep, GeneratorGradientMatchesFiniteDifferences) {
  auto c = micro_config(16);
  c.discriminator_layers = 2;
  CycleGanModel<double> m(c);
  m.init(3);
  std::mt19937_64 rng(7);
  const auto s = random_tensor<double>(rng, 1, 3, 16, 16), r = random_tensor<double>(rng, 1, 3, 16, 16);
  generator_pass(m, s, r);
  auto ps = m.generator_parameters();
  std::size_t total = 0;
  for (auto* p : ps) total += p->size();
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  const double h = 1e-6;
  int checked = 0;
  for (int k = 0; k < 20; ++k) {
    std::size_t idx = pick(rng);
    std::size_t j = 0;
    while (idx >= ps[j]->size()) idx -= ps[j++]->size();
    auto& v = ps[j]->value[idx];
    const double keep = v;
    v = keep + h;
    const double up = generator_objective(m, s, r).total_gen;
    v = keep - h;
    const double down = generator_objective(m, s, r).total_gen;
    v = keep;
    const double numeric = (up - down) / (2 * h), analytic = ps[j]->grad[idx];
    const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    EXPECT_LT(rel, 1e-3) << ps[j]->name << "[" << idx << "] numeric " << numeric << " analytic " << analytic;
    ++checked;
  }
  EXPECT_EQ(checked, 20);
}

TEST(TrainStep, DiscriminatorGradientMatchesFiniteDifferences) {
  auto c = micro_config(16);
  c.discriminator_layers = 2;
  CycleGanModel<double> m(c);
  m.init(4);
  std::mt19937_64 rng(8);
  const auto s = random_tensor<double>(rng, 1, 3, 16, 16), r = random_tensor<double>(rng, 1, 3, 16, 16);
  const auto fs_ = random_tensor<double>(rng, 1, 3, 16, 16), fr = random_tensor<double>(rng, 1, 3, 16, 16);
  discriminator_pass(m, s, r, fs_, fr);
  auto total = [&] {
    const auto [a, b] = discriminator_objective(m, s, r, fs_, fr);
    return a + b;
  };
  const double h = 1e-5;
  for (auto* p : m.discriminator_parameters())
    for (std::size_t i = 0; i < p->size(); i += std::max<std::size_t>(1, p->size() / 5)) {
      const double keep = p->value[i];
      p->value[i] = keep + h;
      const double up = total();
      p->value[i] = keep - h;
      const double down = total();
      p->value[i] = keep;
      const double numeric = (up - down) / (2 * h);
      EXPECT_NEAR(p->grad[i], numeric, 1e-6 + 1e-4 * std::abs(numeric)) << p->name;
    }
}

TEST(TrainStep, ZeroLearningRatesLeaveParametersUnchanged) {
  auto c = micro_config();
  c.generator_lr = 0;
  c.discriminator_lr = 0;
  CycleGanTrainer<float> t(c);
  const auto g0 = all_values(t.model().generator_parameters());
  const auto d0 = all_values(t.model().discriminator_parameters());
  std::mt19937_64 rng(9);
  for (int i = 0; i < 3; ++i) t.train_step(random_tensor<float>(rng, 1, 3, 32, 32), random_tensor<float>(rng, 1, 3, 32, 32));
  EXPECT_EQ(all_values(t.model().generator_parameters()), g0);
  EXPECT_EQ(all_values(t.model().discriminator_parameters()), d0);
}

TEST(TrainStep, TwoRunsGiveIdenticalLossRecords) {
  auto run = [] {
    CycleGanTrainer<float> t(micro_config());
    std::mt19937_64 rng(10);
    std::vector<LossRecord> recs;
    for (int i = 0; i < 10; ++i)
      recs.push_back(t.train_step(random_tensor<float>(rng, 1, 3, 32, 32), random_tensor<float>(rng, 1, 3, 32, 32)));
    return recs;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a, b);
  for (const auto& r : a) EXPECT_TRUE(std::isfinite(r.total_gen) && std::isfinite(r.disc_R) && std::isfinite(r.disc_S));
}

TEST(Checkpoint, ReloadGivesBitIdenticalProbeOutputs) {
  const auto dir = temp_dir("ckpt");
  CycleGanTrainer<float> t(micro_config());
  std::mt19937_64 rng(11);
  for (int i = 0; i < 3; ++i) t.train_step(random_tensor<float>(rng, 1, 3, 32, 32), random_tensor<float>(rng, 1, 3, 32, 32));
  t.save(dir / "a.ckpt");
  const auto loaded = CycleGanTrainer<float>::load(dir / "a.ckpt");
  EXPECT_EQ(loaded->iteration(), 3);
  const auto probe = random_tensor<float>(rng, 1, 3, 32, 32);
  const auto& a = t.model();
  const auto& b = loaded->model();
  EXPECT_EQ(a.g_s2r.forward(probe).data, b.g_s2r.forward(probe).data);
  EXPECT_EQ(a.g_r2s.forward(probe).data, b.g_r2s.forward(probe).data);
  EXPECT_EQ(a.d_r.forward(probe).data, b.d_r.forward(probe).data);
  EXPECT_EQ(a.d_s.forward(probe).data, b.d_s.forward(probe).data);
  EXPECT_EQ(to_json(b.config), to_json(a.config));

  auto bytes = read_file(dir / "a.ckpt");
  bytes[8] = 7;
  write_file_atomic(dir / "v.ckpt", bytes);
  EXPECT_THROW(CycleGanTrainer<float>::load(dir / "v.ckpt"), IoError);
  fs::remove_all(dir);
}

class TranslationRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = temp_dir("run");
    const scenegen::SceneRanges ranges;
    synth_ = scenegen::build_dataset(6, scenegen::Style::Synthetic, ranges, 32, dir_ / "synthetic", 1);
    real_ = scenegen::build_dataset(6, scenegen::Style::Realistic, ranges, 32, dir_ / "realistic", 2);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static inline fs::path dir_;
  static inline scenegen::DatasetManifest synth_, real_;
};

TEST_F(TranslationRun, ZeroIterationsWritesInitialCheckpointOnly) {
  auto c = micro_config();
  c.iterations = 0;
  const auto r = train(c, synth_, real_, dir_ / "zero");
  EXPECT_TRUE(fs::exists(r.final_checkpoint));
  EXPECT_TRUE(fs::is_empty(dir_ / "zero" / "checkpoints"));
  EXPECT_EQ(read_file(r.loss_csv), std::string(kLossCsvHeader) + "\n");
}

TEST_F(TranslationRun, LogsEveryStepAndCheckpointsAtInterval) {
  const auto r = train(micro_config(), synth_, real_, dir_ / "four");
  EXPECT_EQ(r.iterations, 4);
  EXPECT_TRUE(fs::exists(dir_ / "four" / "checkpoints" / "iter_0000002.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "four" / "checkpoints" / "iter_0000004.ckpt"));
  std::ifstream in(r.loss_csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kLossCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) EXPECT_EQ(line.substr(0, line.find(',')), std::to_string(++rows));
  EXPECT_EQ(rows, 4);

  const auto again = train(micro_config(), synth_, real_, dir_ / "four_again");
  EXPECT_EQ(read_file(again.loss_csv), read_file(r.loss_csv));
  EXPECT_EQ(read_file(again.final_checkpoint), read_file(r.final_checkpoint));
}

TEST_F(TranslationRun, EmptyManifestIsRejected) {
  EXPECT_THROW(train(micro_config(), scenegen::DatasetManifest{}, real_, dir_ / "empty"), StageError);
}

TEST_F(TranslationRun, AdaptationCarriesMasksAndChangesImages) {
  const auto r = train(micro_config(), synth_, real_, dir_ / "adapt_model");
  const auto out = adapt_dataset(r.final_checkpoint, synth_, dir_ / "adapted");
  ASSERT_EQ(out.size(), synth_.size());
  const auto reread = scenegen::read_manifest(dir_ / "adapted" / "manifest.jsonl");
  EXPECT_EQ(reread.size(), synth_.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_EQ(out.rows[i].domain, scenegen::Domain::Adapted);
    EXPECT_EQ(read_file(out.mask_path(i)), read_file(synth_.mask_path(i)));
    const auto a = imaging::read_image(out.image_path(i)), b = imaging::read_image(synth_.image_path(i));
    double diff = 0;
    for (std::size_t k = 0; k < a.data().size(); ++k) diff += std::abs(int(a.data()[k]) - int(b.data()[k]));
    EXPECT_GT(diff / a.data().size(), 0.0) << i;
  }
  EXPECT_THROW(adapt_dataset(r.final_checkpoint, real_, dir_ / "adapted_bad"), StageError);

  const auto small = scenegen::build_dataset(2, scenegen::Style::Synthetic, {}, 16, dir_ / "small", 3);
  EXPECT_THROW(adapt_dataset(r.final_checkpoint, small, dir_ / "adapted_small"), ShapeError);
}
