#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sim2real/augment/pipeline.hpp"
#include "sim2real/core/errors.hpp"
#include "sim2real/core/rng.hpp"
#include "sim2real/imaging/png_io.hpp"
#include "sim2real/scenegen/dataset.hpp"
#include "sim2real/scenegen/manifest.hpp"

namespace sim2real::evalkit {

namespace fs = std::filesystem;
using scenegen::DatasetManifest;

enum class Tier { Clean, Composed, ComposedAugmented };
inline constexpr std::array<Tier, 3> kAllTiers{Tier::Clean, Tier::Composed, Tier::ComposedAugmented};

inline const char* tier_name(Tier t) {
  switch (t) {
    case Tier::Clean: return "CLEAN";
    case Tier::Composed: return "COMPOSED";
    case Tier::ComposedAugmented: return "COMPOSED_AUGMENTED";
  }
  return "?";
}

inline std::string tier_dir(Tier t) {
  std::string s = tier_name(t);
  for (auto& ch : s) ch = char(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

struct TestSuite {
  std::array<DatasetManifest, 3> tiers;

  const DatasetManifest& operator[](Tier t) const { return tiers[static_cast<int>(t)]; }
  DatasetManifest& operator[](Tier t) { return tiers[static_cast<int>(t)]; }
};

/// Heavy test-time augmentation: every photometric op, fired often, at the
/// strong end of its range. Geometric ops are left out so masks stay shared.
inline augment::AugmentationPipeline heavy_pipeline(std::uint64_t seed) {
  auto p = augment::AugmentationPipeline::defaults(0.6, seed);
  for (auto& s : p.specs)
    if (s.op == augment::Op::Elastic) s.probability = 0.0;
  return p;
}

/// Held-out organ-like textures, one per index, from a stream no training
/// background generator shares.
inline std::vector<imaging::RasterImage> organ_pool(std::size_t count, int size, std::uint64_t seed) {
  std::vector<imaging::RasterImage> pool;
  pool.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {tag("organ-bg"), i}));
    pool.push_back(scenegen::organ_background(size, size, rng));
  }
  return pool;
}

/// Renders the three tiers under out_dir/{clean,composed,composed_augmented}/.
/// Row i of every tier shows the same instrument pose with the same mask; the
/// tiers differ only in context. Row i uses background i modulo the pool size.
inline TestSuite build_test_suite(const scenegen::SceneRanges& ranges, const std::vector<imaging::RasterImage>& backgrounds,
                                  const augment::AugmentationPipeline& heavy, std::uint64_t seed, std::size_t count,
                                  int size, const fs::path& out_dir) {
  ranges.validate();
  heavy.validate();
  if (backgrounds.empty()) throw ConfigError("evalkit: background pool is empty");
  for (const auto& bg : backgrounds)
    if (bg.width() != size || bg.height() != size) throw ConfigError("evalkit: background pool size does not match test size");
  for (const auto& s : heavy.specs)
    if (augment::op_kind(s.op) == augment::Kind::Geometric && s.probability > 0.0)
      throw ConfigError("evalkit: heavy pipeline must be photometric so tiers share masks");

  TestSuite suite;
  for (Tier t : kAllTiers) {
    auto& m = suite[t];
    m.seed = seed;
    m.base_dir = out_dir / tier_dir(t);
    m.metadata = {{"tier", tier_name(t)}, {"size", size}};
    fs::create_directories(m.base_dir / "images");
    fs::create_directories(m.base_dir / "masks");
  }
  for (std::size_t i = 0; i < count; ++i) {
    const auto p = scenegen::dataset_sample_params(seed, i, ranges, size);
    const auto clean = scenegen::render_realistic(p, size, size);
    const auto composed = imaging::composite(clean.image, clean.mask, backgrounds[i % backgrounds.size()]);
    Rng rng(derive_seed(heavy.master_seed, {tag("heavy"), i}));
    const auto augmented = augment::apply_pipeline(composed, clean.mask, heavy, rng);

    const std::array<const imaging::RasterImage*, 3> images{&clean.image, &composed, &augmented.image};
    for (Tier t : kAllTiers) {
      auto& m = suite[t];
      scenegen::ManifestRow row{"images/" + scenegen::sample_name(i), "masks/" + scenegen::sample_name(i),
                                scenegen::Domain::Realistic, p, p.seed};
      imaging::write_image(m.base_dir / row.image, *images[static_cast<int>(t)]);
      imaging::write_mask(m.base_dir / row.mask, clean.mask);
      m.rows.push_back(std::move(row));
    }
  }
  for (Tier t : kAllTiers) scenegen::write_manifest(suite[t].base_dir / "manifest.jsonl", suite[t]);
  return suite;
}

inline TestSuite read_test_suite(const fs::path& dir) {
  TestSuite suite;
  for (Tier t : kAllTiers) suite[t] = scenegen::read_manifest(dir / tier_dir(t) / "manifest.jsonl");
  return suite;
}

/// Throws ConfigError if any test scene seed also appears in a training manifest.
inline void require_disjoint_seeds(const TestSuite& suite, const std::vector<const DatasetManifest*>& training) {
  std::set<std::uint64_t> seen;
  for (const auto* m : training)
    for (const auto& r : m->rows) seen.insert(r.params.seed);
  for (Tier t : kAllTiers)
    for (const auto& r : suite[t].rows)
      if (seen.count(r.params.seed))
        throw ConfigError("evalkit: test scene seed " + std::to_string(r.params.seed) + " also appears in training data");
}

}  // namespace sim2real::evalkit
