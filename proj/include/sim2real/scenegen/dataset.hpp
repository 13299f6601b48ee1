#pragma once

#include <cstdio>
#include <filesystem>
#include <string>

#include "sim2real/core/rng.hpp"
#include "sim2real/imaging/png_io.hpp"
#include "sim2real/scenegen/manifest.hpp"
#include "sim2real/scenegen/scene.hpp"

namespace sim2real::scenegen {

enum class Style { Synthetic, Realistic };

inline std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu.png", index);
  return buf;
}

/// Draws the parameters of sample `index` of a dataset. Each sample owns an rng
/// stream derived from (seed, index), so samples are independent of build order.
inline SceneParams dataset_sample_params(std::uint64_t seed, std::size_t index, const SceneRanges& ranges, int size) {
  Rng rng(derive_seed(seed, {tag("scene"), index}));
  return sample_scene_params(rng, ranges, size, size);
}

inline RenderedScene render(Style style, const SceneParams& p, int size) {
  return style == Style::Synthetic ? render_synthetic(p, size, size) : render_realistic(p, size, size);
}

/// Renders `count` image/mask pairs under out_dir/{images,masks}/ and writes
/// out_dir/manifest.jsonl last.
inline DatasetManifest build_dataset(std::size_t count, Style style, const SceneRanges& ranges, int size,
                                     const fs::path& out_dir, std::uint64_t seed) {
  ranges.validate();
  DatasetManifest m;
  m.seed = seed;
  m.base_dir = out_dir;
  m.metadata = {{"style", style == Style::Synthetic ? "SYNTHETIC" : "REALISTIC"}, {"size", size}};
  fs::create_directories(out_dir);
  if (count > 0) {
    fs::create_directories(out_dir / "images");
    fs::create_directories(out_dir / "masks");
  }
  const Domain domain = style == Style::Synthetic ? Domain::Synthetic : Domain::Realistic;
  for (std::size_t i = 0; i < count; ++i) {
    const SceneParams p = dataset_sample_params(seed, i, ranges, size);
    const auto scene = render(style, p, size);
    ManifestRow row{"images/" + sample_name(i), "masks/" + sample_name(i), domain, p, p.seed};
    imaging::write_image(out_dir / row.image, scene.image);
    imaging::write_mask(out_dir / row.mask, scene.mask);
    m.rows.push_back(std::move(row));
  }
  write_manifest(out_dir / "manifest.jsonl", m);
  return m;
}

}  // namespace sim2real::scenegen
