#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/core/errors.hpp"
#include "sim2real/imaging/png_io.hpp"
#include "sim2real/scenegen/scene.hpp"

namespace sim2real::scenegen {

namespace fs = std::filesystem;
using nlohmann::json;

enum class Domain { Synthetic, Realistic, Adapted };

inline const char* to_string(Domain d) {
  switch (d) {
    case Domain::Synthetic: return "SYNTHETIC";
    case Domain::Realistic: return "REALISTIC";
    case Domain::Adapted: return "ADAPTED";
  }
  return "?";
}

inline Domain domain_from_string(const std::string& s) {
  if (s == "SYNTHETIC") return Domain::Synthetic;
  if (s == "REALISTIC") return Domain::Realistic;
  if (s == "ADAPTED") return Domain::Adapted;
  throw IoError("unknown domain tag '" + s + "'");
}

inline json params_to_json(const SceneParams& p) {
  return json{{"x", p.x},         {"y", p.y},
              {"rotation_deg", p.rotation_deg}, {"scale", p.scale},
              {"joint_deg", p.joint_deg},       {"light", {p.light[0], p.light[1]}},
              {"seed", p.seed}};
}

inline SceneParams params_from_json(const json& j) {
  SceneParams p;
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.rotation_deg = j.at("rotation_deg").get<double>();
  p.scale = j.at("scale").get<double>();
  p.joint_deg = j.at("joint_deg").get<double>();
  p.light = {j.at("light").at(0).get<double>(), j.at("light").at(1).get<double>()};
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

struct ManifestRow {
  std::string image;  // relative to the manifest's directory
  std::string mask;
  Domain domain = Domain::Synthetic;
  SceneParams params;
  std::uint64_t seed = 0;

  bool operator==(const ManifestRow&) const = default;
};

/// Ordered sample list. Stored as JSON Lines; dataset-level fields go to a
/// `<name>.meta.json` sidecar so every line of the main file is a sample.
struct DatasetManifest {
  std::vector<ManifestRow> rows;
  std::uint64_t seed = 0;
  json metadata = json::object();
  fs::path base_dir;  // directory the relative row paths resolve against

  fs::path image_path(std::size_t i) const { return base_dir / rows.at(i).image; }
  fs::path mask_path(std::size_t i) const { return base_dir / rows.at(i).mask; }
  std::size_t size() const noexcept { return rows.size(); }
  bool empty() const noexcept { return rows.empty(); }
};

inline fs::path meta_path(const fs::path& manifest_path) {
  return manifest_path.parent_path() / (manifest_path.stem().string() + ".meta.json");
}

/// Writes the manifest and its sidecar via temp files + rename, so a failed
/// write never leaves a partial manifest behind.
inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path tmp = path.string() + ".tmp";
  const fs::path meta_tmp = meta_path(path).string() + ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open " + tmp.string());
      for (const auto& r : m.rows) {
        json row{{"image", r.image}, {"mask", r.mask}, {"domain", to_string(r.domain)},
                 {"params", params_to_json(r.params)}, {"seed", r.seed}};
        out << row.dump() << '\n';
      }
      if (!out.flush()) throw IoError("write failed for " + tmp.string());
    }
    {
      std::ofstream out(meta_tmp, std::ios::binary | std::ios::trunc);
      json meta{{"seed", m.seed}, {"count", m.rows.size()}, {"metadata", m.metadata}};
      out << meta.dump(2) << '\n';
      if (!out.flush()) throw IoError("write failed for " + meta_tmp.string());
    }
    fs::rename(meta_tmp, meta_path(path));
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    fs::remove(meta_tmp, ec);
    throw;
  }
}

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      ManifestRow r;
      r.image = j.at("image").get<std::string>();
      r.mask = j.at("mask").get<std::string>();
      r.domain = domain_from_string(j.at("domain").get<std::string>());
      r.params = params_from_json(j.at("params"));
      r.seed = j.at("seed").get<std::uint64_t>();
      m.rows.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed manifest row: " + e.what());
    }
  }
  if (const auto mp = meta_path(path); fs::exists(mp)) {
    std::ifstream min(mp);
    const json meta = json::parse(min);
    m.seed = meta.value("seed", std::uint64_t{0});
    m.metadata = meta.value("metadata", json::object());
  }
  return m;
}

/// Files exist, image/mask dimensions agree row-wise, no duplicate image paths.
inline void validate_manifest(const DatasetManifest& m) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    const auto& r = m.rows[i];
    if (!seen.insert(r.image).second) throw IoError("manifest: duplicate image path " + r.image);
    if (!fs::exists(m.image_path(i))) throw IoError("manifest: missing image " + m.image_path(i).string());
    if (!fs::exists(m.mask_path(i))) throw IoError("manifest: missing mask " + m.mask_path(i).string());
    const auto img = imaging::read_image(m.image_path(i));
    const auto mask = imaging::read_mask(m.mask_path(i));
    if (img.width() != mask.width() || img.height() != mask.height())
      throw IoError("manifest: row " + std::to_string(i) + " image/mask dimensions disagree");
  }
}

}  // namespace sim2real::scenegen
