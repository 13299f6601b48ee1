#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/files.hpp"
#include "sim2real/nn/adam.hpp"
#include "sim2real/nn/layers.hpp"

namespace sim2real::nn {

namespace fs = std::filesystem;

inline constexpr char kCheckpointMagic[8] = {'S', '2', 'R', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned binary container: magic, version, kind, embedded JSON, then named arrays.
class CheckpointWriter {
 public:
  CheckpointWriter(std::string kind, const nlohmann::json& meta) {
    buf_.insert(buf_.end(), kCheckpointMagic, kCheckpointMagic + 8);
    put<std::uint32_t>(kCheckpointVersion);
    put_string(kind);
    put_string(meta.dump());
  }

  template <typename Container>
  void add(const std::string& name, const Container& data) {
    using S = typename Container::value_type;
    put_string(name);
    put<std::uint8_t>(static_cast<std::uint8_t>(sizeof(S)));
    put<std::uint64_t>(data.size());
    const auto* p = reinterpret_cast<const char*>(data.data());
    buf_.insert(buf_.end(), p, p + data.size() * sizeof(S));
  }

  template <typename S>
  void add_params(const std::string& prefix, const ParamList<S>& ps) {
    for (auto* p : ps) add(prefix + p->name, p->value);
  }

  template <typename S>
  void add_adam(const std::string& prefix, Adam<S>& opt) {
    add(prefix + ".steps", std::vector<std::uint64_t>{opt.steps()});
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
      add(prefix + ".m" + std::to_string(i), opt.first_moments()[i]);
      add(prefix + ".v" + std::to_string(i), opt.second_moments()[i]);
    }
  }

  const std::vector<char>& bytes() const noexcept { return buf_; }

  /// Temp file + rename: an interrupted write never clobbers an existing checkpoint.
  void save(const fs::path& path) const {
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open " + tmp.string());
      out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
      if (!out.flush()) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw IoError("checkpoint write failed: " + tmp.string());
      }
    }
    fs::rename(tmp, path);
  }

 private:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof v);
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  std::vector<char> buf_;
};

class CheckpointReader {
 public:
  explicit CheckpointReader(const fs::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path_);
    buf_.assign(std::istreambuf_iterator<char>(in), {});
    if (buf_.size() < 12 || std::memcmp(buf_.data(), kCheckpointMagic, 8) != 0)
      throw IoError(path_ + ": not a checkpoint file");
    pos_ = 8;
    const auto version = get<std::uint32_t>();
    if (version != kCheckpointVersion)
      throw IoError(path_ + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
    kind_ = get_string();
    meta_ = nlohmann::json::parse(get_string());
    while (pos_ < buf_.size()) {
      Entry e;
      const std::string name = get_string();
      e.scalar_size = get<std::uint8_t>();
      e.count = get<std::uint64_t>();
      e.offset = pos_;
      pos_ += e.count * e.scalar_size;
      if (pos_ > buf_.size()) throw IoError(path_ + ": truncated checkpoint");
      entries_.emplace(name, e);
    }
  }

  const std::string& kind() const noexcept { return kind_; }
  const nlohmann::json& meta() const noexcept { return meta_; }

  template <typename S>
  std::vector<S> get_array(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IoError(path_ + ": missing array '" + name + "'");
    if (it->second.scalar_size != sizeof(S)) throw IoError(path_ + ": scalar size mismatch for '" + name + "'");
    std::vector<S> out(it->second.count);
    std::memcpy(out.data(), buf_.data() + it->second.offset, it->second.count * sizeof(S));
    return out;
  }

  template <typename S>
  void load_params(const std::string& prefix, const ParamList<S>& ps) const {
    for (auto* p : ps) {
      auto v = get_array<S>(prefix + p->name);
      if (v.size() != p->size()) throw IoError(path_ + ": size mismatch for '" + prefix + p->name + "'");
      p->value.assign(v.begin(), v.end());
    }
  }

  template <typename S>
  void load_adam(const std::string& prefix, Adam<S>& opt) const {
    opt.set_steps(get_array<std::uint64_t>(prefix + ".steps").at(0));
    for (std::size_t i = 0; i < opt.first_moments().size(); ++i) {
      opt.first_moments()[i] = get_array<S>(prefix + ".m" + std::to_string(i));
      opt.second_moments()[i] = get_array<S>(prefix + ".v" + std::to_string(i));
    }
  }

 private:
  struct Entry {
    std::uint8_t scalar_size = 0;
    std::uint64_t count = 0;
    std::size_t offset = 0;
  };

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > buf_.size()) throw IoError(path_ + ": truncated checkpoint");
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (pos_ + n > buf_.size()) throw IoError(path_ + ": truncated checkpoint");
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::string path_;
  std::vector<char> buf_;
  std::size_t pos_ = 0;
  std::string kind_;
  nlohmann::json meta_;
  std::map<std::string, Entry> entries_;
};

/// FNV-1a of a file's bytes, rendered as hex. Used as a stable checkpoint id.
inline std::string file_digest(const fs::path& path) { return fnv1a_hex(read_file(path)); }

}  // namespace sim2real::nn
