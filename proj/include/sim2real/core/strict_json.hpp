#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "sim2real/core/errors.hpp"

namespace sim2real {

/// Reads fields out of one JSON object and rejects any key that was never
/// asked for, naming it as "<section>.<key>".
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    known_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + qualified(key) + "' has the wrong type");
    }
  }

  const nlohmann::json* child(const char* key) {
    known_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string qualified(const std::string& key) const { return section_.empty() ? key : section_ + "." + key; }

  /// Throws on the first key that no read()/child() call claimed.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!known_.count(it.key())) throw ConfigError("unknown config key '" + qualified(it.key()) + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string section_;
  std::set<std::string> known_;
};

}  // namespace sim2real
