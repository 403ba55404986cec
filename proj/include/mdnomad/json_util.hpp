#pragma once

// Typed, path-reporting reads of optional JSON fields for config files.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "mdnomad/error.hpp"

namespace mdnomad {

using Json = nlohmann::json;

/// Overwrites `out` with j[key] when present; leaves it untouched otherwise.
template <typename T>
void read_field(const Json& j, const std::string& key, T& out, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) return;
  const Json& v = j.at(key);
  const std::string where = path.empty() ? key : path + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
    out = v.get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) {
        out = v.get<T>();
      } else {
        if (v.get<std::int64_t>() < 0) throw ConfigError(where + ": expected a non-negative integer");
        out = static_cast<T>(v.get<std::int64_t>());
      }
    } else {
      out = v.get<T>();
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError(where + ": expected a number");
    out = v.get<T>();
    if (!std::isfinite(out)) throw ConfigError(where + ": expected a finite number");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    out = v.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<int>>) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected an integer");
      out.push_back(v[i].get<int>());
    }
  } else if constexpr (std::is_same_v<T, std::vector<double>>) {
    if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(where + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
  } else {
    static_assert(sizeof(T) == 0, "unsupported config field type");
  }
}

/// Rejects keys outside `allowed`, so typos in config files do not pass silently.
inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& path) {
  if (!j.is_object()) throw ConfigError((path.empty() ? "<root>" : path) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError((path.empty() ? key : path + "." + key) + ": unknown field");
  }
}

}  // namespace mdnomad
