#pragma once

// Typed access to nested JSON with field-path error messages.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdgh/errors.hpp"

namespace sdgh::harness {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

class Fields {
 public:
  Fields(const json& node, std::string path) : node_(&node), path_(std::move(path)) {
    if (!node.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const noexcept { return path_; }
  const json& raw() const noexcept { return *node_; }
  bool has(const std::string& key) const { return node_->contains(key) && !(*node_)[key].is_null(); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  Fields object(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required object missing");
    return Fields((*node_)[key], field(key));
  }
  std::optional<Fields> optional_object(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return Fields((*node_)[key], field(key));
  }

  double number(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required number missing");
    const json& v = (*node_)[key];
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

  std::int64_t integer(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required integer missing");
    const json& v = (*node_)[key];
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = (*node_)[key];
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required string missing");
    const json& v = (*node_)[key];
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required array missing");
    const json& v = (*node_)[key];
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  std::vector<Fields> objects(const std::string& key) const {
    if (!has(key)) throw ConfigError(field(key), "required array missing");
    const json& v = (*node_)[key];
    if (!v.is_array() || v.empty()) throw ConfigError(field(key), "expected a non-empty array of objects");
    std::vector<Fields> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], field(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  // Range helpers throw with this object's path.
  double positive(const std::string& key) const {
    const double v = number(key);
    if (!(v > 0.0)) throw ConfigError(field(key), "must be positive");
    return v;
  }
  double positive(const std::string& key, double fallback) const { return has(key) ? positive(key) : fallback; }

 private:
  const json* node_;
  std::string path_;
};

}  // namespace sdgh::harness
