#pragma once

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "peit/errors.hpp"

// Run-configuration parsing.  Configs are flat-ish JSON; every physical
// quantity carries its unit in the key name: *_mhz for cyclic frequencies
// (converted to angular rad/us on read), *_rad_us for angular frequencies
// taken as-is, *_us for times, bare names for dimensionless quantities.
// Keys that nothing consumed are rejected, so typos fail loudly instead
// of silently falling back to defaults.

namespace peit {

using nlohmann::json;

class ConfigReader {
public:
  explicit ConfigReader(json obj, std::string context = "config")
      : obj_(std::move(obj)), context_(std::move(context)) {
    if (!obj_.is_object())
      throw ConfigError(context_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  // angular frequency in rad/us from either <base>_mhz or <base>_rad_us
  double angular(const std::string& base) {
    const std::string k_mhz = base + "_mhz";
    const std::string k_rad = base + "_rad_us";
    const bool has_mhz = obj_.contains(k_mhz);
    const bool has_rad = obj_.contains(k_rad);
    if (has_mhz && has_rad)
      throw ConfigError(context_ + ": give only one of " + k_mhz + " and " +
                        k_rad);
    if (has_mhz) return 2.0 * M_PI * number(k_mhz);
    if (has_rad) return number(k_rad);
    throw ConfigError(context_ + ": missing " + k_mhz + " (or " + k_rad + ")");
  }

  double angular_or(const std::string& base, double fallback) {
    if (obj_.contains(base + "_mhz") || obj_.contains(base + "_rad_us"))
      return angular(base);
    return fallback;
  }

  double number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number())
      throw ConfigError(context_ + "." + key + ": expected a number");
    return v.get<double>();
  }

  double number_or(const std::string& key, double fallback) {
    return obj_.contains(key) ? number(key) : fallback;
  }

  int integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer())
      throw ConfigError(context_ + "." + key + ": expected an integer");
    return v.get<int>();
  }

  int integer_or(const std::string& key, int fallback) {
    return obj_.contains(key) ? integer(key) : fallback;
  }

  bool flag_or(const std::string& key, bool fallback) {
    if (!obj_.contains(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean())
      throw ConfigError(context_ + "." + key + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string())
      throw ConfigError(context_ + "." + key + ": expected a string");
    return v.get<std::string>();
  }

  std::string text_or(const std::string& key, const std::string& fallback) {
    return obj_.contains(key) ? text(key) : fallback;
  }

  std::vector<double> number_list(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array())
      throw ConfigError(context_ + "." + key + ": expected an array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number())
        throw ConfigError(context_ + "." + key + ": expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<double> number_list_or(const std::string& key,
                                     std::vector<double> fallback) {
    return obj_.contains(key) ? number_list(key) : std::move(fallback);
  }

  json child(const std::string& key) {
    const json& v = at(key);
    if (!v.is_object() && !v.is_array())
      throw ConfigError(context_ + "." + key +
                        ": expected an object or array");
    return v;
  }

  // fails on any present key that no getter consumed
  void finish() const {
    std::vector<std::string> unknown;
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) unknown.push_back(it.key());
    if (!unknown.empty()) {
      std::string msg = context_ + ": unknown key(s):";
      for (const auto& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
  }

  const json& raw() const { return obj_; }
  const std::string& context() const { return context_; }

private:
  const json& at(const std::string& key) {
    if (!obj_.contains(key))
      throw ConfigError(context_ + ": missing key " + key);
    seen_.insert(key);
    return obj_.at(key);
  }

  json obj_;
  std::string context_;
  std::set<std::string> seen_;
};

} // namespace peit
