#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "subsde/sde_flow.hpp"

namespace subsde {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Grammar, one entry per line:
///
///   [section]
///   key = value        # comment
///
/// Keys are stored as "section.key". Lists are comma separated. A file whose
/// first non-blank character is '{' is read as JSON instead: nested objects
/// become sections and arrays become lists.
class ExperimentConfig {
 public:
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);

  /// Canonical key=value text; parse(serialize()) reproduces the entries.
  std::string serialize() const;
  /// FNV-1a 64 of serialize().
  std::uint64_t hash() const;

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void set(const std::string& key, const std::string& value);
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Throws ConfigError naming the first missing or invalid field.
  void validate() const;

  // Typed views (call validate() first).
  std::string model_name() const { return get_string("model.name", ""); }
  SubordinatorSpec spec() const;
  double eps() const { return get_double("subordinator.eps", kDefaultCut); }
  double horizon() const { return get_double("run.t", 1.0); }
  std::size_t paths(std::size_t fallback) const;
  double dt_max() const { return get_double("run.dt_max", 0.0); }
  std::uint64_t seed() const { return get_u64("run.seed", 1); }
  unsigned threads() const { return static_cast<unsigned>(get_u64("run.threads", 1)); }

  SdeModel model() const;
  Vec x0() const;

 private:
  std::map<std::string, std::string> entries_;
};

std::string hex64(std::uint64_t v);

}  // namespace subsde
