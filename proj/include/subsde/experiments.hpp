#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "subsde/config.hpp"

namespace subsde {

inline constexpr int kExitPass = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitCheckFailed = 2;

const std::vector<std::string>& subcommands();

/// Runs one subcommand, writing <out_dir>/<name>*.csv and <out_dir>/<name>.json.
/// Every CSV starts with a '#'-prefixed timestamp line, then a '#' line with
/// the config hash and seed, then the header row. Returns kExitPass or
/// kExitCheckFailed; throws ConfigError for unusable configs and
/// std::invalid_argument for unknown subcommands.
int run_subcommand(const std::string& name, const ExperimentConfig& config, const std::string& out_dir,
                   std::ostream& log);

}  // namespace subsde
