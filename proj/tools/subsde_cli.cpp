// Command-line front end: subsde_cli <subcommand> --config FILE [--seed N] [--threads N] [--out DIR]
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "subsde/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and oracle checks for SDEs driven by subordinated Brownian motion"};
  std::string subcommand;
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  unsigned threads = 0;

  std::string names;
  for (const auto& n : subsde::subcommands()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("subcommand", subcommand, "one of: " + names)->required();
  app.add_option("--config", config_path, "key=value or JSON config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "root seed (overrides run.seed)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads (overrides run.threads)")
                          ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return subsde::kExitUsage;
  }

  try {
    auto config = subsde::ExperimentConfig::load(config_path);
    if (*seed_opt) config.set("run.seed", std::to_string(seed));
    if (*threads_opt) config.set("run.threads", std::to_string(threads));
    return subsde::run_subcommand(subcommand, config, out_dir, std::cout);
  } catch (const subsde::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return subsde::kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return subsde::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return subsde::kExitUsage;
  }
}
