// Apache License, Version 2.0, refer to LICENSE.txt

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "urbanpat/errors.hpp"
#include "urbanpat/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitInvariant = 3;

std::string flag_name(const std::string& key) {
  std::string f = key;
  for (auto& c : f) {
    if (c == '_') c = '-';
  }
  return "--" + f;
}

struct Subcommand {
  const char* name;
  const char* help;
};

constexpr Subcommand kSubcommands[] = {
    {"ingest", "filter cultural fans and build the corpus"},
    {"fit", "fit the pattern model and export distributions"},
    {"select-k", "choose the pattern count by temporal coherence"},
    {"profiles", "compute per-user activity centres and radii"},
    {"dsi", "compute demand, supply and DSR layers on the city grid"},
    {"validate", "correlate DSR with user travel distance"},
    {"synth", "generate a synthetic check-in corpus with ground truth"},
    {"report", "bundle exports and write the run manifest"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urban cultural activity pattern mining"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "key = value configuration file");

  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  for (const auto& s : urbanpat::setting_keys()) {
    options[s.key] = app.add_option(flag_name(s.key), values[s.key], s.help);
  }

  std::string chosen;
  for (const auto& sub : kSubcommands) {
    app.add_subcommand(sub.name, sub.help)->callback([&chosen, name = sub.name] {
      chosen = name;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    urbanpat::RunConfig config;
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& s : urbanpat::setting_keys()) {
      if (options[s.key]->count() > 0) config.set(s.key, values[s.key]);
    }
    const auto result = urbanpat::run_stage(chosen, config);
    for (const auto& m : result.messages) std::cout << chosen << ": " << m << '\n';
    std::cout << chosen << ": wrote " << result.artifacts.size() << " artifacts in "
              << result.seconds << " s\n";
    return kExitOk;
  } catch (const urbanpat::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const urbanpat::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const urbanpat::InvariantError& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInvariant;
  }
}
