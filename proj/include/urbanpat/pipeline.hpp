// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "urbanpat/coherence.hpp"
#include "urbanpat/dsi.hpp"
#include "urbanpat/ingest.hpp"
#include "urbanpat/poptics.hpp"
#include "urbanpat/synthgen.hpp"
#include "urbanpat/tlda.hpp"
#include "urbanpat/validate.hpp"

namespace urbanpat {

struct SettingInfo {
  std::string key;
  std::string help;
};

// Every key accepted in a config file; each is also a --flag on the CLI with
// underscores written as dashes.
const std::vector<SettingInfo>& setting_keys();

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path run_dir = "run";
  std::filesystem::path synth_dir = "synth";
  std::optional<std::filesystem::path> categories_file;
  IngestConfig ingest;
  int topics = 6;  // 0 takes the K chosen by select-k
  FitTemplate fit;
  std::size_t chains = 1;
  std::vector<int> k_candidates{3, 4, 5, 6, 7, 8, 9};
  CoherenceConfig coherence;
  PopticsConfig poptics;
  DsiConfig dsi;
  CorrelationLevel correlation = CorrelationLevel::kCell;
  SynthSpec synth;
  std::uint64_t seed = 1;

  // Applies one key. Relative paths resolve against `base`.
  void set(std::string_view key, std::string_view value,
           const std::filesystem::path& base = {});
  // Reads "key = value" lines; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  void validate() const;

  // Effective settings in setting_keys() order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string hash() const;
};

struct StageResult {
  std::string stage;
  std::vector<std::string> artifacts;  // file names inside the output dir
  std::vector<std::string> messages;
  double seconds = 0.0;
};

// Exclusive ownership of an output directory through an O_EXCL lock file.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Artifact file names inside the run directory.
namespace artifact {
inline constexpr const char* kCorpus = "corpus.txt";
inline constexpr const char* kModel = "model.txt";
inline constexpr const char* kSelectedK = "selected_k.txt";
inline constexpr const char* kProfiles = "profiles.csv";
inline constexpr const char* kGrid = "dsr_grid.txt";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

StageResult run_ingest(const RunConfig& config);
StageResult run_fit(const RunConfig& config);
StageResult run_select_k(const RunConfig& config);
StageResult run_profiles(const RunConfig& config);
StageResult run_dsi(const RunConfig& config);
StageResult run_validate(const RunConfig& config);
StageResult run_synth(const RunConfig& config);
StageResult run_report(const RunConfig& config);

// Runs a stage by name ("ingest", "fit", ...), holding the output directory
// lock and recording the stage timing next to its artifacts.
StageResult run_stage(std::string_view stage, const RunConfig& config);

}  // namespace urbanpat
