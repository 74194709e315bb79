#pragma once

#include "pxm/config/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pxm::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kNumeric = 3, kInvariant = 4 };

inline constexpr const char* kRunManifest = "run_manifest.json";

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config_path;
  nlohmann::json config;  // resolved snapshot
  std::uint64_t seed = 0;
  std::string out_dir;
  std::map<std::string, std::string> artifacts;  // path relative to out_dir -> sha256

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  /// Hashes every artifact path (relative to out_dir) and writes run_manifest.json.
  void write(const std::filesystem::path& out_dir, const std::vector<std::filesystem::path>& files);
};

RunManifest read_run_manifest(const std::filesystem::path& path);

/// Options shared by the subcommands; unset optionals keep config values.
struct Options {
  std::string config;
  std::string out;
  std::string cohort;
  std::string checkpoint;
  std::string task;
  std::string input;
  std::string kors_matrix;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> loss_variant;
  std::optional<double> lambda;
  std::optional<double> stride;
  std::vector<int> k;
  int workers = 1;
  std::vector<std::string> arguments;  // raw command line for the manifest
};

/// Config file (or defaults) with command-line overrides applied.
config::RunConfig resolve_config(const Options& opt);

/// Generates a cohort from the config's cohort section into `out`.
void cmd_synth(const Options& opt);
/// Trains on the cohort in `opt.cohort`; writes metrics, checkpoints and a manifest.
void cmd_train(const Options& opt);
/// task in {zeroshot, probe, retrieve, window, ablate}.
void cmd_eval(const Options& opt);
/// Reads a 3-lead VCG or 12-lead CSV, converts VCG to 12 leads with the Kors
/// matrix, resamples to the encoder rate and writes the z-scored result.
void cmd_preprocess(const Options& opt);

/// Parses the command line and maps exceptions to exit codes.
int run(int argc, char** argv);

}  // namespace pxm::cli
