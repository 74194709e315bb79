#pragma once

#include "pxm/train/train.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pxm::config {

struct EvalSettings {
  double stride_s = 5.0;
  std::vector<int> ks{1, 5, 10};
  std::vector<double> probe_fractions{0.1, 1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<train::LossVariant> variants = train::all_variants();
  void validate() const;
};

/// Every knob of a run. Missing keys keep their defaults; unknown keys are
/// rejected with the offending path.
struct RunConfig {
  synth::CohortConfig cohort;
  train::TrainSetup setup;  // text vocabulary follows the cohort
  EvalSettings eval;

  void validate() const;
};

RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

/// Throws ConfigError on unreadable or malformed files.
RunConfig load_config(const std::filesystem::path& path);
/// Compact JSON with sorted keys; stable across runs.
std::string canonical_dump(const nlohmann::json& j);
/// SHA-256 of canonical_dump(to_json(c)).
std::string config_hash(const RunConfig& c);

nlohmann::json to_json(const synth::CohortConfig& c);
synth::CohortConfig cohort_from_json(const nlohmann::json& j);

}  // namespace pxm::config
