#pragma once

#include "pxm/synthdata/cohort.hpp"

#include <filesystem>
#include <vector>

namespace pxm::synth {

inline constexpr const char* kCohortManifest = "manifest.json";
inline constexpr int kSignalCsvDigits = 9;

/// Writes manifest.json (config and per-sample metadata), one signal CSV per
/// sample under signals/, one little-endian float64 frame matrix (n x d, row
/// major) per sample under frames/, and long records under long/.
/// Returns every written path, manifest last.
std::vector<std::filesystem::path> save_cohort(const std::filesystem::path& dir, const Cohort& cohort);

/// Throws IoError for missing files and ConfigError for a malformed manifest.
Cohort load_cohort(const std::filesystem::path& dir);

void write_frames(const std::filesystem::path& path, const FrameEmbeddingSet& frames);
FrameEmbeddingSet read_frames(const std::filesystem::path& path, Eigen::Index n, Eigen::Index d);

}  // namespace pxm::synth
