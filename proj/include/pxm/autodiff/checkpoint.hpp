#pragma once

#include "pxm/autodiff/param_store.hpp"

#include <filesystem>
#include <iosfwd>

namespace pxm::ad {

// Binary layout, all integers little-endian:
//   "PXM1"                      4 bytes
//   u32 parameter count
//   per parameter, in name order:
//     u32 name length, name bytes
//     u32 rank, rank x u64 extents
//     f64 payload in logical row-major order
// Optimizer moments are not stored; a loaded store starts at step 0.

void write_checkpoint(std::ostream& out, const ParamStore& params);
ParamStore read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace pxm::ad
