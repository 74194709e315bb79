#pragma once

#include "pxm/autodiff/tape.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace pxm::ad {

/// Builds a scalar loss from the current parameter values.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckOptions {
  double eps = 1e-5;
  /// Per parameter, check at most this many coordinates (0 = all). Chosen
  /// coordinates are a deterministic function of `seed`.
  Index max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  Index coords_checked = 0;
};

/// Compares backward() against central differences. Relative error per
/// coordinate is |analytic - numeric| / max(1, |numeric|).
/// Throws NumericError when a probed loss is non-finite.
GradCheckResult grad_check(const LossBuilder& build, ParamStore& params, const GradCheckOptions& opt = {});

}  // namespace pxm::ad
