#pragma once

#include "pxm/autodiff/ops.hpp"

#include <string>
#include <variant>
#include <vector>

namespace pxm::ad {

// Layer descriptors for `forward_graph`. Parameter names are looked up in the
// ParamStore as "<name>.w" / "<name>.b" (and "<name>.gain" / "<name>.bias"
// for layer normalization).
struct DenseLayer { std::string name; };
struct ReluLayer {};
struct Conv1dLayer {
  std::string name;
  Index kernel_size = 1;
  Conv1dGeometry geometry{};
};
struct LayerNormLayer { std::string name; };
struct GlobalAvgPoolLayer {};
/// Remembers the current activation in slot `slot`.
struct SaveLayer { int slot = 0; };
/// Adds the activation saved in `slot`, optionally through a 1x1 strided
/// projection named `projection` (empty for an identity shortcut).
struct ResidualAddLayer {
  int slot = 0;
  std::string projection;
  Index stride = 1;
};

using Layer = std::variant<DenseLayer, ReluLayer, Conv1dLayer, LayerNormLayer, GlobalAvgPoolLayer,
                           SaveLayer, ResidualAddLayer>;

/// Applies `layers` in order to `input`. An empty list returns `input`.
/// Shape errors name the failing layer index and kind.
Var forward_graph(const std::vector<Layer>& layers, const Var& input, ParamStore& params);

}  // namespace pxm::ad
