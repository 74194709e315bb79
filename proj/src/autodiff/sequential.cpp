#include "pxm/autodiff/sequential.hpp"

#include "pxm/errors.hpp"

#include <map>

namespace pxm::ad {
namespace {

const char* kind(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> const char* {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, DenseLayer>) return "dense";
        if constexpr (std::is_same_v<T, ReluLayer>) return "relu";
        if constexpr (std::is_same_v<T, Conv1dLayer>) return "conv1d";
        if constexpr (std::is_same_v<T, LayerNormLayer>) return "layer_norm";
        if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) return "global_avg_pool";
        if constexpr (std::is_same_v<T, SaveLayer>) return "save";
        return "residual_add";
      },
      layer);
}

}  // namespace

Var forward_graph(const std::vector<Layer>& layers, const Var& input, ParamStore& params) {
  Tape& tape = input.tape();
  std::map<int, Var> saved;
  Var x = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& layer = layers[i];
    try {
      x = std::visit(
          [&](const auto& l) -> Var {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, DenseLayer>) {
              return dense(x, tape.param(params, l.name + ".w"), tape.param(params, l.name + ".b"));
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
              return relu(x);
            } else if constexpr (std::is_same_v<T, Conv1dLayer>) {
              return conv1d(x, tape.param(params, l.name + ".w"), tape.param(params, l.name + ".b"),
                            l.kernel_size, l.geometry);
            } else if constexpr (std::is_same_v<T, LayerNormLayer>) {
              return layer_norm(x, tape.param(params, l.name + ".gain"), tape.param(params, l.name + ".bias"));
            } else if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) {
              return global_avg_pool(x);
            } else if constexpr (std::is_same_v<T, SaveLayer>) {
              saved[l.slot] = x;
              return x;
            } else {
              auto it = saved.find(l.slot);
              if (it == saved.end()) throw ShapeError("no activation saved in slot " + std::to_string(l.slot));
              Var shortcut = it->second;
              if (!l.projection.empty()) {
                shortcut = conv1d(shortcut, tape.param(params, l.projection + ".w"),
                                  tape.param(params, l.projection + ".b"), 1, Conv1dGeometry{l.stride, 0});
              }
              if (shortcut.steps() != x.steps()) {
                throw ShapeError("residual length " + std::to_string(shortcut.steps()) + " vs " +
                                 std::to_string(x.steps()));
              }
              return add(x, shortcut);
            }
          },
          layer);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + kind(layer) + "): " + e.what());
    }
  }
  return x;
}

}  // namespace pxm::ad
