#include "pxm/autodiff/grad_check.hpp"

#include "pxm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace pxm::ad {
namespace {

double evaluate(const LossBuilder& build, ParamStore& params) {
  Tape tape;
  const Var loss = build(tape, params);
  const Matrix& v = loss.value();
  if (v.size() != 1) throw ShapeError("grad_check: loss is not scalar");
  if (!std::isfinite(v(0, 0))) throw NumericError("grad_check: non-finite loss");
  return v(0, 0);
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, ParamStore& params, const GradCheckOptions& opt) {
  if (!(opt.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  {
    Tape tape;
    const Var loss = build(tape, params);
    if (!std::isfinite(loss.value()(0, 0))) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss, params);
  }
  std::map<std::string, Matrix> analytic;
  for (const auto& [name, p] : params) analytic.emplace(name, p.grad);

  GradCheckResult result;
  std::mt19937_64 rng(opt.seed);
  for (auto& [name, p] : params) {
    Matrix& w = p.tensor.value;
    std::vector<Index> coords(static_cast<std::size_t>(w.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (opt.max_coords_per_param > 0 && w.size() > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(opt.max_coords_per_param));
    }
    const Matrix& g = analytic.at(name);
    for (Index idx : coords) {
      double& slot = w.data()[idx];
      const double orig = slot;
      slot = orig + opt.eps;
      const double up = evaluate(build, params);
      slot = orig - opt.eps;
      const double down = evaluate(build, params);
      slot = orig;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double err = std::abs(g.data()[idx] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.coords_checked;
      if (err > result.max_rel_error || result.worst_index < 0) {
        if (err >= result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_param = name;
          result.worst_index = idx;
        }
      }
    }
  }
  return result;
}

}  // namespace pxm::ad
