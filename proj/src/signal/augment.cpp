#include "pxm/signal/augment.hpp"

#include "pxm/errors.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pxm::signal {

void AugmentConfig::validate() const {
  auto probability = [](const char* field, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(field, "must lie in [0, 1]");
  };
  auto magnitude = [](const char* field, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(field, "must be a finite value >= 0");
  };
  probability("p_crop", p_crop);
  probability("p_scale", p_scale);
  probability("p_noise", p_noise);
  probability("p_wander", p_wander);
  probability("max_crop_fraction", max_crop_fraction);
  magnitude("alpha", alpha);
  magnitude("beta", beta);
  magnitude("wander_max_hz", wander_max_hz);
  magnitude("wander_amplitude", wander_amplitude);
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig c;
  c.p_crop = c.p_scale = c.p_noise = c.p_wander = 0.0;
  return c;
}

Signal augment(const Signal& s, std::uint64_t seed, const AugmentConfig& cfg, AugmentRecord* record) {
  cfg.validate();
  s.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentRecord rec;
  Signal out = s;
  const Eigen::Index n = s.samples();

  // Decide every transform up front so the draw sequence does not depend on
  // which ones fire.
  const bool crop = unit(rng) < cfg.p_crop;
  const bool scale = unit(rng) < cfg.p_scale;
  const bool noise = unit(rng) < cfg.p_noise;
  const bool wander = unit(rng) < cfg.p_wander;

  if (crop) {
    const auto max_cut = static_cast<Eigen::Index>(std::floor(cfg.max_crop_fraction * static_cast<double>(n)));
    const Eigen::Index cut = max_cut > 0 ? std::uniform_int_distribution<Eigen::Index>(0, max_cut)(rng) : 0;
    const Eigen::Index start = cut > 0 ? std::uniform_int_distribution<Eigen::Index>(0, cut)(rng) : 0;
    rec.cropped = true;
    rec.crop_start = start;
    rec.crop_length = n - cut;
    Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(s.leads(), n);
    shifted.leftCols(n - cut) = s.data.middleCols(start, n - cut);
    out.data = std::move(shifted);
  }
  if (scale) {
    rec.scaled = true;
    rec.scale = std::uniform_real_distribution<double>(1.0 - cfg.alpha, 1.0 + cfg.alpha)(rng);
    out.data *= rec.scale;
  }
  if (noise) {
    rec.noised = true;
    if (cfg.beta > 0.0) {
      std::normal_distribution<double> gauss(0.0, cfg.beta);
      for (Eigen::Index t = 0; t < n; ++t)
        for (Eigen::Index l = 0; l < out.leads(); ++l) out.data(l, t) += gauss(rng);
    }
  }
  if (wander) {
    rec.wandered = true;
    rec.wander_hz = unit(rng) * cfg.wander_max_hz;
    rec.wander_phase = unit(rng) * 2.0 * std::numbers::pi;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double time = static_cast<double>(t) / s.fs;
      out.data.col(t).array() +=
          cfg.wander_amplitude * std::sin(2.0 * std::numbers::pi * rec.wander_hz * time + rec.wander_phase);
    }
  }
  if (record != nullptr) *record = rec;
  return out;
}

}  // namespace pxm::signal
