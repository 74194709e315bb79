#pragma once

#include "pxm/signal/signal.hpp"

#include <cstdint>

namespace pxm::signal {

/// Each transform fires independently with its probability.
struct AugmentConfig {
  double p_crop = 0.5;
  double max_crop_fraction = 0.1;  // of the signal length
  double p_scale = 0.5;
  double alpha = 0.2;              // scale factor in [1 - alpha, 1 + alpha]
  double p_noise = 0.5;
  double beta = 0.05;              // noise sd, mV
  double p_wander = 0.5;
  double wander_max_hz = 0.5;
  double wander_amplitude = 0.1;   // mV

  /// Throws ConfigError for probabilities outside [0, 1] or negative magnitudes.
  void validate() const;
  static AugmentConfig none();
};

/// What `augment` actually did.
struct AugmentRecord {
  bool cropped = false;
  Eigen::Index crop_start = 0;
  Eigen::Index crop_length = 0;
  bool scaled = false;
  double scale = 1.0;
  bool noised = false;
  bool wandered = false;
  double wander_hz = 0.0;
  double wander_phase = 0.0;
};

/// Crop-and-pad, amplitude scaling, Gaussian noise and baseline wander, in
/// that order. Deterministic given `seed`.
Signal augment(const Signal& s, std::uint64_t seed, const AugmentConfig& cfg, AugmentRecord* record = nullptr);

}  // namespace pxm::signal
