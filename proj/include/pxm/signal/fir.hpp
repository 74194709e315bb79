#pragma once

#include "pxm/signal/signal.hpp"

#include <complex>
#include <vector>

namespace pxm::signal {

/// Linear-phase low-pass FIR with unit DC gain.
struct FirFilter {
  std::vector<double> coefficients;
  double cutoff_hz = 0.0;
  double fs = 0.0;

  std::size_t taps() const { return coefficients.size(); }
  /// Magnitude of the frequency response at `hz`, by direct DFT of the taps.
  double gain_at(double hz) const;
};

inline constexpr int kDefaultDecimationTaps = 101;
inline constexpr double kCutoffFraction = 0.4;

/// Hamming-windowed sinc at cutoff 0.4 * fs_out, normalized to unit DC gain.
/// Requires fs_out < fs_in and an odd tap count of at least 31.
FirFilter design_lowpass_fir(double fs_in, double fs_out, int taps = kDefaultDecimationTaps);

/// Zero-phase filtering with symmetric edge padding, then keeps every
/// (fs_in / fs_out)-th sample. The ratio must be an integer.
Signal decimate(const Signal& s, double fs_out, int taps = kDefaultDecimationTaps);

/// Zero-phase filtering of one row without decimation (output length equals input).
Eigen::VectorXd filter_zero_phase(const FirFilter& f, const Eigen::VectorXd& x);

}  // namespace pxm::signal
