#include "pxm/signal/fir.hpp"

#include "pxm/errors.hpp"

#include <cmath>
#include <numbers>

namespace pxm::signal {
namespace {

// Half-sample symmetric extension: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} x_{n-2} ...
Eigen::Index reflect(Eigen::Index i, Eigen::Index n) {
  const Eigen::Index period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

int integer_ratio(double fs_in, double fs_out) {
  const double ratio = fs_in / fs_out;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw ShapeError("decimate: fs_in / fs_out = " + std::to_string(ratio) + " is not an integer");
  }
  return static_cast<int>(rounded);
}

}  // namespace

double FirFilter::gain_at(double hz) const {
  std::complex<double> acc{0.0, 0.0};
  const double w = 2.0 * std::numbers::pi * hz / fs;
  for (std::size_t n = 0; n < coefficients.size(); ++n) {
    acc += coefficients[n] * std::polar(1.0, -w * static_cast<double>(n));
  }
  return std::abs(acc);
}

FirFilter design_lowpass_fir(double fs_in, double fs_out, int taps) {
  if (!(fs_in > 0.0) || !(fs_out > 0.0) || !(fs_out < fs_in)) {
    throw std::invalid_argument("design_lowpass_fir: need 0 < fs_out < fs_in");
  }
  if (taps < 31 || taps % 2 == 0) throw std::invalid_argument("design_lowpass_fir: taps must be odd and >= 31");

  FirFilter f;
  f.fs = fs_in;
  f.cutoff_hz = kCutoffFraction * fs_out;
  const double fc = f.cutoff_hz / fs_in;  // cycles per sample
  const int half = (taps - 1) / 2;
  f.coefficients.resize(static_cast<std::size_t>(taps));
  double total = 0.0;
  for (int n = 0; n < taps; ++n) {
    const double m = static_cast<double>(n - half);
    const double sinc = m == 0.0 ? 2.0 * fc : std::sin(2.0 * std::numbers::pi * fc * m) / (std::numbers::pi * m);
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (taps - 1));
    f.coefficients[static_cast<std::size_t>(n)] = sinc * window;
    total += sinc * window;
  }
  for (double& c : f.coefficients) c /= total;
  // Force exact symmetry after normalization.
  for (int n = 0; n < half; ++n) f.coefficients[static_cast<std::size_t>(taps - 1 - n)] = f.coefficients[static_cast<std::size_t>(n)];
  return f;
}

Eigen::VectorXd filter_zero_phase(const FirFilter& f, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  const auto half = static_cast<Eigen::Index>(f.taps() / 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(f.taps()); ++k) {
      acc += f.coefficients[static_cast<std::size_t>(k)] * x(reflect(t + k - half, n));
    }
    y(t) = acc;
  }
  return y;
}

Signal decimate(const Signal& s, double fs_out, int taps) {
  s.validate();
  const int ratio = integer_ratio(s.fs, fs_out);
  if (ratio == 1) return s;
  const FirFilter f = design_lowpass_fir(s.fs, fs_out, taps);
  const Eigen::Index n = s.samples();
  const Eigen::Index out_len = (n + ratio - 1) / ratio;
  const auto half = static_cast<Eigen::Index>(f.taps() / 2);

  Signal out;
  out.fs = fs_out;
  out.lead_names = s.lead_names;
  out.data.resize(s.leads(), out_len);
  for (Eigen::Index lead = 0; lead < s.leads(); ++lead) {
    for (Eigen::Index j = 0; j < out_len; ++j) {
      const Eigen::Index t = j * ratio;
      double acc = 0.0;
      for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(f.taps()); ++k) {
        acc += f.coefficients[static_cast<std::size_t>(k)] * s.data(lead, reflect(t + k - half, n));
      }
      out.data(lead, j) = acc;
    }
  }
  return out;
}

}  // namespace pxm::signal
