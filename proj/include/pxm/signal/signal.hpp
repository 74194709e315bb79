#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pxm::signal {

/// Multi-lead recording in millivolts, one row per lead.
struct Signal {
  Eigen::MatrixXd data;
  double fs = 0.0;
  std::vector<std::string> lead_names;

  Eigen::Index leads() const { return data.rows(); }
  Eigen::Index samples() const { return data.cols(); }
  double duration() const { return fs > 0.0 ? static_cast<double>(samples()) / fs : 0.0; }

  /// Throws ShapeError if fs <= 0 or lead names do not match the row count.
  void validate() const;
};

const std::vector<std::string>& twelve_lead_names();
const std::vector<std::string>& independent_lead_names();  // I, II, V1..V6
const std::vector<std::string>& vcg_lead_names();          // X, Y, Z

/// Per-lead (x - mean) / sd with population sd; constant leads become zero.
Signal zscore_normalize(const Signal& s);

struct Window {
  Signal signal;
  double offset_seconds = 0.0;
};

/// Full windows of `win_seconds`; count = floor((T - win) / stride) + 1.
/// Throws ShapeError if the signal is shorter than one window.
std::vector<Window> sliding_windows(const Signal& s, double win_seconds, double stride_seconds);

// CSV layout: first line "fs=<Hz>", second line the lead names, then one row
// per sample with one column per lead.
Signal read_signal_csv(std::istream& in);
Signal read_signal_csv(const std::filesystem::path& path);
// `digits` is the number of significant digits written; 17 round-trips exactly.
void write_signal_csv(std::ostream& out, const Signal& s, int digits = 17);
void write_signal_csv(const std::filesystem::path& path, const Signal& s, int digits = 17);

}  // namespace pxm::signal
