#include "pxm/signal/signal.hpp"

#include "pxm/errors.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pxm::signal {

void Signal::validate() const {
  if (!(fs > 0.0)) throw ShapeError("signal: sampling rate must be positive");
  if (static_cast<Eigen::Index>(lead_names.size()) != data.rows()) {
    throw ShapeError("signal: " + std::to_string(lead_names.size()) + " lead names for " +
                     std::to_string(data.rows()) + " leads");
  }
}

const std::vector<std::string>& twelve_lead_names() {
  static const std::vector<std::string> names{"I",  "II", "III", "aVR", "aVL", "aVF",
                                              "V1", "V2", "V3",  "V4",  "V5",  "V6"};
  return names;
}

const std::vector<std::string>& independent_lead_names() {
  static const std::vector<std::string> names{"I", "II", "V1", "V2", "V3", "V4", "V5", "V6"};
  return names;
}

const std::vector<std::string>& vcg_lead_names() {
  static const std::vector<std::string> names{"X", "Y", "Z"};
  return names;
}

Signal zscore_normalize(const Signal& s) {
  Signal out = s;
  const double n = static_cast<double>(s.samples());
  for (Eigen::Index lead = 0; lead < s.leads(); ++lead) {
    auto row = out.data.row(lead);
    const double mean = row.mean();
    row.array() -= mean;
    const double sd = std::sqrt(row.squaredNorm() / n);
    if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
      row.setZero();
    } else {
      row /= sd;
    }
  }
  return out;
}

std::vector<Window> sliding_windows(const Signal& s, double win_seconds, double stride_seconds) {
  s.validate();
  if (!(win_seconds > 0.0) || !(stride_seconds > 0.0)) {
    throw ShapeError("sliding_windows: window and stride must be positive");
  }
  const auto win = static_cast<Eigen::Index>(std::llround(win_seconds * s.fs));
  const auto stride = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::llround(stride_seconds * s.fs)));
  if (s.samples() < win || win < 1) {
    throw ShapeError("sliding_windows: signal of " + std::to_string(s.duration()) + " s is shorter than a " +
                     std::to_string(win_seconds) + " s window");
  }
  const Eigen::Index count = (s.samples() - win) / stride + 1;
  std::vector<Window> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index w = 0; w < count; ++w) {
    Window win_out;
    win_out.signal.fs = s.fs;
    win_out.signal.lead_names = s.lead_names;
    win_out.signal.data = s.data.middleCols(w * stride, win);
    win_out.offset_seconds = static_cast<double>(w * stride) / s.fs;
    out.push_back(std::move(win_out));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const auto* begin = cell.data();
  const auto* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw std::runtime_error("signal csv: bad number '" + cell + "' on line " + std::to_string(line_no));
  }
  return v;
}

}  // namespace

Signal read_signal_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("signal csv: empty input");
  while (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("fs=", 0) != 0) throw std::runtime_error("signal csv: first line must be fs=<Hz>");
  Signal s;
  s.fs = parse_double(line.substr(3), 1);
  if (!std::getline(in, line)) throw std::runtime_error("signal csv: missing lead header");
  s.lead_names = split_csv_line(line);
  if (s.lead_names.empty()) throw std::runtime_error("signal csv: no leads");

  std::vector<std::vector<double>> columns(s.lead_names.size());
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != columns.size()) {
      throw std::runtime_error("signal csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " columns, expected " +
                               std::to_string(columns.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) columns[c].push_back(parse_double(cells[c], line_no));
  }
  const auto n = static_cast<Eigen::Index>(columns.front().size());
  s.data.resize(static_cast<Eigen::Index>(columns.size()), n);
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (Eigen::Index t = 0; t < n; ++t) s.data(static_cast<Eigen::Index>(c), t) = columns[c][static_cast<std::size_t>(t)];
  s.validate();
  return s;
}

Signal read_signal_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("signal csv: cannot open " + path.string());
  return read_signal_csv(in);
}

void write_signal_csv(std::ostream& out, const Signal& s, int digits) {
  s.validate();
  char buf[64];
  std::snprintf(buf, sizeof buf, "fs=%.17g\n", s.fs);
  out << buf;
  for (std::size_t i = 0; i < s.lead_names.size(); ++i) out << (i ? "," : "") << s.lead_names[i];
  out << '\n';
  for (Eigen::Index t = 0; t < s.samples(); ++t) {
    for (Eigen::Index l = 0; l < s.leads(); ++l) {
      std::snprintf(buf, sizeof buf, "%.*g", digits, s.data(l, t));
      if (l) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_signal_csv(const std::filesystem::path& path, const Signal& s, int digits) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("signal csv: cannot open " + path.string() + " for writing");
  write_signal_csv(out, s, digits);
}

}  // namespace pxm::signal
