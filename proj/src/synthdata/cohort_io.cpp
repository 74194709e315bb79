#include "pxm/synthdata/cohort_io.hpp"

#include "pxm/config/config.hpp"
#include "pxm/errors.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace pxm::synth {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "frame files are written in native little-endian order");

std::string numbered(const char* stem, int id, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d%s", stem, id, ext);
  return buf;
}

std::vector<int> flags(const std::vector<bool>& v) { return {v.begin(), v.end()}; }

std::vector<bool> unflags(const json& j) {
  std::vector<bool> out;
  for (const auto& x : j) out.push_back(x.get<int>() != 0);
  return out;
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(key, "missing from cohort manifest");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, std::string("bad value in cohort manifest (") + e.what() + ")");
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace

void write_frames(const fs::path& path, const FrameEmbeddingSet& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = frames.frames;
  out.write(reinterpret_cast<const char*>(rows.data()), static_cast<std::streamsize>(rows.size() * sizeof(double)));
}

FrameEmbeddingSet read_frames(const fs::path& path, Eigen::Index n, Eigen::Index d) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(n, d);
  const auto bytes = static_cast<std::streamsize>(rows.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(rows.data()), bytes);
  if (in.gcount() != bytes || in.peek() != std::ifstream::traits_type::eof()) {
    throw IoError(path.string() + ": expected " + std::to_string(n) + " x " + std::to_string(d) + " float64 values");
  }
  return {rows};
}

std::vector<fs::path> save_cohort(const fs::path& dir, const Cohort& cohort) {
  fs::create_directories(dir / "signals");
  fs::create_directories(dir / "frames");
  if (!cohort.long_records.empty()) fs::create_directories(dir / "long");
  std::vector<fs::path> written;

  json samples = json::array();
  for (const auto& s : cohort.samples) {
    const std::string sig = "signals/" + numbered("sample", s.id, ".csv");
    const std::string frm = "frames/" + numbered("sample", s.id, ".bin");
    signal::write_signal_csv(dir / sig, s.ecg, kSignalCsvDigits);
    write_frames(dir / frm, s.frames);
    written.push_back(dir / sig);
    written.push_back(dir / frm);
    samples.push_back({{"id", s.id},
                       {"label", s.label},
                       {"lvef", s.lvef},
                       {"noise_grade", s.noise_grade},
                       {"split", s.split == Split::train ? "train" : "test"},
                       {"tokens", s.tokens.ids},
                       {"window_pattern", flags(s.window_pattern)},
                       {"frames_shape", {s.frames.frames.rows(), s.frames.frames.cols()}},
                       {"signal", sig},
                       {"frames", frm}});
  }
  json longs = json::array();
  for (const auto& r : cohort.long_records) {
    const std::string sig = "long/" + numbered("long", r.id, ".csv");
    signal::write_signal_csv(dir / sig, r.ecg, kSignalCsvDigits);
    written.push_back(dir / sig);
    longs.push_back({{"id", r.id},
                     {"label", r.label},
                     {"segment_pattern", flags(r.segment_pattern)},
                     {"burst_start_s", r.burst_start_s},
                     {"burst_end_s", r.burst_end_s},
                     {"signal", sig}});
  }
  const json manifest{{"format", "pxm-cohort-1"},
                      {"config", config::to_json(cohort.config)},
                      {"teacher_centroid_accuracy", cohort.teacher_centroid_accuracy},
                      {"samples", samples},
                      {"long_records", longs}};
  write_json(dir / kCohortManifest, manifest);
  written.push_back(dir / kCohortManifest);
  return written;
}

Cohort load_cohort(const fs::path& dir) {
  const fs::path mpath = dir / kCohortManifest;
  std::ifstream in(mpath);
  if (!in) throw IoError("cohort manifest not found: " + mpath.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest", mpath.string() + ": " + e.what());
  }
  if (m.value("format", "") != "pxm-cohort-1") throw ConfigError("format", "not a cohort manifest: " + mpath.string());

  Cohort c;
  c.config = config::cohort_from_json(field<json>(m, "config"));
  c.config.validate();
  c.teacher_centroid_accuracy = field<double>(m, "teacher_centroid_accuracy");
  for (const auto& js : field<json>(m, "samples")) {
    PairedSample s;
    s.id = field<int>(js, "id");
    s.label = field<int>(js, "label");
    s.lvef = field<int>(js, "lvef");
    s.noise_grade = field<double>(js, "noise_grade");
    const auto split = field<std::string>(js, "split");
    if (split != "train" && split != "test") throw ConfigError("split", "expected train or test");
    s.split = split == "train" ? Split::train : Split::test;
    s.tokens.ids = field<std::vector<int>>(js, "tokens");
    s.window_pattern = unflags(field<json>(js, "window_pattern"));
    const auto shape = field<std::vector<Eigen::Index>>(js, "frames_shape");
    if (shape.size() != 2) throw ConfigError("frames_shape", "expected [n, d]");
    s.ecg = signal::read_signal_csv(dir / field<std::string>(js, "signal"));
    s.frames = read_frames(dir / field<std::string>(js, "frames"), shape[0], shape[1]);
    if (s.label < 0 || s.label >= c.config.num_classes) throw ConfigError("label", "outside [0, num_classes)");
    c.samples.push_back(std::move(s));
  }
  for (const auto& jr : field<json>(m, "long_records")) {
    LongRecord r;
    r.id = field<int>(jr, "id");
    r.label = field<int>(jr, "label");
    r.segment_pattern = unflags(field<json>(jr, "segment_pattern"));
    r.burst_start_s = field<double>(jr, "burst_start_s");
    r.burst_end_s = field<double>(jr, "burst_end_s");
    r.ecg = signal::read_signal_csv(dir / field<std::string>(jr, "signal"));
    c.long_records.push_back(std::move(r));
  }
  return c;
}

}  // namespace pxm::synth
