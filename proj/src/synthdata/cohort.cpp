#include "pxm/synthdata/cohort.hpp"

#include "pxm/errors.hpp"
#include "pxm/util/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pxm::synth {
namespace {

struct Wave {
  double offset;  // s, relative to the R peak
  double width;   // s, Gaussian sd
  double amplitude;
  Eigen::Vector3d direction;
};

std::vector<Wave> base_waves() {
  return {
      {-0.16, 0.020, 0.15, Eigen::Vector3d(0.5, 0.8, 0.3)},   // P
      {-0.03, 0.010, 0.15, Eigen::Vector3d(-0.6, -0.3, 0.2)},  // Q
      {0.00, 0.012, 1.20, Eigen::Vector3d(0.6, 0.7, -0.3)},    // R
      {0.03, 0.010, 0.30, Eigen::Vector3d(-0.4, -0.5, 0.6)},   // S
      {0.28, 0.050, 0.35, Eigen::Vector3d(0.5, 0.7, 0.2)},     // T
  };
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Eigen::Vector3d random_unit3(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

double class_delta_offset(const CohortConfig& cfg, int label) {
  return 0.08 + 0.40 * static_cast<double>(label) / static_cast<double>(cfg.num_classes - 1);
}

Eigen::Vector3d class_delta_direction(const CohortConfig& cfg, int label) {
  std::mt19937_64 rng(derive_seed(cfg.seed, {0, 1, static_cast<std::uint64_t>(label)}));
  return random_unit3(rng);
}

void add_gaussian(Eigen::MatrixXd& vcg, double fs, double center, double width, double amplitude,
                  const Eigen::Vector3d& direction) {
  const auto n = vcg.cols();
  const auto lo = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::floor((center - 5.0 * width) * fs)));
  const auto hi = std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(std::ceil((center + 5.0 * width) * fs)));
  for (Eigen::Index t = lo; t <= hi; ++t) {
    const double z = (static_cast<double>(t) / fs - center) / width;
    vcg.col(t) += amplitude * std::exp(-0.5 * z * z) * direction;
  }
}

/// VCG beat train with the class bump in every beat whose R peak falls in a
/// pattern-bearing segment.
Eigen::MatrixXd synth_vcg(const CohortConfig& cfg, int label, double duration, const std::vector<bool>& segments,
                          std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration * cfg.fs));
  Eigen::MatrixXd vcg = Eigen::MatrixXd::Zero(3, n);

  std::vector<Wave> waves = base_waves();
  std::normal_distribution<double> perturb(0.0, 0.1);
  for (Wave& w : waves) {
    w.amplitude *= uniform(rng, 0.8, 1.2);
    w.direction = (w.direction.normalized() + Eigen::Vector3d(perturb(rng), perturb(rng), perturb(rng))).normalized();
  }
  const double rr = 60.0 / uniform(rng, 60.0, 90.0);
  const double delta_offset = class_delta_offset(cfg, label);
  const Eigen::Vector3d delta_dir = class_delta_direction(cfg, label);

  double t = -uniform(rng, 0.0, rr);
  while (t < duration + 0.5) {
    for (const Wave& w : waves) add_gaussian(vcg, cfg.fs, t + w.offset, w.width, w.amplitude, w.direction);
    const auto seg = static_cast<long>(std::floor(t / cfg.window_s));
    if (seg >= 0 && seg < static_cast<long>(segments.size()) && segments[static_cast<std::size_t>(seg)]) {
      add_gaussian(vcg, cfg.fs, t + delta_offset, cfg.delta_width_s, cfg.delta_amplitude, delta_dir);
    }
    t += rr * uniform(rng, 0.97, 1.03);
  }
  return vcg;
}

std::vector<bool> pattern_segments(double rho, int segments, std::mt19937_64& rng) {
  const int count = pattern_window_count(rho, segments, rng);
  std::vector<int> order(static_cast<std::size_t>(segments));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> flags(static_cast<std::size_t>(segments), false);
  for (int i = 0; i < count; ++i) flags[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return flags;
}

int segment_count(const CohortConfig& cfg, double duration) {
  return std::max(1, static_cast<int>(std::floor(duration / cfg.window_s + 1e-9)));
}

void add_noise(signal::Signal& s, double sd, std::mt19937_64& rng) {
  if (sd <= 0.0) return;
  std::normal_distribution<double> n(0.0, sd);
  for (Eigen::Index t = 0; t < s.samples(); ++t)
    for (Eigen::Index l = 0; l < s.leads(); ++l) s.data(l, t) += n(rng);
}

}  // namespace

void CohortConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes", "must be >= 2");
  if (samples_per_class < 1) throw ConfigError("samples_per_class", "must be >= 1");
  if (!(fs > 0.0)) throw ConfigError("fs", "must be positive");
  if (!(window_s > 0.0)) throw ConfigError("window_s", "must be positive");
  if (!(duration_s >= window_s)) throw ConfigError("duration_s", "must be at least window_s");
  if (!(event_rate > 0.0 && event_rate <= 1.0)) throw ConfigError("event_rate", "must lie in (0, 1]");
  if (noise_grades.empty()) throw ConfigError("noise_grades", "need at least one grade");
  for (double g : noise_grades)
    if (!(g >= 0.0) || !std::isfinite(g)) throw ConfigError("noise_grades", "grades must be finite and >= 0");
  if (!(delta_amplitude >= 0.0)) throw ConfigError("delta_amplitude", "must be >= 0");
  if (!(delta_width_s > 0.0)) throw ConfigError("delta_width_s", "must be positive");
  if (teacher_frames < 1) throw ConfigError("teacher_frames", "must be >= 1");
  if (teacher_dim < num_classes) throw ConfigError("teacher_dim", "must be >= num_classes");
  if (!(teacher_jitter >= 0.0)) throw ConfigError("teacher_jitter", "must be >= 0");
  if (tokens_per_report < 1) throw ConfigError("tokens_per_report", "must be >= 1");
  if (!(class_token_prob >= 0.0 && class_token_prob <= 1.0)) throw ConfigError("class_token_prob", "must lie in [0, 1]");
  const int filler = (vocab_size - 1) / 4;
  if (vocab_size < 2 || filler < 1 || (vocab_size - 1 - filler) / num_classes < 2) {
    throw ConfigError("vocab_size", "too small for " + std::to_string(num_classes) + " class blocks");
  }
  if (!lvef_map.empty()) {
    if (static_cast<int>(lvef_map.size()) != num_classes) throw ConfigError("lvef_map", "needs one entry per class");
    for (int v : lvef_map)
      if (v != 0 && v != 1) throw ConfigError("lvef_map", "entries must be 0 or 1");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction", "must lie in [0, 1)");
  if (long_records < 0) throw ConfigError("long_records", "must be >= 0");
  if (!(long_duration_s >= window_s)) throw ConfigError("long_duration_s", "must be at least window_s");
  if (long_event_rate >= 0.0 && !(long_event_rate > 0.0 && long_event_rate <= 1.0)) {
    throw ConfigError("long_event_rate", "must lie in (0, 1] or be negative for event_rate");
  }
  if (!(burst_duration_s > 0.0 && burst_duration_s < long_duration_s)) {
    throw ConfigError("burst_duration_s", "must be positive and shorter than long_duration_s");
  }
  if (!(burst_sd >= 0.0)) throw ConfigError("burst_sd", "must be >= 0");
}

std::vector<int> CohortConfig::resolved_lvef_map() const {
  if (!lvef_map.empty()) return lvef_map;
  std::vector<int> m(static_cast<std::size_t>(num_classes), 0);
  for (int c = 0; c < num_classes / 2; ++c) m[static_cast<std::size_t>(c)] = 1;
  return m;
}

int label_lvef(int label, const CohortConfig& cfg) {
  const auto map = cfg.resolved_lvef_map();
  if (label < 0 || label >= static_cast<int>(map.size())) {
    throw ConfigError("lvef_map", "class " + std::to_string(label) + " has no LVEF mapping");
  }
  return map[static_cast<std::size_t>(label)];
}

bool LongRecord::window_has_burst(double offset_s, double length_s) const {
  return offset_s < burst_end_s && burst_start_s < offset_s + length_s;
}

std::vector<const PairedSample*> Cohort::split(Split s) const {
  std::vector<const PairedSample*> out;
  for (const auto& p : samples)
    if (p.split == s) out.push_back(&p);
  return out;
}

int pattern_window_count(double rho, int windows, std::mt19937_64& rng) {
  if (windows <= 1) return uniform(rng, 0.0, 1.0) < rho ? 1 : 0;
  if (rho >= 1.0) return windows;
  const int k = static_cast<int>(std::lround(rho * windows));
  return std::clamp(k, 1, windows - 1);
}

Eigen::MatrixXd teacher_class_means(const CohortConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.seed, {0, 2}));
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(cfg.teacher_dim, cfg.num_classes);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = n(rng);
  // Modified Gram-Schmidt.
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) a.col(j) -= a.col(k).dot(a.col(j)) * a.col(k);
    a.col(j).normalize();
  }
  return a.transpose();
}

Vocabulary vocabulary_layout(const CohortConfig& cfg) {
  Vocabulary v;
  const int filler = (cfg.vocab_size - 1) / 4;
  v.filler_begin = 1;
  v.filler_end = 1 + filler;
  v.block_size = (cfg.vocab_size - 1 - filler) / cfg.num_classes;
  for (int c = 0; c < cfg.num_classes; ++c) v.class_begin.push_back(v.filler_end + c * v.block_size);
  return v;
}

std::vector<std::vector<models::TokenSequence>> class_prompts(const CohortConfig& cfg) {
  const Vocabulary v = vocabulary_layout(cfg);
  std::vector<std::vector<models::TokenSequence>> prompts(static_cast<std::size_t>(cfg.num_classes));
  const int half = v.block_size / 2;
  for (int c = 0; c < cfg.num_classes; ++c) {
    const int b = v.class_begin[static_cast<std::size_t>(c)];
    models::TokenSequence all, first, second;
    for (int k = 0; k < v.block_size; ++k) {
      all.ids.push_back(b + k);
      (k < half ? first : second).ids.push_back(b + k);
    }
    prompts[static_cast<std::size_t>(c)] = {all, first, second};
  }
  return prompts;
}

double nearest_centroid_accuracy(const std::vector<const FrameEmbeddingSet*>& sets, const std::vector<int>& labels,
                                 int num_classes) {
  if (sets.empty()) return 0.0;
  const Eigen::Index d = sets.front()->frames.cols();
  Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(num_classes, d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_classes);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    centroids.row(labels[i]) += sets[i]->frames.colwise().sum();
    counts(labels[i]) += static_cast<double>(sets[i]->frames.rows());
  }
  for (int c = 0; c < num_classes; ++c)
    if (counts(c) > 0) centroids.row(c) /= counts(c);
  double correct = 0.0, total = 0.0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (Eigen::Index f = 0; f < sets[i]->frames.rows(); ++f) {
      Eigen::Index best = 0;
      (centroids.rowwise() - sets[i]->frames.row(f)).rowwise().squaredNorm().minCoeff(&best);
      correct += best == labels[i] ? 1.0 : 0.0;
      total += 1.0;
    }
  }
  return correct / total;
}

Cohort generate_cohort(const CohortConfig& cfg, const signal::KorsMatrix& kors) {
  cfg.validate();
  Cohort cohort;
  cohort.config = cfg;
  const Eigen::MatrixXd means = teacher_class_means(cfg);
  const Vocabulary vocab = vocabulary_layout(cfg);
  const int segments = segment_count(cfg, cfg.duration_s);
  const int total = cfg.num_classes * cfg.samples_per_class;
  const auto n_test = static_cast<int>(std::lround(cfg.test_fraction * cfg.samples_per_class));

  // Within-class split by a seeded permutation of the within-class index.
  std::vector<std::vector<bool>> is_test(static_cast<std::size_t>(cfg.num_classes));
  for (int c = 0; c < cfg.num_classes; ++c) {
    std::vector<int> order(static_cast<std::size_t>(cfg.samples_per_class));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, {0, 3, static_cast<std::uint64_t>(c)}));
    std::shuffle(order.begin(), order.end(), rng);
    auto& flags = is_test[static_cast<std::size_t>(c)];
    flags.assign(static_cast<std::size_t>(cfg.samples_per_class), false);
    for (int k = 0; k < n_test; ++k) flags[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;
  }

  cohort.samples.resize(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    PairedSample& p = cohort.samples[static_cast<std::size_t>(i)];
    const auto stream = [&](std::uint64_t k) {
      return std::mt19937_64(derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(i), k}));
    };
    const int k_in_class = i / cfg.num_classes;
    p.id = i;
    p.label = i % cfg.num_classes;
    p.lvef = label_lvef(p.label, cfg);
    p.noise_grade = cfg.noise_grades[static_cast<std::size_t>(k_in_class) % cfg.noise_grades.size()];
    p.split = is_test[static_cast<std::size_t>(p.label)][static_cast<std::size_t>(k_in_class)] ? Split::test : Split::train;

    auto pattern_rng = stream(1);
    p.window_pattern = pattern_segments(cfg.event_rate, segments, pattern_rng);
    auto wave_rng = stream(0);
    signal::Signal vcg{synth_vcg(cfg, p.label, cfg.duration_s, p.window_pattern, wave_rng), cfg.fs,
                       signal::vcg_lead_names()};
    p.ecg = signal::kors_vcg_to_12lead(vcg, kors);
    auto noise_rng = stream(2);
    add_noise(p.ecg, p.noise_grade, noise_rng);

    auto token_rng = stream(3);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> filler(vocab.filler_begin, vocab.filler_end - 1);
    std::uniform_int_distribution<int> in_block(0, vocab.block_size - 1);
    for (int t = 0; t < cfg.tokens_per_report; ++t) {
      const bool from_class = unit(token_rng) < cfg.class_token_prob;
      p.tokens.ids.push_back(from_class ? vocab.class_begin[static_cast<std::size_t>(p.label)] + in_block(token_rng)
                                        : filler(token_rng));
    }

    auto frame_rng = stream(4);
    std::normal_distribution<double> jitter(0.0, 1.0);
    p.frames.frames.resize(cfg.teacher_frames, cfg.teacher_dim);
    for (int f = 0; f < cfg.teacher_frames; ++f)
      for (int d = 0; d < cfg.teacher_dim; ++d)
        p.frames.frames(f, d) = means(p.label, d) + cfg.teacher_jitter * jitter(frame_rng);
  }

  std::vector<const FrameEmbeddingSet*> sets;
  std::vector<int> labels;
  for (const auto& p : cohort.samples) {
    sets.push_back(&p.frames);
    labels.push_back(p.label);
  }
  cohort.teacher_centroid_accuracy = nearest_centroid_accuracy(sets, labels, cfg.num_classes);

  for (int r = 0; r < cfg.long_records; ++r) {
    const int label = r % cfg.num_classes;
    cohort.long_records.push_back(
        generate_long_record(cfg, label, derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(r)}), kors));
    cohort.long_records.back().id = r;
  }
  return cohort;
}

LongRecord generate_long_record(const CohortConfig& cfg, int label, std::uint64_t seed, const signal::KorsMatrix& kors) {
  cfg.validate();
  if (label < 0 || label >= cfg.num_classes) throw ConfigError("label", "outside [0, num_classes)");
  LongRecord rec;
  rec.label = label;
  std::mt19937_64 pattern_rng(derive_seed(seed, {1}));
  rec.segment_pattern =
      pattern_segments(cfg.resolved_long_event_rate(), segment_count(cfg, cfg.long_duration_s), pattern_rng);
  std::mt19937_64 wave_rng(derive_seed(seed, {0}));
  signal::Signal vcg{synth_vcg(cfg, label, cfg.long_duration_s, rec.segment_pattern, wave_rng), cfg.fs,
                     signal::vcg_lead_names()};
  rec.ecg = signal::kors_vcg_to_12lead(vcg, kors);

  std::mt19937_64 noise_rng(derive_seed(seed, {2}));
  const double grade = cfg.noise_grades[std::uniform_int_distribution<std::size_t>(0, cfg.noise_grades.size() - 1)(noise_rng)];
  add_noise(rec.ecg, grade, noise_rng);

  rec.burst_start_s = uniform(noise_rng, 0.0, cfg.long_duration_s - cfg.burst_duration_s);
  rec.burst_end_s = rec.burst_start_s + cfg.burst_duration_s;
  std::normal_distribution<double> burst(0.0, cfg.burst_sd);
  for (Eigen::Index t = 0; t < rec.ecg.samples(); ++t) {
    const double time = static_cast<double>(t) / cfg.fs;
    if (time < rec.burst_start_s || time >= rec.burst_end_s) continue;
    for (Eigen::Index l = 0; l < rec.ecg.leads(); ++l) rec.ecg.data(l, t) += burst(noise_rng);
  }
  return rec;
}

}  // namespace pxm::synth
