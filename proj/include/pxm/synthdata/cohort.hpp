#pragma once

#include "pxm/models/encoders.hpp"
#include "pxm/prob_embed/prob_embed.hpp"
#include "pxm/signal/kors.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pxm::synth {

struct CohortConfig {
  int num_classes = 8;
  int samples_per_class = 96;
  double fs = 100.0;
  double duration_s = 10.0;
  double window_s = 10.0;
  /// Fraction of 10-s windows carrying the class pattern, in (0, 1].
  double event_rate = 0.6;
  std::vector<double> noise_grades{0.0, 0.1, 0.3};
  double delta_amplitude = 0.5;  // mV
  double delta_width_s = 0.04;
  int teacher_frames = 16;
  int teacher_dim = 256;
  double teacher_jitter = 0.1;
  int vocab_size = 128;
  int tokens_per_report = 16;
  double class_token_prob = 0.5;
  /// lvef_map[c] = 1 when class c stands for reduced ejection fraction.
  /// Empty means the first half of the classes.
  std::vector<int> lvef_map;
  double test_fraction = 1.0 / 3.0;
  int long_records = 0;
  double long_duration_s = 30.0;
  /// Pattern rate of long records; negative means `event_rate`.
  double long_event_rate = -1.0;
  double burst_duration_s = 2.5;
  double burst_sd = 0.5;  // mV
  std::uint64_t seed = 7;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  std::vector<int> resolved_lvef_map() const;
  double resolved_long_event_rate() const { return long_event_rate < 0.0 ? event_rate : long_event_rate; }
};

enum class Split { train, test };

struct PairedSample {
  int id = 0;
  int label = 0;
  int lvef = 0;
  double noise_grade = 0.0;
  Split split = Split::train;
  signal::Signal ecg;                  // 12 leads
  models::TokenSequence tokens;
  FrameEmbeddingSet frames;            // n x d
  std::vector<bool> window_pattern;    // one flag per 10-s segment
};

struct LongRecord {
  int id = 0;
  int label = 0;
  signal::Signal ecg;
  std::vector<bool> segment_pattern;   // one flag per 10-s segment
  double burst_start_s = 0.0;
  double burst_end_s = 0.0;

  /// True when [offset, offset + length) overlaps the noise burst.
  bool window_has_burst(double offset_s, double length_s) const;
};

struct Cohort {
  CohortConfig config;
  std::vector<PairedSample> samples;
  std::vector<LongRecord> long_records;
  /// Nearest-class-mean accuracy on individual teacher frames.
  double teacher_centroid_accuracy = 0.0;

  std::vector<const PairedSample*> split(Split s) const;
};

// Seed streams: sample i draws from derive_seed(seed, {1, i, k}) with
// k = 0 waveform, 1 pattern windows, 2 noise, 3 tokens, 4 teacher frames.
// Class-level structure (delta directions, teacher means) uses {0, ...}.
Cohort generate_cohort(const CohortConfig& cfg, const signal::KorsMatrix& kors = signal::default_kors_matrix());

/// One long record with a single annotated noise burst.
LongRecord generate_long_record(const CohortConfig& cfg, int label, std::uint64_t seed,
                                const signal::KorsMatrix& kors = signal::default_kors_matrix());

/// 1 for reduced ejection fraction. Throws ConfigError for an unmapped class.
int label_lvef(int label, const CohortConfig& cfg);

/// Orthonormal class directions in teacher space (C x d, rows).
Eigen::MatrixXd teacher_class_means(const CohortConfig& cfg);

/// Fraction of frames whose nearest class centroid (estimated from the
/// frames) is their own class.
double nearest_centroid_accuracy(const std::vector<const FrameEmbeddingSet*>& sets, const std::vector<int>& labels,
                                 int num_classes);

/// Token id ranges. Id 0 is padding, then a shared filler block, then one block per class.
struct Vocabulary {
  int filler_begin = 1;
  int filler_end = 1;
  std::vector<int> class_begin;
  int block_size = 0;
};
Vocabulary vocabulary_layout(const CohortConfig& cfg);

/// Prompts per class: the whole class block and its two halves.
std::vector<std::vector<models::TokenSequence>> class_prompts(const CohortConfig& cfg);

/// Number of pattern-bearing windows among `windows` at rate rho.
int pattern_window_count(double rho, int windows, std::mt19937_64& rng);

}  // namespace pxm::synth
