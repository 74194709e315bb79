#pragma once

#include "pxm/eval/metrics.hpp"
#include "pxm/eval/probe.hpp"
#include "pxm/train/train.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pxm::eval {

/// Token prompts per class.
struct PromptSet {
  std::vector<std::vector<models::TokenSequence>> prompts;
  /// Throws std::invalid_argument for fewer than two classes or an empty class.
  void validate() const;
  std::size_t classes() const { return prompts.size(); }
};

/// Binary LVEF prompts: class 1 gathers the prompts of every reduced-EF class.
PromptSet lvef_prompts(const synth::CohortConfig& cfg);

/// Encodes every prompt and returns its mu.
std::vector<std::vector<Eigen::VectorXd>> encode_prompts(const PromptSet& prompts, train::Model& model);

struct Metric {
  std::string name;
  std::string subgroup;  // "all", "low_var", "high_var", "low_entropy", "high_entropy"
  double value = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  std::string task;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<Metric> metrics;

  /// Throws InvariantError when a value leaves [0, 1] or a low/high pair
  /// does not add up to the "all" count of the same metric.
  void validate() const;
  const Metric* find(const std::string& name, const std::string& subgroup = "all") const;
};

/// CSV columns: task, seed, config_hash, metric, subgroup, n, value.
void write_reports_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
std::string format_reports(const std::vector<EvalReport>& reports);

/// Embeddings of one cohort split under a trained model.
struct SplitEmbeddings {
  std::vector<const synth::PairedSample*> samples;
  EmbeddingBatch ecg;
  EmbeddingBatch text;
  std::vector<int> labels;
  std::vector<int> lvef;
  std::vector<double> uncertainty;  // uncertainty_scalar of each ECG embedding
};

/// Encodes a split. `workers` threads share the read-only parameters; results
/// do not depend on the worker count.
SplitEmbeddings embed_split(train::Model& model, const synth::Cohort& cohort, synth::Split split, int workers = 1);

struct EvalOptions {
  std::uint64_t seed = 0;
  std::string config_hash;
  int workers = 1;
};

/// Zero-shot LVEF balanced accuracy, overall and on the two halves of a
/// median split of the ECG uncertainty.
EvalReport evaluate_zeroshot(train::Model& model, const synth::Cohort& cohort, const EvalOptions& opt);
EvalReport evaluate_zeroshot(const SplitEmbeddings& test, const std::vector<std::vector<Eigen::VectorXd>>& prompts,
                             const EvalOptions& opt);

/// Linear probe on frozen train-split mu for LVEF. `fraction` of the training
/// split is used (stratified, seeded). Subgroups: sigma^2 median split and the
/// 0.5-bit entropy threshold on the probe's output.
EvalReport evaluate_probe(train::Model& model, const synth::Cohort& cohort, double fraction, const EvalOptions& opt);

/// Few-shot presets.
inline constexpr double kProbeFractionSmall = 0.1;
inline constexpr double kProbeFractionFull = 1.0;

/// Stratified subset of `labels` holding round(fraction * count) of each
/// class, at least one.
std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, double fraction, std::uint64_t seed);

/// Text-to-ECG retrieval on the test split by mu cosine; a candidate counts
/// as a match when it has the query's class.
EvalReport evaluate_retrieval(train::Model& model, const synth::Cohort& cohort, const std::vector<int>& ks,
                              const EvalOptions& opt);
EvalReport evaluate_retrieval(const SplitEmbeddings& test, const std::vector<int>& ks, const EvalOptions& opt);

/// Class-level match matrix between two label lists.
MatchMatrix class_match(const std::vector<int>& rows, const std::vector<int>& cols);

struct WindowSelection {
  std::size_t index = 0;
  std::vector<double> offsets_s;
  std::vector<double> uncertainty;
};

/// Slides windows of the encoder length over `record`, resamples and
/// z-scores each, and returns the argmin-uncertainty window (earliest on ties)
/// with the full trace.
WindowSelection select_window(const signal::Signal& record, train::Model& model, double stride_s);

/// Fraction of the cohort's long records whose selected window avoids the
/// annotated burst. `traces` receives one selection per record when given.
EvalReport evaluate_windows(train::Model& model, const synth::Cohort& cohort, double stride_s, const EvalOptions& opt,
                            std::vector<WindowSelection>* traces = nullptr);

/// CSV columns: record, window_offset_s, uncertainty, selected.
void write_trace_csv(const std::filesystem::path& path, const std::vector<WindowSelection>& traces);

struct AblationRun {
  train::LossVariant variant = train::LossVariant::pcme;
  std::uint64_t seed = 0;
  double zs_balanced_accuracy = 0.0;
  double r_at_1 = 0.0;
};

struct AblationRow {
  train::LossVariant variant = train::LossVariant::pcme;
  double zs_mean = 0.0, zs_sd = 0.0;
  double r1_mean = 0.0, r1_sd = 0.0;
  std::size_t runs = 0;
};

struct AblationResult {
  std::vector<AblationRun> runs;
  std::vector<AblationRow> rows;  // in variant order
};

/// Called after each training run with the trained model.
using AblationHook = std::function<void(train::LossVariant, std::uint64_t seed, train::FitResult&)>;

/// Trains every variant for every seed on the same cohort and batching and
/// reports ZS balanced accuracy and text-to-ECG R@1 (mean and sample sd).
/// Requires at least three seeds.
AblationResult ablation_run(const synth::Cohort& cohort, const train::TrainSetup& base,
                            const std::vector<train::LossVariant>& variants, const std::vector<std::uint64_t>& seeds,
                            int workers = 1, const AblationHook& hook = {});

void write_ablation_csv(const std::filesystem::path& path, const AblationResult& r);
std::string format_ablation(const AblationResult& r);

}  // namespace pxm::eval
