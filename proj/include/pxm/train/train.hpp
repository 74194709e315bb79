#pragma once

#include "pxm/autodiff/param_store.hpp"
#include "pxm/models/encoders.hpp"
#include "pxm/prob_embed/loss_ops.hpp"
#include "pxm/signal/augment.hpp"
#include "pxm/synthdata/cohort.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pxm::train {

enum class LossVariant { infonce, infonce_teacher, pcme, pcme_teacher };

std::string to_string(LossVariant v);
/// Accepts "infonce", "infonce+teacher", "pcme", "pcme+teacher".
LossVariant parse_loss_variant(const std::string& s);
bool uses_teacher(LossVariant v);
bool is_probabilistic(LossVariant v);
const std::vector<LossVariant>& all_variants();

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 4e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 1;
  LossVariant variant = LossVariant::pcme_teacher;
  double validation_fraction = 0.1;
  bool augment = true;

  void validate() const;
  ad::AdamWOptions adamw() const { return {lr, weight_decay, beta1, beta2, adam_eps}; }
};

/// Everything needed to build and train a model.
struct TrainSetup {
  models::EcgEncoderConfig ecg;
  models::TextEncoderConfig text;
  TrainConfig train;
  LossWeights loss;
  signal::AugmentConfig augment;

  void validate() const;
  /// Weight of the ECG-text term; variants without a teacher use 1.
  double effective_lambda() const;
};

struct Model {
  models::EcgEncoderConfig ecg;
  models::TextEncoderConfig text;
  ad::ParamStore params;
};

/// Fresh parameters for both encoders and both sets of matching scalars,
/// the latter at (sigmoid_scale, sigmoid_shift).
Model init_model(const TrainSetup& setup);

/// Resamples to the encoder rate and keeps the first encoder-length window.
signal::Signal prepare_window(const signal::Signal& raw, const models::EcgEncoderConfig& cfg);

/// Model-ready data for a set of cohort samples.
struct TrainData {
  std::vector<signal::Signal> windows;     // prepared, not normalized
  std::vector<signal::Signal> normalized;  // z-scored model inputs
  std::vector<models::TokenSequence> tokens;
  EmbeddingBatch teacher;                  // aggregated frames, D x N
  std::vector<int> labels;
  std::vector<int> ids;

  std::size_t size() const { return windows.size(); }
  TrainData subset(const std::vector<std::size_t>& idx) const;
};

TrainData prepare_data(const std::vector<const synth::PairedSample*>& samples, const models::EcgEncoderConfig& cfg);

/// Sets both shifts to b = a * mean(d) + log(r / (1 - r)), where d are the
/// closed-form distances on `batch` under the current parameters and r is the
/// positive rate of its identity match matrix. Returns the two shifts.
std::pair<double, double> calibrate_shifts(Model& model, const TrainData& data, const std::vector<std::size_t>& batch);

/// Shuffled index batches for one epoch; the last short batch is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed, int epoch);

struct StepRecord {
  int epoch = 0;
  long step = 0;
  double l_et = 0.0;
  double l_ee = 0.0;
  double l_total = 0.0;
  double a = 0.0;
  double b = 0.0;
};

struct LossValues {
  double l_et = 0.0;
  double l_ee = 0.0;
  double l_total = 0.0;
};

/// Loss terms on a batch without updating anything (no augmentation).
LossValues evaluate_batch(Model& model, const TrainData& data, const std::vector<std::size_t>& batch,
                          const TrainSetup& setup);

/// Forward, backward and one AdamW update on `batch`. Throws NumericError on
/// a non-finite loss.
StepRecord train_step(Model& model, const TrainData& data, const std::vector<std::size_t>& batch,
                      const TrainSetup& setup, int epoch);

struct EpochRecord {
  int epoch = 0;
  double l_et = 0.0;
  double l_ee = 0.0;
  double l_total = 0.0;
  double val_l_total = 0.0;
  double a = 0.0;
  double b = 0.0;
};

struct FitResult {
  Model model;                // after the last epoch
  ad::ParamStore best;        // lowest validation L_total (epoch 0 = initialization)
  int best_epoch = 0;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

/// Trains on the cohort's training split minus a seeded validation hold-out.
FitResult fit(const synth::Cohort& cohort, const TrainSetup& setup);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<StepRecord>& steps);
void write_epochs_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& epochs);

/// Writes metrics.csv, epochs.csv, final.pxm and best.pxm; returns the paths.
std::vector<std::filesystem::path> write_fit_outputs(const std::filesystem::path& dir, const FitResult& result);

}  // namespace pxm::train
