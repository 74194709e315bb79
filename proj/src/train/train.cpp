#include "pxm/train/train.hpp"

#include "pxm/autodiff/checkpoint.hpp"
#include "pxm/errors.hpp"
#include "pxm/signal/fir.hpp"
#include "pxm/util/seed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace pxm::train {

using ad::Index;
using ad::Matrix;
using ad::Var;

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::infonce: return "infonce";
    case LossVariant::infonce_teacher: return "infonce+teacher";
    case LossVariant::pcme: return "pcme";
    case LossVariant::pcme_teacher: return "pcme+teacher";
  }
  return "?";
}

LossVariant parse_loss_variant(const std::string& s) {
  for (LossVariant v : all_variants())
    if (to_string(v) == s) return v;
  throw ConfigError("loss_variant", "unknown variant '" + s + "' (expected infonce, infonce+teacher, pcme, pcme+teacher)");
}

bool uses_teacher(LossVariant v) { return v == LossVariant::infonce_teacher || v == LossVariant::pcme_teacher; }
bool is_probabilistic(LossVariant v) { return v == LossVariant::pcme || v == LossVariant::pcme_teacher; }

const std::vector<LossVariant>& all_variants() {
  static const std::vector<LossVariant> v{LossVariant::infonce, LossVariant::infonce_teacher, LossVariant::pcme,
                                          LossVariant::pcme_teacher};
  return v;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs", "must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr", "must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps", "must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction", "must lie in [0, 1)");
  }
}

void TrainSetup::validate() const {
  ecg.validate();
  text.validate();
  train.validate();
  loss.validate();
  augment.validate();
  if (ecg.embed_dim != text.embed_dim) throw ConfigError("embed_dim", "ECG and text embedding sizes differ");
}

double TrainSetup::effective_lambda() const { return uses_teacher(train.variant) ? loss.lambda : 1.0; }

Model init_model(const TrainSetup& setup) {
  setup.validate();
  Model m;
  m.ecg = setup.ecg;
  m.text = setup.text;
  std::mt19937_64 ecg_rng(derive_seed(setup.train.seed, {10}));
  std::mt19937_64 text_rng(derive_seed(setup.train.seed, {11}));
  models::init_ecg_encoder(m.ecg, m.params, ecg_rng);
  models::init_text_encoder(m.text, m.params, text_rng);
  init_match_scalars(m.params, setup.loss.sigmoid_scale, setup.loss.sigmoid_shift, kMatchPrefix);
  init_match_scalars(m.params, setup.loss.sigmoid_scale, setup.loss.sigmoid_shift, kTeacherMatchPrefix);
  return m;
}

signal::Signal prepare_window(const signal::Signal& raw, const models::EcgEncoderConfig& cfg) {
  raw.validate();
  if (raw.leads() != cfg.leads) {
    throw ShapeError("prepare_window: expected " + std::to_string(cfg.leads) + " leads, got " +
                     std::to_string(raw.leads()));
  }
  signal::Signal s = std::abs(raw.fs - cfg.input_fs) > 1e-9 ? signal::decimate(raw, cfg.input_fs) : raw;
  if (s.samples() < cfg.samples) {
    throw ShapeError("prepare_window: record has " + std::to_string(s.samples()) + " samples at " +
                     std::to_string(cfg.input_fs) + " Hz, need " + std::to_string(cfg.samples));
  }
  if (s.samples() > cfg.samples) s.data = s.data.leftCols(cfg.samples).eval();
  return s;
}

TrainData TrainData::subset(const std::vector<std::size_t>& idx) const {
  TrainData out;
  out.teacher = EmbeddingBatch::zeros(teacher.dim(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    out.windows.push_back(windows[i]);
    out.normalized.push_back(normalized[i]);
    out.tokens.push_back(tokens[i]);
    out.labels.push_back(labels[i]);
    out.ids.push_back(ids[i]);
    out.teacher.mu.col(static_cast<Index>(k)) = teacher.mu.col(static_cast<Index>(i));
    out.teacher.log_var.col(static_cast<Index>(k)) = teacher.log_var.col(static_cast<Index>(i));
  }
  return out;
}

TrainData prepare_data(const std::vector<const synth::PairedSample*>& samples, const models::EcgEncoderConfig& cfg) {
  TrainData d;
  if (samples.empty()) return d;
  const Index dim = samples.front()->frames.frames.cols();
  d.teacher = EmbeddingBatch::zeros(dim, static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& p = *samples[i];
    d.windows.push_back(prepare_window(p.ecg, cfg));
    d.normalized.push_back(signal::zscore_normalize(d.windows.back()));
    d.tokens.push_back(p.tokens);
    d.labels.push_back(p.label);
    d.ids.push_back(p.id);
    if (p.frames.frames.cols() != dim) throw ShapeError("prepare_data: teacher dimension differs between samples");
    d.teacher.set(static_cast<Index>(i), teacher_aggregate(p.frames));
  }
  return d;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw ConfigError("batch_size", "must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed, {4, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

namespace {

struct BatchLoss {
  Var total;
  double l_et = 0.0;
  double l_ee = 0.0;
};

ProbVars teacher_vars(ad::Tape& tape, const TrainData& data, const std::vector<std::size_t>& batch) {
  Matrix mu(data.teacher.dim(), static_cast<Index>(batch.size()));
  Matrix lv(data.teacher.dim(), static_cast<Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    mu.col(static_cast<Index>(k)) = data.teacher.mu.col(static_cast<Index>(batch[k]));
    lv.col(static_cast<Index>(k)) = data.teacher.log_var.col(static_cast<Index>(batch[k]));
  }
  return {tape.constant(std::move(mu)), tape.constant(std::move(lv))};
}

Var pair_term(ad::Tape& tape, Model& model, const ProbVars& x, const ProbVars& y, const TrainSetup& setup,
              const std::string& prefix) {
  const MatchMatrix m = identity_match(x.mu.cols());
  if (is_probabilistic(setup.train.variant)) {
    auto [a, b] = match_scalars(tape, model.params, prefix);
    return match_bce(pairwise_csd(x, y), m, a, b);
  }
  return infonce(x.mu, y.mu, m, setup.loss.infonce_temperature);
}

double pair_term_value(const Model& model, const ProbVars& x, const ProbVars& y, const TrainSetup& setup,
                       const std::string& prefix) {
  const MatchMatrix m = identity_match(x.mu.cols());
  if (is_probabilistic(setup.train.variant)) {
    return pcme_matching_loss(to_batch(x), to_batch(y), m, match_scale_value(model.params, prefix),
                              match_shift_value(model.params, prefix));
  }
  return infonce_loss(x.mu.value(), y.mu.value(), m, setup.loss.infonce_temperature);
}

BatchLoss batch_loss(ad::Tape& tape, Model& model, const TrainData& data, const std::vector<std::size_t>& batch,
                     const TrainSetup& setup, const Matrix& ecg_input) {
  const ProbVars ecg = models::ecg_forward(model.ecg, tape.constant(ecg_input, model.ecg.samples), model.params);
  std::vector<models::TokenSequence> tokens;
  for (std::size_t i : batch) tokens.push_back(data.tokens[i]);
  const ProbVars text = models::text_forward(model.text, tape, tokens, model.params);
  const ProbVars teacher = teacher_vars(tape, data, batch);

  Var l_et = pair_term(tape, model, ecg, text, setup, kMatchPrefix);
  if (setup.loss.vib_weight > 0.0) {
    l_et = ad::axpby(1.0, l_et, setup.loss.vib_weight, ad::add(vib_kl(ecg), vib_kl(text)));
  }
  BatchLoss out;
  out.l_et = l_et.value()(0, 0);
  const double lambda = setup.effective_lambda();
  if (lambda == 1.0) {
    // Teacher term excluded from the graph; its value is only reported.
    out.total = l_et;
    out.l_ee = pair_term_value(model, ecg, teacher, setup, kTeacherMatchPrefix);
  } else {
    const Var l_ee = pair_term(tape, model, ecg, teacher, setup, kTeacherMatchPrefix);
    out.l_ee = l_ee.value()(0, 0);
    out.total = ad::axpby(lambda, l_et, 1.0 - lambda, l_ee);
  }
  return out;
}

Matrix stack_inputs(const Model& model, const TrainData& data, const std::vector<std::size_t>& batch,
                    const TrainSetup& setup, int epoch, bool augment) {
  Matrix x(model.ecg.leads, model.ecg.samples * static_cast<Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const std::size_t i = batch[k];
    auto cols = x.middleCols(static_cast<Index>(k) * model.ecg.samples, model.ecg.samples);
    if (augment) {
      const std::uint64_t seed = derive_seed(setup.train.seed, {3, static_cast<std::uint64_t>(epoch),
                                                                static_cast<std::uint64_t>(data.ids[i])});
      cols = signal::zscore_normalize(signal::augment(data.windows[i], seed, setup.augment)).data;
    } else {
      cols = data.normalized[i].data;
    }
  }
  return x;
}

void require_finite(const BatchLoss& l, int epoch, long step) {
  const double total = l.total.value()(0, 0);
  if (!std::isfinite(total) || !std::isfinite(l.l_et) || !std::isfinite(l.l_ee)) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "non-finite loss at epoch %d step %ld: L_et=%g L_ee=%g L_total=%g", epoch, step,
                  l.l_et, l.l_ee, total);
    throw NumericError(buf);
  }
}

}  // namespace

std::pair<double, double> calibrate_shifts(Model& model, const TrainData& data, const std::vector<std::size_t>& batch) {
  if (batch.size() < 2) throw ShapeError("calibrate_shifts: need at least two samples");
  ad::Tape tape;
  Matrix x(model.ecg.leads, model.ecg.samples * static_cast<Index>(batch.size()));
  std::vector<models::TokenSequence> tokens;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    x.middleCols(static_cast<Index>(k) * model.ecg.samples, model.ecg.samples) = data.normalized[batch[k]].data;
    tokens.push_back(data.tokens[batch[k]]);
  }
  const ProbVars ecg = models::ecg_forward(model.ecg, tape.constant(std::move(x), model.ecg.samples), model.params);
  const ProbVars text = models::text_forward(model.text, tape, tokens, model.params);
  const ProbVars teacher = teacher_vars(tape, data, batch);
  const double rate = 1.0 / static_cast<double>(batch.size());
  const double prior_logit = std::log(rate / (1.0 - rate));
  auto set = [&](const std::string& prefix, const EmbeddingBatch& other) {
    const double mean_d = csd_matrix(to_batch(ecg), other).mean();
    const double shift = match_scale_value(model.params, prefix) * mean_d + prior_logit;
    model.params.value(prefix + ".shift")(0, 0) = shift;
    return shift;
  };
  const double b_text = set(kMatchPrefix, to_batch(text));
  const double b_teacher = set(kTeacherMatchPrefix, to_batch(teacher));
  return {b_text, b_teacher};
}

LossValues evaluate_batch(Model& model, const TrainData& data, const std::vector<std::size_t>& batch,
                          const TrainSetup& setup) {
  ad::Tape tape;
  const BatchLoss l = batch_loss(tape, model, data, batch, setup, stack_inputs(model, data, batch, setup, 0, false));
  return {l.l_et, l.l_ee, l.total.value()(0, 0)};
}

StepRecord train_step(Model& model, const TrainData& data, const std::vector<std::size_t>& batch,
                      const TrainSetup& setup, int epoch) {
  if (batch.empty()) throw ShapeError("train_step: empty batch");
  StepRecord rec;
  rec.epoch = epoch;
  rec.step = model.params.step() + 1;
  rec.a = match_scale_value(model.params);
  rec.b = match_shift_value(model.params);

  ad::Tape tape;
  const BatchLoss l =
      batch_loss(tape, model, data, batch, setup, stack_inputs(model, data, batch, setup, epoch, setup.train.augment));
  require_finite(l, epoch, rec.step);
  rec.l_et = l.l_et;
  rec.l_ee = l.l_ee;
  rec.l_total = l.total.value()(0, 0);
  tape.backward(l.total, model.params);
  ad::adamw_step(model.params, setup.train.adamw());
  return rec;
}

namespace {

double validation_loss(Model& model, const TrainData& val, const TrainSetup& setup) {
  if (val.size() == 0) return 0.0;
  double total = 0.0;
  const auto bs = static_cast<std::size_t>(setup.train.batch_size);
  for (std::size_t start = 0; start < val.size(); start += bs) {
    std::vector<std::size_t> batch;
    for (std::size_t i = start; i < std::min(val.size(), start + bs); ++i) batch.push_back(i);
    total += evaluate_batch(model, val, batch, setup).l_total * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(val.size());
}

}  // namespace

FitResult fit(const synth::Cohort& cohort, const TrainSetup& setup) {
  setup.validate();
  if (setup.text.vocab_size != cohort.config.vocab_size) {
    throw ConfigError("vocab_size", "text encoder vocabulary differs from the cohort's");
  }
  if (setup.ecg.embed_dim != cohort.config.teacher_dim) {
    throw ConfigError("embed_dim", "embedding size must equal the teacher dimension");
  }
  const TrainData all = prepare_data(cohort.split(synth::Split::train), setup.ecg);
  if (all.size() == 0) throw ConfigError("cohort", "training split is empty");

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(setup.train.seed, {5}));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(setup.train.validation_fraction * static_cast<double>(all.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(fit_idx.begin(), fit_idx.end());
  const TrainData fit_data = all.subset(fit_idx);
  const TrainData val_data = all.subset(val_idx);

  FitResult result;
  result.model = init_model(setup);
  Model& model = result.model;
  if (setup.loss.calibrate_shift && fit_data.size() >= 2) {
    calibrate_shifts(model, fit_data, make_batches(fit_data.size(), setup.train.batch_size, setup.train.seed, 1).front());
  }

  double best = val_data.size() ? validation_loss(model, val_data, setup) : 0.0;
  result.best = model.params;
  result.best_epoch = 0;

  for (int epoch = 1; epoch <= setup.train.epochs; ++epoch) {
    EpochRecord er;
    er.epoch = epoch;
    const auto batches = make_batches(fit_data.size(), setup.train.batch_size, setup.train.seed, epoch);
    double n_seen = 0.0;
    for (const auto& batch : batches) {
      const StepRecord s = train_step(model, fit_data, batch, setup, epoch);
      const double w = static_cast<double>(batch.size());
      er.l_et += w * s.l_et;
      er.l_ee += w * s.l_ee;
      er.l_total += w * s.l_total;
      n_seen += w;
      result.steps.push_back(s);
    }
    er.l_et /= n_seen;
    er.l_ee /= n_seen;
    er.l_total /= n_seen;
    er.a = match_scale_value(model.params);
    er.b = match_shift_value(model.params);
    if (val_data.size()) {
      er.val_l_total = validation_loss(model, val_data, setup);
      if (er.val_l_total < best) {
        best = er.val_l_total;
        result.best = model.params;
        result.best_epoch = epoch;
      }
    } else {
      result.best = model.params;
      result.best_epoch = epoch;
    }
    result.epochs.push_back(er);
  }
  return result;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<StepRecord>& steps) {
  auto out = open_out(path);
  out << "epoch,step,L_et,L_ee,L_total,a,b\n";
  char buf[512];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.epoch, s.step, s.l_et, s.l_ee, s.l_total,
                  s.a, s.b);
    out << buf;
  }
}

void write_epochs_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& epochs) {
  auto out = open_out(path);
  out << "epoch,L_et,L_ee,L_total,val_L_total,a,b\n";
  char buf[512];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.l_et, e.l_ee, e.l_total,
                  e.val_l_total, e.a, e.b);
    out << buf;
  }
}

std::vector<std::filesystem::path> write_fit_outputs(const std::filesystem::path& dir, const FitResult& result) {
  std::filesystem::create_directories(dir);
  const std::vector<std::filesystem::path> paths{dir / "metrics.csv", dir / "epochs.csv", dir / "final.pxm",
                                                 dir / "best.pxm"};
  write_metrics_csv(paths[0], result.steps);
  write_epochs_csv(paths[1], result.epochs);
  ad::save_checkpoint(paths[2], result.model.params);
  ad::save_checkpoint(paths[3], result.best);
  return paths;
}

}  // namespace pxm::train
