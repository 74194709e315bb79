#include "pxm/config/config.hpp"

#include "pxm/errors.hpp"
#include "pxm/util/hash.hpp"

#include <fstream>
#include <set>
#include <type_traits>

namespace pxm::config {
namespace {

using nlohmann::json;

// Reads the keys of one JSON object and rejects whatever was not asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected a JSON object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError(field(key), "expected an integer");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(field(key), "expected true or false");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(field(key), "expected a number");
    }
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), std::string("bad value (") + e.what() + ")");
    }
  }

  /// Nested object or null when absent.
  const json* sub(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_ecg(const json& j, models::EcgEncoderConfig& c) {
  Section s(j, "model.ecg");
  s.get("leads", c.leads);
  s.get("input_fs", c.input_fs);
  s.get("samples", c.samples);
  s.get("stem_channels", c.stem_channels);
  s.get("stem_kernel", c.stem_kernel);
  s.get("stem_stride", c.stem_stride);
  s.get("widths", c.widths);
  s.get("block_kernel", c.block_kernel);
  s.get("block_stride", c.block_stride);
  s.get("embed_dim", c.embed_dim);
  s.get("logvar_bias", c.logvar_bias);
  s.finish();
}

void read_text(const json& j, models::TextEncoderConfig& c) {
  Section s(j, "model.text");
  s.get("max_length", c.max_length);
  s.get("token_dim", c.token_dim);
  s.get("hidden_dim", c.hidden_dim);
  s.get("embed_dim", c.embed_dim);
  s.get("logvar_bias", c.logvar_bias);
  s.finish();
}

void read_train(const json& j, train::TrainConfig& c) {
  Section s(j, "train");
  s.get("epochs", c.epochs);
  s.get("batch_size", c.batch_size);
  s.get("lr", c.lr);
  s.get("weight_decay", c.weight_decay);
  s.get("beta1", c.beta1);
  s.get("beta2", c.beta2);
  s.get("adam_eps", c.adam_eps);
  s.get("seed", c.seed);
  std::string variant = train::to_string(c.variant);
  s.get("loss_variant", variant);
  c.variant = train::parse_loss_variant(variant);
  s.get("validation_fraction", c.validation_fraction);
  s.get("augment", c.augment);
  s.finish();
}

void read_loss(const json& j, LossWeights& c) {
  Section s(j, "loss");
  s.get("lambda", c.lambda);
  s.get("sigmoid_scale", c.sigmoid_scale);
  s.get("sigmoid_shift", c.sigmoid_shift);
  s.get("calibrate_shift", c.calibrate_shift);
  s.get("vib_weight", c.vib_weight);
  s.get("infonce_temperature", c.infonce_temperature);
  s.finish();
}

void read_augment(const json& j, signal::AugmentConfig& c) {
  Section s(j, "augment");
  s.get("p_crop", c.p_crop);
  s.get("max_crop_fraction", c.max_crop_fraction);
  s.get("p_scale", c.p_scale);
  s.get("alpha", c.alpha);
  s.get("p_noise", c.p_noise);
  s.get("beta", c.beta);
  s.get("p_wander", c.p_wander);
  s.get("wander_max_hz", c.wander_max_hz);
  s.get("wander_amplitude", c.wander_amplitude);
  s.finish();
}

void read_eval(const json& j, EvalSettings& c) {
  Section s(j, "eval");
  s.get("stride_s", c.stride_s);
  s.get("ks", c.ks);
  s.get("probe_fractions", c.probe_fractions);
  s.get("seeds", c.seeds);
  std::vector<std::string> names;
  for (auto v : c.variants) names.push_back(train::to_string(v));
  s.get("variants", names);
  c.variants.clear();
  for (const auto& n : names) c.variants.push_back(train::parse_loss_variant(n));
  s.finish();
}

}  // namespace

void EvalSettings::validate() const {
  if (!(stride_s > 0.0)) throw ConfigError("stride_s", "must be positive");
  if (ks.empty()) throw ConfigError("ks", "needs at least one k");
  for (int k : ks)
    if (k < 1) throw ConfigError("ks", "every k must be >= 1");
  for (double f : probe_fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("probe_fractions", "must lie in (0, 1]");
  if (seeds.empty()) throw ConfigError("seeds", "needs at least one seed");
  if (variants.empty()) throw ConfigError("variants", "needs at least one variant");
}

void RunConfig::validate() const {
  cohort.validate();
  setup.validate();
  eval.validate();
  if (setup.text.vocab_size != cohort.vocab_size) throw ConfigError("vocab_size", "text encoder and cohort disagree");
  if (setup.ecg.embed_dim != cohort.teacher_dim) {
    throw ConfigError("embed_dim", "must equal the cohort's teacher_dim (" + std::to_string(cohort.teacher_dim) + ")");
  }
  if (setup.ecg.leads != 12) throw ConfigError("leads", "the cohort produces 12-lead signals");
}

synth::CohortConfig cohort_from_json(const json& j) {
  synth::CohortConfig c;
  Section s(j, "cohort");
  s.get("num_classes", c.num_classes);
  s.get("samples_per_class", c.samples_per_class);
  s.get("fs", c.fs);
  s.get("duration_s", c.duration_s);
  s.get("window_s", c.window_s);
  s.get("event_rate", c.event_rate);
  s.get("noise_grades", c.noise_grades);
  s.get("delta_amplitude", c.delta_amplitude);
  s.get("delta_width_s", c.delta_width_s);
  s.get("teacher_frames", c.teacher_frames);
  s.get("teacher_dim", c.teacher_dim);
  s.get("teacher_jitter", c.teacher_jitter);
  s.get("vocab_size", c.vocab_size);
  s.get("tokens_per_report", c.tokens_per_report);
  s.get("class_token_prob", c.class_token_prob);
  s.get("lvef_map", c.lvef_map);
  s.get("test_fraction", c.test_fraction);
  s.get("long_records", c.long_records);
  s.get("long_duration_s", c.long_duration_s);
  s.get("long_event_rate", c.long_event_rate);
  s.get("burst_duration_s", c.burst_duration_s);
  s.get("burst_sd", c.burst_sd);
  s.get("seed", c.seed);
  s.finish();
  return c;
}

json to_json(const synth::CohortConfig& c) {
  return {{"num_classes", c.num_classes},
          {"samples_per_class", c.samples_per_class},
          {"fs", c.fs},
          {"duration_s", c.duration_s},
          {"window_s", c.window_s},
          {"event_rate", c.event_rate},
          {"noise_grades", c.noise_grades},
          {"delta_amplitude", c.delta_amplitude},
          {"delta_width_s", c.delta_width_s},
          {"teacher_frames", c.teacher_frames},
          {"teacher_dim", c.teacher_dim},
          {"teacher_jitter", c.teacher_jitter},
          {"vocab_size", c.vocab_size},
          {"tokens_per_report", c.tokens_per_report},
          {"class_token_prob", c.class_token_prob},
          {"lvef_map", c.lvef_map},
          {"test_fraction", c.test_fraction},
          {"long_records", c.long_records},
          {"long_duration_s", c.long_duration_s},
          {"long_event_rate", c.long_event_rate},
          {"burst_duration_s", c.burst_duration_s},
          {"burst_sd", c.burst_sd},
          {"seed", c.seed}};
}

RunConfig from_json(const json& j) {
  RunConfig c;
  Section root(j, "");
  if (const json* x = root.sub("cohort")) c.cohort = cohort_from_json(*x);
  if (const json* x = root.sub("model")) {
    Section m(*x, "model");
    if (const json* e = m.sub("ecg")) read_ecg(*e, c.setup.ecg);
    if (const json* t = m.sub("text")) read_text(*t, c.setup.text);
    m.finish();
  }
  if (const json* x = root.sub("train")) read_train(*x, c.setup.train);
  if (const json* x = root.sub("loss")) read_loss(*x, c.setup.loss);
  if (const json* x = root.sub("augment")) read_augment(*x, c.setup.augment);
  if (const json* x = root.sub("eval")) read_eval(*x, c.eval);
  root.finish();
  c.setup.text.vocab_size = c.cohort.vocab_size;
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  const auto& e = c.setup.ecg;
  const auto& t = c.setup.text;
  const auto& tr = c.setup.train;
  const auto& l = c.setup.loss;
  const auto& a = c.setup.augment;
  std::vector<std::string> variants;
  for (auto v : c.eval.variants) variants.push_back(train::to_string(v));
  return {
      {"cohort", to_json(c.cohort)},
      {"model",
       {{"ecg",
         {{"leads", e.leads},
          {"input_fs", e.input_fs},
          {"samples", e.samples},
          {"stem_channels", e.stem_channels},
          {"stem_kernel", e.stem_kernel},
          {"stem_stride", e.stem_stride},
          {"widths", e.widths},
          {"block_kernel", e.block_kernel},
          {"block_stride", e.block_stride},
          {"embed_dim", e.embed_dim},
          {"logvar_bias", e.logvar_bias}}},
        {"text",
         {{"max_length", t.max_length},
          {"token_dim", t.token_dim},
          {"hidden_dim", t.hidden_dim},
          {"embed_dim", t.embed_dim},
          {"logvar_bias", t.logvar_bias}}}}},
      {"train",
       {{"epochs", tr.epochs},
        {"batch_size", tr.batch_size},
        {"lr", tr.lr},
        {"weight_decay", tr.weight_decay},
        {"beta1", tr.beta1},
        {"beta2", tr.beta2},
        {"adam_eps", tr.adam_eps},
        {"seed", tr.seed},
        {"loss_variant", train::to_string(tr.variant)},
        {"validation_fraction", tr.validation_fraction},
        {"augment", tr.augment}}},
      {"loss",
       {{"lambda", l.lambda},
        {"sigmoid_scale", l.sigmoid_scale},
        {"sigmoid_shift", l.sigmoid_shift},
        {"calibrate_shift", l.calibrate_shift},
        {"vib_weight", l.vib_weight},
        {"infonce_temperature", l.infonce_temperature}}},
      {"augment",
       {{"p_crop", a.p_crop},
        {"max_crop_fraction", a.max_crop_fraction},
        {"p_scale", a.p_scale},
        {"alpha", a.alpha},
        {"p_noise", a.p_noise},
        {"beta", a.beta},
        {"p_wander", a.p_wander},
        {"wander_max_hz", a.wander_max_hz},
        {"wander_amplitude", a.wander_amplitude}}},
      {"eval",
       {{"stride_s", c.eval.stride_s},
        {"ks", c.eval.ks},
        {"probe_fractions", c.eval.probe_fractions},
        {"seeds", c.eval.seeds},
        {"variants", variants}}},
  };
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::string canonical_dump(const json& j) { return j.dump(); }  // object keys are kept sorted

std::string config_hash(const RunConfig& c) { return util::sha256_hex(canonical_dump(to_json(c))); }

}  // namespace pxm::config
