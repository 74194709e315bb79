#include "pxm/cli/commands.hpp"

#include "pxm/autodiff/checkpoint.hpp"
#include "pxm/errors.hpp"
#include "pxm/eval/protocols.hpp"
#include "pxm/signal/fir.hpp"
#include "pxm/signal/kors.hpp"
#include "pxm/synthdata/cohort_io.hpp"
#include "pxm/util/hash.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace pxm::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(flag, std::string("--") + flag + " is required");
}

fs::path prepare_out(const std::string& out) {
  require(out, "out");
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream o(path);
  if (!o) throw IoError("cannot write " + path.string());
  o << text;
}

synth::Cohort load_cohort_arg(const std::string& dir) {
  require(dir, "cohort");
  if (!fs::exists(fs::path(dir) / synth::kCohortManifest)) throw ConfigError("cohort", "no cohort manifest in " + dir);
  return synth::load_cohort(dir);
}

// The cohort on disk is authoritative for the data section of the config.
config::RunConfig config_for_cohort(const Options& opt, const synth::Cohort& cohort) {
  config::RunConfig cfg = resolve_config(opt);
  cfg.cohort = cohort.config;
  cfg.setup.text.vocab_size = cohort.config.vocab_size;
  cfg.validate();
  return cfg;
}

train::Model load_model(const Options& opt, const config::RunConfig& cfg) {
  require(opt.checkpoint, "checkpoint");
  train::Model m;
  m.ecg = cfg.setup.ecg;
  m.text = cfg.setup.text;
  m.params = ad::load_checkpoint(opt.checkpoint);
  // Shapes must agree with a fresh model built from the same config.
  const train::Model fresh = train::init_model(cfg.setup);
  for (const auto& [name, p] : fresh.params) {
    if (!m.params.contains(name)) throw ConfigError("checkpoint", "parameter " + name + " missing; wrong --config?");
    if (m.params.at(name).tensor.value.rows() != p.tensor.value.rows() ||
        m.params.at(name).tensor.value.cols() != p.tensor.value.cols()) {
      throw ConfigError("checkpoint", "parameter " + name + " has a different shape; wrong --config?");
    }
  }
  return m;
}

RunManifest start_manifest(const std::string& command, const Options& opt, const config::RunConfig& cfg,
                           std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.arguments = opt.arguments;
  m.config_path = opt.config;
  m.config = config::to_json(cfg);
  m.seed = seed;
  m.out_dir = opt.out;
  return m;
}

}  // namespace

json RunManifest::to_json() const {
  return {{"command", command}, {"arguments", arguments}, {"config_path", config_path}, {"config", config},
          {"seed", seed},       {"out_dir", out_dir},     {"artifacts", artifacts}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.arguments = j.at("arguments").get<std::vector<std::string>>();
    m.config_path = j.at("config_path").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.out_dir = j.at("out_dir").get<std::string>();
    m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw ConfigError("run_manifest", e.what());
  }
  return m;
}

void RunManifest::write(const fs::path& out, const std::vector<fs::path>& files) {
  for (const auto& f : files) artifacts[fs::relative(f, out).generic_string()] = util::sha256_file(f);
  write_text(out / kRunManifest, to_json().dump(1) + "\n");
}

RunManifest read_run_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return RunManifest::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("run_manifest", e.what());
  }
}

config::RunConfig resolve_config(const Options& opt) {
  config::RunConfig cfg;
  if (!opt.config.empty()) {
    cfg = config::load_config(opt.config);
  } else if (!opt.checkpoint.empty()) {
    // A checkpoint written by `train` sits next to the manifest holding its config.
    const fs::path beside = fs::path(opt.checkpoint).parent_path() / kRunManifest;
    if (fs::exists(beside)) cfg = config::from_json(read_run_manifest(beside).config);
  }
  if (opt.seed) {
    cfg.setup.train.seed = *opt.seed;
    cfg.cohort.seed = *opt.seed;
  }
  if (opt.loss_variant) cfg.setup.train.variant = train::parse_loss_variant(*opt.loss_variant);
  if (opt.lambda) cfg.setup.loss.lambda = *opt.lambda;
  if (opt.stride) cfg.eval.stride_s = *opt.stride;
  if (!opt.k.empty()) cfg.eval.ks = opt.k;
  cfg.setup.text.vocab_size = cfg.cohort.vocab_size;
  cfg.validate();
  return cfg;
}

void cmd_synth(const Options& opt) {
  const config::RunConfig cfg = resolve_config(opt);
  const fs::path out = prepare_out(opt.out);
  const signal::KorsMatrix kors = signal::resolve_kors_matrix(opt.kors_matrix);
  const synth::Cohort cohort = synth::generate_cohort(cfg.cohort, kors);
  const auto files = synth::save_cohort(out, cohort);
  std::cout << "cohort: " << cohort.samples.size() << " samples, " << cohort.long_records.size()
            << " long records, teacher centroid accuracy " << cohort.teacher_centroid_accuracy << "\n";
  start_manifest("synth", opt, cfg, cfg.cohort.seed).write(out, files);
}

void cmd_train(const Options& opt) {
  const synth::Cohort cohort = load_cohort_arg(opt.cohort);
  const config::RunConfig cfg = config_for_cohort(opt, cohort);
  const fs::path out = prepare_out(opt.out);
  const train::FitResult result = train::fit(cohort, cfg.setup);
  const auto files = train::write_fit_outputs(out, result);
  for (const auto& e : result.epochs) {
    std::printf("epoch %3d  L_et %.6f  L_ee %.6f  L_total %.6f  val %.6f\n", e.epoch, e.l_et, e.l_ee, e.l_total,
                e.val_l_total);
  }
  std::printf("best epoch %d\n", result.best_epoch);
  start_manifest("train", opt, cfg, cfg.setup.train.seed).write(out, files);
}

void cmd_eval(const Options& opt) {
  static const std::vector<std::string> tasks{"zeroshot", "probe", "retrieve", "window", "ablate"};
  if (std::find(tasks.begin(), tasks.end(), opt.task) == tasks.end()) {
    throw ConfigError("task", "unknown task '" + opt.task + "' (zeroshot, probe, retrieve, window, ablate)");
  }
  const synth::Cohort cohort = load_cohort_arg(opt.cohort);
  const config::RunConfig cfg = config_for_cohort(opt, cohort);
  const fs::path out = prepare_out(opt.out);
  const eval::EvalOptions eo{cfg.setup.train.seed, config::config_hash(cfg), opt.workers};
  std::vector<fs::path> files;

  if (opt.task == "ablate") {
    const auto result = eval::ablation_run(cohort, cfg.setup, cfg.eval.variants, cfg.eval.seeds, opt.workers);
    files = {out / "ablation.csv", out / "ablation.txt"};
    eval::write_ablation_csv(files[0], result);
    const std::string table = eval::format_ablation(result);
    write_text(files[1], table);
    std::cout << table;
  } else {
    train::Model model = load_model(opt, cfg);
    std::vector<eval::EvalReport> reports;
    if (opt.task == "zeroshot") {
      reports.push_back(eval::evaluate_zeroshot(model, cohort, eo));
    } else if (opt.task == "probe") {
      for (double f : cfg.eval.probe_fractions) reports.push_back(eval::evaluate_probe(model, cohort, f, eo));
    } else if (opt.task == "retrieve") {
      reports.push_back(eval::evaluate_retrieval(model, cohort, cfg.eval.ks, eo));
    } else {
      std::vector<eval::WindowSelection> traces;
      reports.push_back(eval::evaluate_windows(model, cohort, cfg.eval.stride_s, eo, &traces));
      files.push_back(out / "trace.csv");
      eval::write_trace_csv(files.back(), traces);
    }
    files.push_back(out / "report.csv");
    eval::write_reports_csv(files.back(), reports);
    const std::string table = eval::format_reports(reports);
    files.push_back(out / "report.txt");
    write_text(files.back(), table);
    std::cout << table;
  }
  start_manifest("eval", opt, cfg, cfg.setup.train.seed).write(out, files);
}

void cmd_preprocess(const Options& opt) {
  require(opt.input, "input");
  const config::RunConfig cfg = resolve_config(opt);
  const fs::path out = prepare_out(opt.out);
  signal::Signal s = signal::read_signal_csv(opt.input);
  if (s.leads() == 3) s = signal::kors_vcg_to_12lead(s, signal::resolve_kors_matrix(opt.kors_matrix));
  if (s.leads() != 12) throw ShapeError("preprocess: expected 3 (VCG) or 12 leads, got " + std::to_string(s.leads()));
  if (std::abs(s.fs - cfg.setup.ecg.input_fs) > 1e-9) s = signal::decimate(s, cfg.setup.ecg.input_fs);
  s = signal::zscore_normalize(s);
  const fs::path file = out / (fs::path(opt.input).stem().string() + "_prep.csv");
  signal::write_signal_csv(file, s);
  start_manifest("preprocess", opt, cfg, cfg.setup.train.seed).write(out, {file});
}

int run(int argc, char** argv) {
  Options opt;
  for (int i = 0; i < argc; ++i) opt.arguments.emplace_back(argv[i]);

  CLI::App app{"pxm: probabilistic ECG-text embeddings with a frozen teacher"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string variant;
  double lambda = 0.0, stride = 0.0;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", opt.config, "JSON run config");
    c->add_option("--out", opt.out, "output directory")->required();
    c->add_option("--seed", seed, "overrides the config seeds");
    c->add_option("--kors-matrix", opt.kors_matrix, "3x8 Kors matrix CSV (PXM_KORS_MATRIX takes precedence)");
  };
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort");
  common(synth_cmd);
  CLI::App* train_cmd = app.add_subcommand("train", "train on a cohort");
  common(train_cmd);
  train_cmd->add_option("--cohort", opt.cohort, "cohort directory")->required();
  train_cmd->add_option("--loss-variant", variant, "infonce, infonce+teacher, pcme, pcme+teacher");
  train_cmd->add_option("--lambda", lambda, "weight of the ECG-text term");
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  common(eval_cmd);
  eval_cmd->add_option("--cohort", opt.cohort, "cohort directory")->required();
  eval_cmd->add_option("--checkpoint", opt.checkpoint, "PXM1 checkpoint");
  eval_cmd->add_option("--task", opt.task, "zeroshot, probe, retrieve, window, ablate")->required();
  eval_cmd->add_option("--k", opt.k, "recall cut-offs")->delimiter(',');
  eval_cmd->add_option("--stride", stride, "window stride in seconds");
  eval_cmd->add_option("--workers", opt.workers, "evaluation threads")->check(CLI::Range(1, 64));
  eval_cmd->add_option("--loss-variant", variant, "training variant for the checkpoint's config");
  eval_cmd->add_option("--lambda", lambda, "loss weight for ablation runs");
  CLI::App* prep_cmd = app.add_subcommand("preprocess", "Kors conversion, resampling and z-scoring of one CSV");
  common(prep_cmd);
  prep_cmd->add_option("--input", opt.input, "signal CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  auto given = [](CLI::App* c, const char* flag) { return c->parsed() && c->count(flag) > 0; };
  for (CLI::App* c : {synth_cmd, train_cmd, eval_cmd, prep_cmd}) {
    if (given(c, "--seed")) opt.seed = seed;
  }
  for (CLI::App* c : {train_cmd, eval_cmd}) {
    if (given(c, "--loss-variant")) opt.loss_variant = variant;
    if (given(c, "--lambda")) opt.lambda = lambda;
  }
  if (given(eval_cmd, "--stride")) opt.stride = stride;

  try {
    if (synth_cmd->parsed()) cmd_synth(opt);
    if (train_cmd->parsed()) cmd_train(opt);
    if (eval_cmd->parsed()) cmd_eval(opt);
    if (prep_cmd->parsed()) cmd_preprocess(opt);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}

}  // namespace pxm::cli
