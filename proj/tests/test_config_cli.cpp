#include "pxm/autodiff/checkpoint.hpp"
#include "pxm/cli/commands.hpp"
#include "pxm/eval/protocols.hpp"
#include "pxm/synthdata/cohort_io.hpp"
#include "pxm/util/hash.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pxm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pxm");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

json small_config() {
  return json::parse(R"({
    "cohort": {"num_classes": 2, "samples_per_class": 4, "teacher_dim": 16, "teacher_frames": 8,
               "vocab_size": 33, "tokens_per_report": 8, "long_records": 1, "long_duration_s": 25.0},
    "model": {"ecg": {"stem_channels": 4, "widths": [4, 8], "embed_dim": 16},
              "text": {"token_dim": 8, "hidden_dim": 16, "embed_dim": 16}},
    "train": {"epochs": 1, "batch_size": 4, "seed": 3},
    "eval": {"ks": [1, 2]}
  })");
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pxm_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(2);
  return p;
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config: defaults, round trip and hashing") {
  const config::RunConfig d = config::from_json(json::object());
  CHECK(d.cohort.num_classes == 8);
  CHECK(d.setup.train.variant == train::LossVariant::pcme_teacher);
  CHECK(d.setup.text.vocab_size == d.cohort.vocab_size);
  const json j = config::to_json(d);
  CHECK(config::config_hash(config::from_json(j)) == config::config_hash(d));
  CHECK(config::config_hash(d).size() == 64);

  config::RunConfig c = config::from_json(small_config());
  CHECK(c.setup.ecg.widths == std::vector<ad::Index>{4, 8});
  CHECK(c.eval.ks == std::vector<int>{1, 2});
  CHECK(config::config_hash(c) != config::config_hash(d));
  CHECK(config::to_json(config::from_json(config::to_json(c))) == config::to_json(c));
}

TEST_CASE("config: strict keys and field-named errors") {
  auto field_of = [](const json& j) -> std::string {
    try {
      config::from_json(j);
    } catch (const ConfigError& e) {
      return e.field();
    }
    return "";
  };
  CHECK(field_of(json::parse(R"({"cohrt": {}})")) == "cohrt");
  CHECK(field_of(json::parse(R"({"train": {"epoch": 3}})")) == "train.epoch");
  CHECK(field_of(json::parse(R"({"model": {"ecg": {"width": [4]}}})")) == "model.ecg.width");
  CHECK(field_of(json::parse(R"({"train": {"epochs": "three"}})")) == "train.epochs");
  CHECK(field_of(json::parse(R"({"train": {"loss_variant": "pcme++"}})")).find("loss_variant") != std::string::npos);
  CHECK(field_of(json::parse(R"({"cohort": {"event_rate": 0.0}})")).find("event_rate") != std::string::npos);
  CHECK(field_of(json::parse(R"({"loss": {"lambda": 1.5}})")).find("lambda") != std::string::npos);
  CHECK_FALSE(field_of(json::parse(R"({"model": {"ecg": {"embed_dim": 32}}})")).empty());
}

TEST_CASE("synth: files, determinism and manifest replay") {
  const fs::path dir = scratch("synth");
  const fs::path cfg = write_json(dir / "config.json", small_config());
  REQUIRE(run_cli({"synth", "--config", cfg.string(), "--out", (dir / "a").string()}) == cli::kOk);
  REQUIRE(run_cli({"synth", "--config", cfg.string(), "--out", (dir / "b").string()}) == cli::kOk);
  CHECK(count_files(dir / "a" / "signals") == 8);
  CHECK(fs::exists(dir / "a" / synth::kCohortManifest));
  CHECK(util::sha256_file(dir / "a" / synth::kCohortManifest) == util::sha256_file(dir / "b" / synth::kCohortManifest));

  const cli::RunManifest ma = cli::read_run_manifest(dir / "a" / cli::kRunManifest);
  const cli::RunManifest mb = cli::read_run_manifest(dir / "b" / cli::kRunManifest);
  CHECK(ma.artifacts == mb.artifacts);
  CHECK(ma.artifacts.size() == 8 * 2 + 1 + 1);
  for (const auto& [rel, hash] : ma.artifacts) CHECK(util::sha256_file(dir / "a" / rel) == hash);

  // Replaying the snapshot alone reproduces every artifact.
  const fs::path replay = write_json(dir / "replay.json", ma.config);
  REQUIRE(run_cli({"synth", "--config", replay.string(), "--out", (dir / "c").string()}) == cli::kOk);
  CHECK(cli::read_run_manifest(dir / "c" / cli::kRunManifest).artifacts == ma.artifacts);

  json bad = small_config();
  bad["cohort"]["event_rate"] = 0.0;
  CHECK(run_cli({"synth", "--config", write_json(dir / "bad.json", bad).string(), "--out", (dir / "d").string()}) ==
        cli::kUsage);
  fs::remove_all(dir);
}

TEST_CASE("train and eval subcommands") {
  const fs::path dir = scratch("pipeline");
  json j = small_config();
  const fs::path cfg = write_json(dir / "config.json", j);
  const std::string cohort = (dir / "cohort").string();
  REQUIRE(run_cli({"synth", "--config", cfg.string(), "--out", cohort}) == cli::kOk);

  SUBCASE("epochs = 0 writes the initial weights") {
    j["train"]["epochs"] = 0;
    j["loss"]["calibrate_shift"] = false;
    const fs::path c0 = write_json(dir / "zero.json", j);
    REQUIRE(run_cli({"train", "--config", c0.string(), "--cohort", cohort, "--out", (dir / "t0").string()}) == cli::kOk);
    const config::RunConfig rc = config::from_json(j);
    CHECK(ad::load_checkpoint(dir / "t0" / "final.pxm").same_values(train::init_model(rc.setup).params));
  }

  SUBCASE("lambda outside [0, 1] is a usage error") {
    CHECK(run_cli({"train", "--config", cfg.string(), "--cohort", cohort, "--out", (dir / "tl").string(), "--lambda",
               "1.5"}) == cli::kUsage);
    CHECK(run_cli({"train", "--config", cfg.string(), "--cohort", (dir / "nope").string(), "--out",
               (dir / "tm").string()}) != cli::kOk);
  }

  SUBCASE("train logs, then each eval task") {
    const std::string run = (dir / "train").string();
    REQUIRE(run_cli({"train", "--config", cfg.string(), "--cohort", cohort, "--out", run}) == cli::kOk);
    CHECK(count_lines(dir / "train" / "epochs.csv") == 2);
    const std::string header = slurp(dir / "train" / "metrics.csv").substr(0, 80);
    CHECK(header.find("L_et") != std::string::npos);
    CHECK(header.find("L_ee") != std::string::npos);
    CHECK(header.find("L_total") != std::string::npos);
    const std::string ckpt = run + "/final.pxm";

    CHECK(run_cli({"eval", "--cohort", cohort, "--checkpoint", ckpt, "--task", "zeroshot", "--out",
               (dir / "zs").string()}) == cli::kOk);
    CHECK(count_lines(dir / "zs" / "report.csv") == 1 + 3);
    CHECK(run_cli({"eval", "--cohort", cohort, "--checkpoint", ckpt, "--task", "probe", "--out",
               (dir / "pr").string()}) == cli::kOk);
    CHECK(run_cli({"eval", "--cohort", cohort, "--checkpoint", ckpt, "--task", "retrieve", "--out",
               (dir / "rt").string()}) == cli::kOk);
    CHECK(count_lines(dir / "rt" / "report.csv") == 1 + 2);

    // 25-s record, 10-s windows every 5 s -> offsets 0, 5, 10, 15.
    CHECK(run_cli({"eval", "--cohort", cohort, "--checkpoint", ckpt, "--task", "window", "--stride", "5", "--out",
               (dir / "win").string()}) == cli::kOk);
    CHECK(count_lines(dir / "win" / "trace.csv") == 1 + 4);

    CHECK(run_cli({"eval", "--cohort", cohort, "--checkpoint", ckpt, "--task", "classify", "--out",
               (dir / "bad").string()}) == cli::kUsage);
    CHECK(run_cli({"eval", "--cohort", cohort, "--task", "zeroshot", "--out", (dir / "nock").string()}) == cli::kUsage);

    const cli::RunManifest m = cli::read_run_manifest(dir / "win" / cli::kRunManifest);
    CHECK(m.command == "eval");
    CHECK(m.artifacts.count("trace.csv") == 1);
  }
  fs::remove_all(dir);
}

TEST_CASE("retrieve on a one-sample test split gives R@1 = 1") {
  const fs::path dir = scratch("single");
  json j = small_config();
  j["train"]["epochs"] = 0;
  const config::RunConfig rc = config::from_json(j);
  synth::Cohort c = synth::generate_cohort(rc.cohort);
  bool kept = false;
  for (auto& s : c.samples) {
    if (s.split == synth::Split::test && !kept) {
      kept = true;
    } else {
      s.split = synth::Split::train;
    }
  }
  synth::save_cohort(dir / "cohort", c);
  const fs::path cfg = write_json(dir / "config.json", j);
  REQUIRE(run_cli({"train", "--config", cfg.string(), "--cohort", (dir / "cohort").string(), "--out",
               (dir / "t").string()}) == cli::kOk);
  REQUIRE(run_cli({"eval", "--cohort", (dir / "cohort").string(), "--checkpoint", (dir / "t" / "final.pxm").string(),
               "--task", "retrieve", "--k", "1", "--out", (dir / "r").string()}) == cli::kOk);
  const std::string report = slurp(dir / "r" / "report.csv");
  CHECK(report.find("R@1,all,1,1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("preprocess converts a VCG to a normalized 12-lead record") {
  const fs::path dir = scratch("prep");
  signal::Signal vcg{Eigen::MatrixXd::Random(3, 5000), 500.0, signal::vcg_lead_names()};
  signal::write_signal_csv(dir / "vcg.csv", vcg);
  REQUIRE(run_cli({"preprocess", "--input", (dir / "vcg.csv").string(), "--out", (dir / "o").string()}) == cli::kOk);
  const signal::Signal s = signal::read_signal_csv(dir / "o" / "vcg_prep.csv");
  CHECK(s.leads() == 12);
  CHECK(s.fs == 100.0);
  CHECK(s.samples() == 1000);
  CHECK(std::abs(s.data.row(1).mean()) < 1e-9);
  CHECK(run_cli({"preprocess", "--input", (dir / "missing.csv").string(), "--out", (dir / "o").string()}) != cli::kOk);
  fs::remove_all(dir);
}

TEST_CASE("usage errors") {
  CHECK(run_cli({}) == cli::kUsage);
  CHECK(run_cli({"synth"}) == cli::kUsage);
  CHECK(run_cli({"frobnicate", "--out", "x"}) == cli::kUsage);
}
