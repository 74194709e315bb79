#include "pxm/train/train.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <set>

using namespace pxm;
using namespace pxm::train;

namespace {

synth::CohortConfig tiny_cohort_config(int per_class = 8) {
  synth::CohortConfig c;
  c.num_classes = 2;
  c.samples_per_class = per_class;
  c.teacher_dim = 16;
  c.teacher_frames = 8;
  c.vocab_size = 33;
  c.tokens_per_report = 8;
  return c;
}

TrainSetup tiny_setup(const synth::CohortConfig& c) {
  TrainSetup s;
  s.ecg.stem_channels = 4;
  s.ecg.widths = {4, 8};
  s.ecg.embed_dim = c.teacher_dim;
  s.text.vocab_size = c.vocab_size;
  s.text.token_dim = 8;
  s.text.hidden_dim = 16;
  s.text.embed_dim = c.teacher_dim;
  s.train.epochs = 2;
  s.train.batch_size = 4;
  return s;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

TEST_CASE("make_batches: sizes, coverage, determinism") {
  const auto b = make_batches(10, 4, 1, 1);
  REQUIRE(b.size() == 3);
  CHECK(b[0].size() == 4);
  CHECK(b[1].size() == 4);
  CHECK(b[2].size() == 2);
  std::set<std::size_t> seen;
  for (const auto& batch : b) seen.insert(batch.begin(), batch.end());
  CHECK(seen.size() == 10);
  CHECK(*seen.rbegin() == 9);
  CHECK(make_batches(10, 4, 1, 1) == b);
  CHECK(make_batches(10, 4, 1, 2) != b);
  CHECK(make_batches(10, 4, 2, 1) != b);
  CHECK(make_batches(3, 8, 1, 1).size() == 1);
  CHECK_THROWS_AS(make_batches(3, 0, 1, 1), ConfigError);
}

TEST_CASE("variant names round trip") {
  for (LossVariant v : all_variants()) CHECK(parse_loss_variant(to_string(v)) == v);
  CHECK(all_variants().size() == 4);
  CHECK(to_string(LossVariant::pcme_teacher) == "pcme+teacher");
  CHECK_THROWS_AS(parse_loss_variant("pcme++"), ConfigError);
  CHECK(uses_teacher(LossVariant::infonce_teacher));
  CHECK_FALSE(uses_teacher(LossVariant::pcme));
  CHECK(is_probabilistic(LossVariant::pcme));
  CHECK_FALSE(is_probabilistic(LossVariant::infonce_teacher));
}

TEST_CASE("documented defaults") {
  const TrainConfig t;
  CHECK(t.lr == 4e-4);
  CHECK(t.weight_decay == 0.1);
  CHECK(t.beta1 == 0.9);
  CHECK(t.beta2 == 0.999);
  CHECK(t.adam_eps == 1e-8);
  const LossWeights w;
  CHECK(w.lambda == 0.9);
  CHECK(w.sigmoid_scale == 10.0);
  CHECK(w.sigmoid_shift == 0.0);
  TrainSetup s;
  s.train.variant = LossVariant::pcme;
  CHECK(s.effective_lambda() == 1.0);
  s.train.variant = LossVariant::infonce_teacher;
  CHECK(s.effective_lambda() == 0.9);
}

TEST_CASE("validation") {
  TrainSetup s;
  s.loss.lambda = -0.1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.train.epochs = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.text.embed_dim = 128;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("combined-loss identity holds at every logged step") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  for (double lambda : {0.0, 0.3, 0.9}) {
    TrainSetup s = tiny_setup(c);
    s.loss.lambda = lambda;
    s.loss.vib_weight = 1e-3;
    const FitResult r = fit(cohort, s);
    REQUIRE(r.steps.size() == 6);  // 11 fit samples after a 1-sample hold-out, batches 4/4/3
    for (const auto& st : r.steps) {
      const double expect = lambda * st.l_et + (1.0 - lambda) * st.l_ee;
      CHECK(std::abs(st.l_total - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("lambda = 1 reduces to the ECG-text loss bit for bit") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  for (auto [with, without] : {std::pair{LossVariant::pcme_teacher, LossVariant::pcme},
                               std::pair{LossVariant::infonce_teacher, LossVariant::infonce}}) {
    TrainSetup s = tiny_setup(c);
    s.train.variant = with;
    s.loss.lambda = 1.0;
    const FitResult a = fit(cohort, s);
    s.train.variant = without;
    s.loss.lambda = 0.9;  // ignored without a teacher
    const FitResult b = fit(cohort, s);
    CHECK(a.model.params.same_values(b.model.params));
    for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].l_total == a.steps[i].l_et);

    s.train.variant = with;
    s.loss.lambda = 0.9;
    CHECK_FALSE(fit(cohort, s).model.params.same_values(b.model.params));
  }
}

TEST_CASE("zero epochs keeps the initialization") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  TrainSetup s = tiny_setup(c);
  s.train.epochs = 0;
  s.loss.calibrate_shift = false;
  const FitResult r = fit(cohort, s);
  CHECK(r.steps.empty());
  CHECK(r.model.params.same_values(init_model(s).params));
  CHECK(r.best.same_values(r.model.params));
  CHECK(r.best_epoch == 0);
}

TEST_CASE("fit is deterministic") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  const TrainSetup s = tiny_setup(c);
  const FitResult a = fit(cohort, s), b = fit(cohort, s);
  CHECK(a.model.params.same_values(b.model.params));
  CHECK(a.best.same_values(b.best));
  REQUIRE(a.epochs.size() == 2);
  CHECK(a.epochs[1].val_l_total == b.epochs[1].val_l_total);
}

TEST_CASE("calibrated shift matches the batch positive rate at initialization") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  const TrainSetup s = tiny_setup(c);
  Model m = init_model(s);
  const TrainData data = prepare_data(cohort.split(synth::Split::train), s.ecg);
  std::vector<std::size_t> batch{0, 1, 2, 3};
  const auto [b_text, b_teacher] = calibrate_shifts(m, data, batch);
  CHECK(match_shift_value(m.params) == b_text);
  CHECK(match_shift_value(m.params, kTeacherMatchPrefix) == b_teacher);
  const double a = match_scale_value(m.params);
  CHECK(a == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("loss decreases when fitting a single small batch") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  for (LossVariant v : all_variants()) {
    TrainSetup s = tiny_setup(c);
    s.train.variant = v;
    s.train.augment = false;
    s.train.lr = 3e-3;
    s.train.weight_decay = 0.0;
    Model m = init_model(s);
    const TrainData data = prepare_data(cohort.split(synth::Split::train), s.ecg);
    std::vector<std::size_t> batch(8);
    std::iota(batch.begin(), batch.end(), std::size_t{0});
    if (is_probabilistic(v)) calibrate_shifts(m, data, batch);
    const double first = evaluate_batch(m, data, batch, s).l_total;
    double prev_block = first;
    for (int block = 0; block < 5; ++block) {
      for (int k = 0; k < 10; ++k) train_step(m, data, batch, s, 1);
      const double now = evaluate_batch(m, data, batch, s).l_total;
      CHECK(now < prev_block);
      prev_block = now;
    }
    CHECK(prev_block < 0.8 * first);
  }
}

TEST_CASE("training separates disjoint report vocabularies") {
  auto c = tiny_cohort_config(48);
  c.noise_grades = {0.0};
  const synth::Cohort cohort = synth::generate_cohort(c);
  TrainSetup s = tiny_setup(c);
  s.text.token_dim = 64;
  s.text.hidden_dim = 128;
  s.train.epochs = 30;
  s.train.batch_size = 8;
  FitResult r = fit(cohort, s);
  auto mu = [&](const models::TokenSequence& t) { return models::text_encode(r.model.text, t, r.model.params).mu; };
  // The two whole-block prompts share no token.
  const auto prompts = synth::class_prompts(c);
  const double cross = cosine(mu(prompts[0][0]), mu(prompts[1][0]));
  std::vector<Eigen::VectorXd> reports[2];
  for (const auto* p : cohort.split(synth::Split::test)) reports[p->label].push_back(mu(p->tokens));
  for (const auto& group : reports) {
    double same = 0.0;
    int pairs = 0;
    for (std::size_t i = 0; i < group.size(); ++i)
      for (std::size_t j = i + 1; j < group.size(); ++j, ++pairs) same += cosine(group[i], group[j]);
    MESSAGE("cross-class prompt cosine " << cross << ", mean same-class report cosine " << same / pairs);
    CHECK(cross < same / pairs);
  }
}

TEST_CASE("fit outputs are written") {
  const auto c = tiny_cohort_config();
  const synth::Cohort cohort = synth::generate_cohort(c);
  TrainSetup s = tiny_setup(c);
  s.train.epochs = 1;
  const FitResult r = fit(cohort, s);
  const auto dir = std::filesystem::temp_directory_path() / "pxm_test_fit_outputs";
  std::filesystem::remove_all(dir);
  const auto files = write_fit_outputs(dir, r);
  CHECK(files.size() == 4);
  for (const auto& f : files) CHECK(std::filesystem::file_size(f) > 0);
  std::filesystem::remove_all(dir);
}
