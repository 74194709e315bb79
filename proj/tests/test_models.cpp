#include "pxm/autodiff/grad_check.hpp"
#include "pxm/autodiff/init.hpp"
#include "pxm/models/encoders.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace pxm;
using namespace pxm::models;
using ad::Matrix;

namespace {

EcgEncoderConfig tiny_ecg() {
  EcgEncoderConfig c;
  c.samples = 32;
  c.stem_channels = 3;
  c.widths = {4, 4};
  c.embed_dim = 3;
  c.logvar_bias = -1.0;
  return c;
}

TextEncoderConfig tiny_text() {
  TextEncoderConfig c;
  c.vocab_size = 10;
  c.max_length = 6;
  c.token_dim = 3;
  c.hidden_dim = 4;
  c.embed_dim = 3;
  c.logvar_bias = -1.0;
  return c;
}

signal::Signal random_window(const EcgEncoderConfig& c, std::mt19937_64& rng) {
  return {ad::normal_matrix(c.leads, c.samples, 1.0, rng), c.input_fs, signal::twelve_lead_names()};
}

}  // namespace

TEST_CASE("default ECG encoder is desk scale") {
  EcgEncoderConfig c;
  ad::ParamStore p;
  std::mt19937_64 rng(1);
  init_ecg_encoder(c, p, rng);
  CHECK(ecg_parameter_count(p) < 500000);
  CHECK(ecg_parameter_count(p) > 0);
}

TEST_CASE("config validation names the field") {
  EcgEncoderConfig c;
  c.widths.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.block_kernel = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.samples = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  TextEncoderConfig t;
  t.vocab_size = 1;
  CHECK_THROWS_AS(t.validate(), ConfigError);
}

TEST_CASE("ECG encoder: constant path through zeroed heads") {
  const EcgEncoderConfig c = tiny_ecg();
  ad::ParamStore p;
  std::mt19937_64 rng(2);
  init_ecg_encoder(c, p, rng);
  p.value("ecg.head.mu.w").setZero();
  p.value("ecg.head.logvar.w").setZero();
  p.value("ecg.head.mu.b") = Matrix::Zero(3, 1);
  p.value("ecg.head.mu.b")(1, 0) = 1.0;
  const signal::Signal zero{Matrix::Zero(c.leads, c.samples), c.input_fs, signal::twelve_lead_names()};
  const ProbEmbedding z = ecg_encode(c, zero, p);
  CHECK(z.mu(1) == 1.0);
  CHECK(z.mu(0) == 0.0);
  CHECK((z.log_var.array() == -1.0).all());
}

TEST_CASE("ECG encoder: output invariants, determinism, small perturbation") {
  const EcgEncoderConfig c = tiny_ecg();
  ad::ParamStore p;
  std::mt19937_64 rng(3);
  init_ecg_encoder(c, p, rng);
  for (int t = 0; t < 10; ++t) {
    signal::Signal w = random_window(c, rng);
    w.data *= 50.0;
    const ProbEmbedding z = ecg_encode(c, w, p);
    CHECK(std::abs(z.mu.norm() - 1.0) < 1e-9);
    CHECK(z.log_var.minCoeff() >= -10.0);
    CHECK(z.log_var.maxCoeff() <= 10.0);
  }
  const signal::Signal a = random_window(c, rng), b = random_window(c, rng);
  const EmbeddingBatch one = ecg_encode_all(c, {&a, &b}, p);
  const EmbeddingBatch two = ecg_encode_all(c, {&a, &b}, p, 1);
  CHECK(one.mu == two.mu);
  CHECK(one.log_var == two.log_var);

  signal::Signal a2 = a;
  a2.data(3, 7) += 1e-6;
  const ProbEmbedding za = ecg_encode(c, a, p), zb = ecg_encode(c, a2, p);
  const double dmu = (za.mu - zb.mu).cwiseAbs().maxCoeff();
  const double dlv = (za.log_var - zb.log_var).cwiseAbs().maxCoeff();
  CHECK(std::max(dmu, dlv) > 0.0);
  CHECK(std::max(dmu, dlv) < 1e-4);
  // The other sample in a batch is unaffected.
  const EmbeddingBatch pb = ecg_encode_all(c, {&a2, &b}, p);
  CHECK(pb.mu.col(1) == one.mu.col(1));
}

TEST_CASE("ECG encoder: shape errors") {
  const EcgEncoderConfig c = tiny_ecg();
  ad::ParamStore p;
  std::mt19937_64 rng(4);
  init_ecg_encoder(c, p, rng);
  const signal::Signal short_w{Matrix::Zero(c.leads, c.samples - 1), c.input_fs, signal::twelve_lead_names()};
  CHECK_THROWS_AS(ecg_encode(c, short_w, p), ShapeError);
}

TEST_CASE("text encoder: pooling weights") {
  const TextEncoderConfig c = tiny_text();
  const Matrix w = pooling_weights(c, {{{5, 5, 5, 0}}, {{1, 2, 0, 0}}});
  CHECK(w(5, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(w.col(0).sum() == doctest::Approx(1.0));
  CHECK(w(1, 1) == 0.5);
  CHECK(w(2, 1) == 0.5);
  CHECK(w(0, 0) == 0.0);
  CHECK_THROWS_AS(pooling_weights(c, {{{0, 0}}}), ShapeError);
  CHECK_THROWS_AS(pooling_weights(c, {{{10}}}), ShapeError);
  CHECK_THROWS_AS(pooling_weights(c, {{{1, 1, 1, 1, 1, 1, 1}}}), ShapeError);
}

TEST_CASE("text encoder: repeated token equals that token, permutation invariance") {
  const TextEncoderConfig c = tiny_text();
  ad::ParamStore p;
  std::mt19937_64 rng(5);
  init_text_encoder(c, p, rng);
  const ProbEmbedding single = text_encode(c, {{7}}, p);
  const ProbEmbedding repeated = text_encode(c, {{7, 7, 7, 7}}, p);
  CHECK((single.mu - repeated.mu).cwiseAbs().maxCoeff() < 1e-15);

  const ProbEmbedding x = text_encode(c, {{1, 4, 6, 9, 0}}, p);
  const ProbEmbedding y = text_encode(c, {{9, 6, 0, 1, 4}}, p);
  CHECK((x.mu - y.mu).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((x.log_var - y.log_var).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(x.mu.norm() - 1.0) < 1e-9);
}

TEST_CASE("end-to-end gradient check through both encoders and the matching loss") {
  const EcgEncoderConfig ec = tiny_ecg();
  const TextEncoderConfig tc = tiny_text();
  ad::ParamStore p;
  std::mt19937_64 rng(6);
  init_ecg_encoder(ec, p, rng);
  init_text_encoder(tc, p, rng);
  init_match_scalars(p, 3.0, 1.0);
  p.value("ecg.head.logvar.w") = ad::normal_matrix(3, 4, 0.5, rng);
  p.value("text.head.logvar.w") = ad::normal_matrix(3, 4, 0.5, rng);
  const signal::Signal a = random_window(ec, rng), b = random_window(ec, rng);
  const Matrix x = stack_windows(ec, {&a, &b});
  const std::vector<TokenSequence> tokens{{{1, 2, 3}}, {{4, 5, 0}}};

  const auto r = ad::grad_check(
      [&](ad::Tape& t, ad::ParamStore& ps) {
        const ProbVars e = ecg_forward(ec, t.constant(x, ec.samples), ps);
        const ProbVars s = text_forward(tc, t, tokens, ps);
        const auto [scale, shift] = match_scalars(t, ps);
        return match_bce(pairwise_csd(e, s), identity_match(2), scale, shift);
      },
      p);
  CHECK(r.coords_checked == p.scalar_count());
  CHECK(r.max_rel_error < 1e-4);
}
