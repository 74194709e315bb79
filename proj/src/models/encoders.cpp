#include "pxm/models/encoders.hpp"

#include "pxm/autodiff/init.hpp"
#include "pxm/errors.hpp"

#include <algorithm>

namespace pxm::models {

using ad::Index;
using ad::Matrix;

namespace {

std::string block_name(Index i, const char* part) { return kEcgPrefix + ".block" + std::to_string(i) + "." + part; }

void positive(const char* field, Index v) {
  if (v < 1) throw ConfigError(field, "must be >= 1");
}

}  // namespace

void EcgEncoderConfig::validate() const {
  positive("leads", leads);
  if (!(input_fs > 0.0)) throw ConfigError("input_fs", "must be positive");
  positive("samples", samples);
  positive("stem_channels", stem_channels);
  positive("stem_kernel", stem_kernel);
  positive("stem_stride", stem_stride);
  positive("block_kernel", block_kernel);
  positive("block_stride", block_stride);
  positive("embed_dim", embed_dim);
  if (widths.empty()) throw ConfigError("widths", "need at least one residual block");
  for (Index w : widths) positive("widths", w);
  if (block_kernel % 2 == 0) throw ConfigError("block_kernel", "must be odd");
  // Walk the geometry so a too-short input is reported at config time.
  try {
    Index t = ad::conv1d_output_length(samples, stem_kernel, {stem_stride, stem_kernel / 2});
    for (std::size_t i = 0; i < widths.size(); ++i)
      t = ad::conv1d_output_length(t, block_kernel, {block_stride, block_kernel / 2});
  } catch (const ShapeError& e) {
    throw ConfigError("samples", std::string("input too short for the encoder: ") + e.what());
  }
}

void TextEncoderConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size", "must be >= 2");
  positive("max_length", max_length);
  positive("token_dim", token_dim);
  positive("hidden_dim", hidden_dim);
  positive("embed_dim", embed_dim);
}

std::size_t TokenSequence::content_length() const {
  return static_cast<std::size_t>(std::count_if(ids.begin(), ids.end(), [](int id) { return id != kPadToken; }));
}

std::vector<ad::Layer> ecg_trunk(const EcgEncoderConfig& cfg) {
  std::vector<ad::Layer> layers;
  layers.push_back(ad::Conv1dLayer{kEcgPrefix + ".stem", cfg.stem_kernel, {cfg.stem_stride, cfg.stem_kernel / 2}});
  layers.push_back(ad::ReluLayer{});
  Index channels = cfg.stem_channels;
  for (Index i = 0; i < cfg.blocks(); ++i) {
    const Index width = cfg.widths[static_cast<std::size_t>(i)];
    const bool project = width != channels || cfg.block_stride != 1;
    layers.push_back(ad::SaveLayer{0});
    layers.push_back(ad::Conv1dLayer{block_name(i, "conv1"), cfg.block_kernel, {cfg.block_stride, cfg.block_kernel / 2}});
    layers.push_back(ad::LayerNormLayer{block_name(i, "norm")});
    layers.push_back(ad::ReluLayer{});
    layers.push_back(ad::Conv1dLayer{block_name(i, "conv2"), 1, {1, 0}});
    layers.push_back(ad::ResidualAddLayer{0, project ? block_name(i, "proj") : std::string{}, cfg.block_stride});
    channels = width;
  }
  layers.push_back(ad::GlobalAvgPoolLayer{});
  return layers;
}

void init_ecg_encoder(const EcgEncoderConfig& cfg, ad::ParamStore& params, std::mt19937_64& rng) {
  cfg.validate();
  ad::add_conv1d(params, kEcgPrefix + ".stem", cfg.leads, cfg.stem_channels, cfg.stem_kernel, rng);
  Index channels = cfg.stem_channels;
  for (Index i = 0; i < cfg.blocks(); ++i) {
    const Index width = cfg.widths[static_cast<std::size_t>(i)];
    ad::add_conv1d(params, block_name(i, "conv1"), channels, width, cfg.block_kernel, rng);
    ad::add_layer_norm(params, block_name(i, "norm"), width);
    ad::add_conv1d(params, block_name(i, "conv2"), width, width, 1, rng);
    if (width != channels || cfg.block_stride != 1) ad::add_conv1d(params, block_name(i, "proj"), channels, width, 1, rng);
    channels = width;
  }
  init_heads(params, kEcgPrefix + ".head", channels, cfg.embed_dim, cfg.logvar_bias, rng);
}

void init_text_encoder(const TextEncoderConfig& cfg, ad::ParamStore& params, std::mt19937_64& rng) {
  cfg.validate();
  params.add(kTextPrefix + ".embed.table",
             ad::Tensor({cfg.vocab_size, cfg.token_dim}, ad::normal_matrix(cfg.vocab_size, cfg.token_dim, 1.0, rng)));
  ad::add_dense(params, kTextPrefix + ".fc1", cfg.token_dim, cfg.hidden_dim, rng);
  ad::add_dense(params, kTextPrefix + ".fc2", cfg.hidden_dim, cfg.hidden_dim, rng);
  init_heads(params, kTextPrefix + ".head", cfg.hidden_dim, cfg.embed_dim, cfg.logvar_bias, rng);
}

ProbVars ecg_forward(const EcgEncoderConfig& cfg, const ad::Var& windows, ad::ParamStore& params) {
  if (windows.rows() != cfg.leads || windows.steps() != cfg.samples) {
    throw ShapeError("ecg_encode: expected " + std::to_string(cfg.leads) + " leads x " +
                     std::to_string(cfg.samples) + " samples per window, got " + std::to_string(windows.rows()) +
                     " x " + std::to_string(windows.steps()));
  }
  const ad::Var pooled = ad::forward_graph(ecg_trunk(cfg), windows, params);
  return project_heads(pooled, params, kEcgPrefix + ".head");
}

Matrix pooling_weights(const TextEncoderConfig& cfg, const std::vector<TokenSequence>& batch) {
  Matrix w = Matrix::Zero(cfg.vocab_size, static_cast<Index>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& ids = batch[b].ids;
    if (static_cast<Index>(ids.size()) > cfg.max_length) {
      throw ShapeError("text_encode: sequence of " + std::to_string(ids.size()) + " tokens exceeds max length " +
                       std::to_string(cfg.max_length));
    }
    const std::size_t len = batch[b].content_length();
    if (len == 0) throw ShapeError("text_encode: empty sequence");
    for (int id : ids) {
      if (id < 0 || id >= cfg.vocab_size) {
        throw ShapeError("text_encode: token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(cfg.vocab_size));
      }
      if (id != kPadToken) w(id, static_cast<Index>(b)) += 1.0 / static_cast<double>(len);
    }
  }
  return w;
}

ProbVars text_forward(const TextEncoderConfig& cfg, ad::Tape& tape, const std::vector<TokenSequence>& batch,
                      ad::ParamStore& params) {
  const Matrix weights = pooling_weights(cfg, batch);
  ad::Var h = ad::embedding_mean(tape.param(params, kTextPrefix + ".embed.table"), weights);
  const std::vector<ad::Layer> mlp{ad::DenseLayer{kTextPrefix + ".fc1"}, ad::ReluLayer{},
                                   ad::DenseLayer{kTextPrefix + ".fc2"}, ad::ReluLayer{}};
  h = ad::forward_graph(mlp, h, params);
  return project_heads(h, params, kTextPrefix + ".head");
}

Matrix stack_windows(const EcgEncoderConfig& cfg, const std::vector<const signal::Signal*>& windows) {
  Matrix x(cfg.leads, cfg.samples * static_cast<Index>(windows.size()));
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const auto& w = *windows[b];
    if (w.leads() != cfg.leads || w.samples() != cfg.samples) {
      throw ShapeError("ecg_encode: window " + std::to_string(b) + " is " + std::to_string(w.leads()) + " x " +
                       std::to_string(w.samples()) + ", expected " + std::to_string(cfg.leads) + " x " +
                       std::to_string(cfg.samples));
    }
    x.middleCols(static_cast<Index>(b) * cfg.samples, cfg.samples) = w.data;
  }
  return x;
}

ProbEmbedding ecg_encode(const EcgEncoderConfig& cfg, const signal::Signal& window, ad::ParamStore& params) {
  return ecg_encode_all(cfg, {&window}, params).at(0);
}

ProbEmbedding text_encode(const TextEncoderConfig& cfg, const TokenSequence& tokens, ad::ParamStore& params) {
  return text_encode_all(cfg, {tokens}, params).at(0);
}

EmbeddingBatch ecg_encode_all(const EcgEncoderConfig& cfg, const std::vector<const signal::Signal*>& windows,
                              ad::ParamStore& params, std::size_t chunk) {
  EmbeddingBatch out = EmbeddingBatch::zeros(cfg.embed_dim, static_cast<Index>(windows.size()));
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const std::size_t stop = std::min(windows.size(), start + chunk);
    std::vector<const signal::Signal*> part(windows.begin() + static_cast<std::ptrdiff_t>(start),
                                            windows.begin() + static_cast<std::ptrdiff_t>(stop));
    ad::Tape tape;
    const ProbVars z = ecg_forward(cfg, tape.constant(stack_windows(cfg, part), cfg.samples), params);
    out.mu.middleCols(static_cast<Index>(start), z.mu.cols()) = z.mu.value();
    out.log_var.middleCols(static_cast<Index>(start), z.log_var.cols()) = z.log_var.value();
  }
  return out;
}

EmbeddingBatch text_encode_all(const TextEncoderConfig& cfg, const std::vector<TokenSequence>& seqs,
                               ad::ParamStore& params, std::size_t chunk) {
  EmbeddingBatch out = EmbeddingBatch::zeros(cfg.embed_dim, static_cast<Index>(seqs.size()));
  for (std::size_t start = 0; start < seqs.size(); start += chunk) {
    const std::size_t stop = std::min(seqs.size(), start + chunk);
    std::vector<TokenSequence> part(seqs.begin() + static_cast<std::ptrdiff_t>(start),
                                    seqs.begin() + static_cast<std::ptrdiff_t>(stop));
    ad::Tape tape;
    const ProbVars z = text_forward(cfg, tape, part, params);
    out.mu.middleCols(static_cast<Index>(start), z.mu.cols()) = z.mu.value();
    out.log_var.middleCols(static_cast<Index>(start), z.log_var.cols()) = z.log_var.value();
  }
  return out;
}

Index ecg_parameter_count(const ad::ParamStore& params) {
  Index n = 0;
  for (const auto& [name, p] : params)
    if (name.rfind(kEcgPrefix + ".", 0) == 0) n += p.tensor.size();
  return n;
}

}  // namespace pxm::models
