#pragma once

#include "pxm/autodiff/sequential.hpp"
#include "pxm/prob_embed/loss_ops.hpp"
#include "pxm/signal/signal.hpp"

#include <random>
#include <string>
#include <vector>

namespace pxm::models {

inline const std::string kEcgPrefix = "ecg";
inline const std::string kTextPrefix = "text";
inline constexpr double kDefaultLogVarBias = -7.0;

/// 1D-ResNet: stem conv (stride 2) -> residual blocks -> global average pool
/// -> (mu, log_var) heads. Every block downsamples by `block_stride`.
struct EcgEncoderConfig {
  ad::Index leads = 12;
  double input_fs = 100.0;
  ad::Index samples = 1000;
  ad::Index stem_channels = 32;
  ad::Index stem_kernel = 7;
  ad::Index stem_stride = 2;
  std::vector<ad::Index> widths{32, 64, 128, 256};
  ad::Index block_kernel = 3;
  ad::Index block_stride = 2;
  ad::Index embed_dim = 256;
  double logvar_bias = kDefaultLogVarBias;

  void validate() const;
  ad::Index blocks() const { return static_cast<ad::Index>(widths.size()); }
};

/// Embedding table -> mean over non-pad tokens -> 2-layer MLP -> heads.
struct TextEncoderConfig {
  ad::Index vocab_size = 128;
  ad::Index max_length = 244;
  ad::Index token_dim = 64;
  ad::Index hidden_dim = 128;
  ad::Index embed_dim = 256;
  double logvar_bias = kDefaultLogVarBias;

  void validate() const;
};

inline constexpr int kPadToken = 0;

/// Token ids; id 0 marks padding.
struct TokenSequence {
  std::vector<int> ids;

  std::size_t content_length() const;
};

/// Layer list of the ECG trunk up to and including global average pooling.
std::vector<ad::Layer> ecg_trunk(const EcgEncoderConfig& cfg);
void init_ecg_encoder(const EcgEncoderConfig& cfg, ad::ParamStore& params, std::mt19937_64& rng);
void init_text_encoder(const TextEncoderConfig& cfg, ad::ParamStore& params, std::mt19937_64& rng);

/// Recorded forward pass for a batch of windows already stacked as a
/// leads x (B * samples) sequence batch.
ProbVars ecg_forward(const EcgEncoderConfig& cfg, const ad::Var& windows, ad::ParamStore& params);
ProbVars text_forward(const TextEncoderConfig& cfg, ad::Tape& tape, const std::vector<TokenSequence>& batch,
                      ad::ParamStore& params);

/// Stacks windows side by side; throws ShapeError unless each is exactly
/// cfg.leads x cfg.samples.
ad::Matrix stack_windows(const EcgEncoderConfig& cfg, const std::vector<const signal::Signal*>& windows);

/// V x B pooling weights: column b holds 1/len at each non-pad token of sequence b.
/// Throws ShapeError on out-of-range ids, over-long or empty sequences.
ad::Matrix pooling_weights(const TextEncoderConfig& cfg, const std::vector<TokenSequence>& batch);

ProbEmbedding ecg_encode(const EcgEncoderConfig& cfg, const signal::Signal& window, ad::ParamStore& params);
ProbEmbedding text_encode(const TextEncoderConfig& cfg, const TokenSequence& tokens, ad::ParamStore& params);

/// Value-only batched encoders; chunks of `chunk` samples per tape.
EmbeddingBatch ecg_encode_all(const EcgEncoderConfig& cfg, const std::vector<const signal::Signal*>& windows,
                              ad::ParamStore& params, std::size_t chunk = 64);
EmbeddingBatch text_encode_all(const TextEncoderConfig& cfg, const std::vector<TokenSequence>& seqs,
                               ad::ParamStore& params, std::size_t chunk = 256);

/// Scalars owned by the ECG encoder (trunk and heads).
ad::Index ecg_parameter_count(const ad::ParamStore& params);

}  // namespace pxm::models
