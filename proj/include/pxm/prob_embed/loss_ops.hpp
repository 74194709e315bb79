#pragma once

#include "pxm/autodiff/ops.hpp"
#include "pxm/prob_embed/prob_embed.hpp"

#include <random>
#include <string>

namespace pxm {

/// Recorded (mu, log_var) pair for a batch, D x B each.
struct ProbVars {
  ad::Var mu;
  ad::Var log_var;
};

/// Registers "<prefix>.mu.{w,b}" and "<prefix>.logvar.{w,b}" in `params`.
/// The log-variance head starts with small weights and the given bias.
void init_heads(ad::ParamStore& params, const std::string& prefix, ad::Index in_dim, ad::Index out_dim,
                double logvar_bias, std::mt19937_64& rng);

/// Two linear heads on a feature batch: mu is L2-normalized, log_var clamped
/// to [kLogVarMin, kLogVarMax].
ProbVars project_heads(const ad::Var& features, ad::ParamStore& params, const std::string& prefix);

/// m x n matrix of closed-form sampled distances between batch columns.
ad::Var pairwise_csd(const ProbVars& a, const ProbVars& b);

/// Mean BCE between logistic(-scale * d + shift) and `m` over every entry.
/// `scale` and `shift` are 1 x 1.
ad::Var match_bce(const ad::Var& distances, const MatchMatrix& m, const ad::Var& scale, const ad::Var& shift);

/// Symmetric cross-entropy over cosine logits / temperature. Inputs need not
/// be normalized.
ad::Var infonce(const ad::Var& a_mu, const ad::Var& b_mu, const MatchMatrix& m, double temperature);

/// Batch mean of KL(N(mu, diag exp(log_var)) || N(0, I)).
ad::Var vib_kl(const ProbVars& z);

EmbeddingBatch to_batch(const ProbVars& z);

// Trainable matching scalars "<prefix>.scale_raw" and "<prefix>.shift". The
// scale a is stored as a softplus pre-activation so it stays positive.
inline const std::string kMatchPrefix = "match";
inline const std::string kTeacherMatchPrefix = "match_teacher";

void init_match_scalars(ad::ParamStore& params, double scale, double shift, const std::string& prefix = kMatchPrefix);
/// Positive scale a = softplus(raw) and shift b as recorded scalars.
std::pair<ad::Var, ad::Var> match_scalars(ad::Tape& tape, ad::ParamStore& params,
                                          const std::string& prefix = kMatchPrefix);
double match_scale_value(const ad::ParamStore& params, const std::string& prefix = kMatchPrefix);
double match_shift_value(const ad::ParamStore& params, const std::string& prefix = kMatchPrefix);

}  // namespace pxm
