#pragma once

#include "pxm/prob_embed/prob_embed.hpp"

#include <cstddef>
#include <vector>

namespace pxm::eval {

/// Fraction of rows whose k highest-similarity columns contain a match.
/// Ties in similarity go to the lower column index.
double recall_at_k(const Eigen::MatrixXd& similarity, const MatchMatrix& m, int k);

/// Unweighted mean of per-class recall over the classes present in `labels`.
double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

/// -(p log2 p + (1 - p) log2 (1 - p)) with 0 log 0 = 0.
double binary_entropy(double p);

inline constexpr double kEntropyThreshold = 0.5;

struct MedianSplit {
  std::vector<std::size_t> low;   // values <= median
  std::vector<std::size_t> high;  // values > median
  double median = 0.0;
  bool degenerate = false;        // one side is empty
};

/// Even n uses the midpoint of the two central order statistics.
MedianSplit median_split(const std::vector<double>& values);

/// Index of the largest cosine per class over that class's prompts.
/// Ties go to the lowest class index. Throws if a class has no prompt.
int zeroshot_classify(const Eigen::VectorXd& mu, const std::vector<std::vector<Eigen::VectorXd>>& prompts);

/// Cosine similarity matrix between the columns of a and b.
Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace pxm::eval
