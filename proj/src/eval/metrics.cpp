#include "pxm/eval/metrics.hpp"

#include "pxm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace pxm::eval {

double recall_at_k(const Eigen::MatrixXd& similarity, const MatchMatrix& m, int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (m.rows() != similarity.rows() || m.cols() != similarity.cols()) {
    throw ShapeError("recall_at_k: match matrix does not match the similarity matrix");
  }
  if (similarity.rows() == 0) throw ShapeError("recall_at_k: no queries");
  const Eigen::Index n = similarity.cols();
  const auto top = static_cast<Eigen::Index>(std::min<Eigen::Index>(k, n));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  double hits = 0.0;
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + top, order.end(), [&](Eigen::Index x, Eigen::Index y) {
      const double sx = similarity(i, x), sy = similarity(i, y);
      return sx > sy || (sx == sy && x < y);
    });
    for (Eigen::Index r = 0; r < top; ++r) {
      if (m(i, order[static_cast<std::size_t>(r)])) {
        hits += 1.0;
        break;
      }
    }
  }
  return hits / static_cast<double>(similarity.rows());
}

double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) throw ShapeError("balanced_accuracy: size mismatch");
  if (labels.empty()) throw ShapeError("balanced_accuracy: no samples");
  std::map<int, std::pair<double, double>> per_class;  // correct, total
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& c = per_class[labels[i]];
    c.second += 1.0;
    if (predictions[i] == labels[i]) c.first += 1.0;
  }
  double sum = 0.0;
  for (const auto& [label, c] : per_class) sum += c.first / c.second;
  return sum / static_cast<double>(per_class.size());
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binary_entropy: p outside [0, 1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

MedianSplit median_split(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("median_split: empty list");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  MedianSplit s;
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  for (std::size_t i = 0; i < n; ++i) (values[i] <= s.median ? s.low : s.high).push_back(i);
  s.degenerate = s.low.empty() || s.high.empty();
  return s;
}

int zeroshot_classify(const Eigen::VectorXd& mu, const std::vector<std::vector<Eigen::VectorXd>>& prompts) {
  if (prompts.size() < 2) throw std::invalid_argument("zeroshot_classify: need at least two classes");
  const double norm = mu.norm();
  if (!(norm > 0.0)) throw NumericError("zeroshot_classify: zero embedding");
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < prompts.size(); ++c) {
    if (prompts[c].empty()) throw std::invalid_argument("zeroshot_classify: class " + std::to_string(c) + " has no prompt");
    double score = -std::numeric_limits<double>::infinity();
    for (const auto& p : prompts[c]) score = std::max(score, mu.dot(p) / (norm * p.norm()));
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(c);
    }
  }
  return best;
}

Eigen::MatrixXd cosine_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows()) throw ShapeError("cosine_matrix: dimension mismatch");
  const Eigen::RowVectorXd na = a.colwise().norm();
  const Eigen::RowVectorXd nb = b.colwise().norm();
  Eigen::MatrixXd s = a.transpose() * b;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j) s(i, j) /= na(i) * nb(j);
  return s;
}

}  // namespace pxm::eval
