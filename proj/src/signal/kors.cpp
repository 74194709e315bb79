#include "pxm/signal/kors.hpp"

#include "pxm/errors.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pxm::signal {

KorsMatrix default_kors_matrix() {
  KorsMatrix k;
  //     I      II     V1     V2     V3     V4     V5     V6
  k << 0.38, -0.07, -0.13, 0.05, -0.01, 0.14, 0.06, 0.54,   // X
      -0.07, 0.93, 0.06, -0.02, -0.05, 0.06, -0.17, 0.13,   // Y
      0.11, -0.23, -0.43, -0.06, -0.14, -0.20, -0.11, 0.31;  // Z
  return k;
}

KorsMatrix load_kors_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("kors_matrix", "cannot open " + path.string());
  KorsMatrix k;
  int row = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream is(line);
    std::string cell;
    std::vector<double> values;
    bool numeric = true;
    while (std::getline(is, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (row == 0) continue;  // header
      throw ConfigError("kors_matrix", "non-numeric cell in " + path.string());
    }
    if (values.size() != 8 || row >= 3) throw ConfigError("kors_matrix", "expected 3 rows of 8 values in " + path.string());
    for (int c = 0; c < 8; ++c) k(row, c) = values[static_cast<std::size_t>(c)];
    ++row;
  }
  if (row != 3) throw ConfigError("kors_matrix", "expected 3 rows of 8 values in " + path.string());
  return k;
}

KorsMatrix resolve_kors_matrix(const std::filesystem::path& fallback_path) {
  if (const char* env = std::getenv("PXM_KORS_MATRIX"); env != nullptr && *env != '\0') {
    return load_kors_matrix(env);
  }
  if (!fallback_path.empty()) return load_kors_matrix(fallback_path);
  return default_kors_matrix();
}

Eigen::Matrix<double, 8, 3> kors_pseudo_inverse(const KorsMatrix& k) {
  // Full row rank: pinv(K) = K^T (K K^T)^{-1}.
  const Eigen::Matrix3d gram = k * k.transpose();
  return k.transpose() * gram.ldlt().solve(Eigen::Matrix3d::Identity());
}

Signal expand_to_twelve_leads(const Eigen::MatrixXd& independent, double fs) {
  if (independent.rows() != 8) throw ShapeError("expand_to_twelve_leads: expected 8 independent leads");
  const auto lead_i = independent.row(0);
  const auto lead_ii = independent.row(1);
  Signal out;
  out.fs = fs;
  out.lead_names = twelve_lead_names();
  out.data.resize(12, independent.cols());
  out.data.row(0) = lead_i;
  out.data.row(1) = lead_ii;
  out.data.row(2) = lead_ii - lead_i;                  // III
  out.data.row(3) = -(lead_i + lead_ii) / 2.0;         // aVR
  out.data.row(4) = lead_i - lead_ii / 2.0;            // aVL
  out.data.row(5) = lead_ii - lead_i / 2.0;            // aVF
  out.data.bottomRows(6) = independent.bottomRows(6);  // V1..V6
  out.validate();
  return out;
}

Signal kors_vcg_to_12lead(const Signal& vcg, const KorsMatrix& k) {
  vcg.validate();
  if (vcg.leads() != 3) {
    throw ShapeError("kors_vcg_to_12lead: expected 3 VCG leads, got " + std::to_string(vcg.leads()));
  }
  const Eigen::MatrixXd independent = kors_pseudo_inverse(k) * vcg.data;
  return expand_to_twelve_leads(independent, vcg.fs);
}

Eigen::MatrixXd independent_leads(const Signal& s) {
  if (s.leads() != 12) throw ShapeError("independent_leads: expected a 12-lead signal");
  Eigen::MatrixXd out(8, s.samples());
  out.topRows(2) = s.data.topRows(2);
  out.bottomRows(6) = s.data.bottomRows(6);
  return out;
}

}  // namespace pxm::signal
