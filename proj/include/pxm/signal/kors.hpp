#pragma once

#include "pxm/signal/signal.hpp"

#include <filesystem>

namespace pxm::signal {

/// 3 x 8 regression from (I, II, V1..V6) to (X, Y, Z).
using KorsMatrix = Eigen::Matrix<double, 3, 8>;

/// The published Kors regression coefficients.
KorsMatrix default_kors_matrix();

/// Reads a 3 x 8 CSV (optional header row of lead names is skipped).
KorsMatrix load_kors_matrix(const std::filesystem::path& path);

/// Kors matrix from `$PXM_KORS_MATRIX`, else `fallback_path` if non-empty,
/// else the built-in coefficients.
KorsMatrix resolve_kors_matrix(const std::filesystem::path& fallback_path = {});

/// 8 x 3 Moore-Penrose pseudo-inverse; K * pinv(K) = I3.
Eigen::Matrix<double, 8, 3> kors_pseudo_inverse(const KorsMatrix& k);

/// Completes (I, II, V1..V6) with III, aVR, aVL, aVF in standard 12-lead order.
Signal expand_to_twelve_leads(const Eigen::MatrixXd& independent, double fs);

/// VCG (X, Y, Z) -> 12-lead ECG: the 8 independent leads are pinv(K) * vcg,
/// the limb leads follow from the Einthoven/Goldberger identities.
Signal kors_vcg_to_12lead(const Signal& vcg, const KorsMatrix& k = default_kors_matrix());

/// Rows of a 12-lead signal holding I, II, V1..V6.
Eigen::MatrixXd independent_leads(const Signal& twelve_lead);

}  // namespace pxm::signal
