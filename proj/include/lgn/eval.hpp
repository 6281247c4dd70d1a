#pragma once

#include "lgn/tensor.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace lgn {

struct RocCurve {
  std::vector<double> thresholds;  // +inf first, then unique scores descending
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;
};

namespace eval {

/// Frame-level ROC over every unique threshold (score >= threshold flags an
/// anomaly); AUC by the trapezoid rule. Throws if only one class is present.
RocCurve roc_auc(std::span<const double> anomaly_scores, std::span<const int> labels);

/// CSV with header threshold,fpr,tpr.
void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path);

/// Per-pixel channelwise L2 error, min-max normalized per frame. Constant
/// error maps (including identical frames) come out all zero.

template <typename Scalar>
Matrix<double> error_map(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target);

}  // namespace eval
}  // namespace lgn
