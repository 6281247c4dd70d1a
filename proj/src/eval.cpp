#include "lgn/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace lgn::eval {

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw UserError("roc: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) +
                    " labels");
  }
  const auto positives = std::size_t(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw UserError("roc: both normal and abnormal frames are required (got " + std::to_string(negatives) +
                    " normal, " + std::to_string(positives) + " abnormal)");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      if (labels[order[i]]) {
        ++tp;
      } else {
        ++fp;
      }
    }
    const double fpr = double(fp) / double(negatives);
    const double tpr = double(tp) / double(positives);
    roc.auc += (fpr - roc.fpr.back()) * (tpr + roc.tpr.back()) * 0.5;
    roc.thresholds.push_back(threshold);
    roc.fpr.push_back(fpr);
    roc.tpr.push_back(tpr);
  }
  return roc;
}

template <typename Scalar>
Matrix<double> error_map(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target) {
  if (pred.shape != target.shape) throw UserError("error map: shape " + pred.shape.str() + " vs " + target.shape.str());
  const Eigen::RowVectorXd err = (pred.data - target.data).template cast<double>().colwise().norm();
  Matrix<double> map(pred.shape.height, pred.shape.width);
  const double lo = err.minCoeff();
  const double span = err.maxCoeff() - lo;
  for (int y = 0; y < pred.shape.height; ++y) {
    for (int x = 0; x < pred.shape.width; ++x) {
      map(y, x) = span > 0.0 ? (err(y * pred.shape.width + x) - lo) / span : 0.0;
    }
  }
  return map;
}

template Matrix<double> error_map<float>(const Tensor3<float>&, const Tensor3<float>&);
template Matrix<double> error_map<double>(const Tensor3<double>&, const Tensor3<double>&);


void write_roc_csv(const RocCurve& roc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  char buf[96];
  for (std::size_t i = 0; i < roc.fpr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", roc.thresholds[i], roc.fpr[i], roc.tpr[i]);
    out << buf;
  }
}

}  // namespace lgn::eval
