#pragma once

#include "lgn/memory.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lgn {

struct ScoreRecord {
  int frame_index = 0;
  double psnr = 0.0;
  double dist = 0.0;      // mean query-to-nearest-prototype distance
  double regular = 0.0;   // error-weighted regular score R_t
  double normality = 0.0; // N_t, filled in after per-video normalization
  std::optional<int> label;
};

struct ScoreSeries {
  std::string video_id;
  std::vector<ScoreRecord> records;

  std::vector<double> psnr() const;
  std::vector<double> dist() const;
  std::vector<double> normality() const;
};

namespace scoring {

inline constexpr double kFloor = 1e-10;

/// 10*log10(max(pred) / mse) on [0, 1] pixels; numerator and mse floored at 1e-10.
template <typename Scalar>
double psnr(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target);

/// Mean over queries of the L2 distance to the nearest prototype.
template <typename Scalar>
double feature_distance(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool, const MatchResult<Scalar>& m);

/// Per-pixel error e_ij = ||pred_ij - target_ij|| over channels, weighted by
/// (1 - exp(-e_ij)) normalized to sum 1. Zero error everywhere gives 0.
template <typename Scalar>
double regular_score(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target);

/// Min-max map to [0, 1]; a constant series maps to 0.5.
std::vector<double> normalize_series(std::span<const double> values);

/// N_t = lambda * norm(P) + (1 - lambda) * (1 - norm(D)). Higher is more normal.
std::vector<double> normality_score(std::span<const double> psnr, std::span<const double> dist, double lambda);

/// Fills ScoreRecord::normality for one video.
void finalize(ScoreSeries& series, double lambda);

/// Mean N_t of normal frames minus mean N_t of abnormal frames; nullopt if a class is missing.
std::optional<double> gap_score(std::span<const ScoreSeries> series);
std::optional<double> gap_score(std::span<const double> normality, std::span<const int> labels);

/// CSV with header frame_index,psnr,dist,regular,normality,label (label empty when unknown).
void write_csv(const ScoreSeries& series, const std::filesystem::path& path);
ScoreSeries read_csv(const std::filesystem::path& path);

}  // namespace scoring
}  // namespace lgn
