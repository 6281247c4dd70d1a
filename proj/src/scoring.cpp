#include "lgn/scoring.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <cmath>

namespace lgn {

std::vector<double> ScoreSeries::psnr() const {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.psnr);
  return out;
}

std::vector<double> ScoreSeries::dist() const {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.dist);
  return out;
}

std::vector<double> ScoreSeries::normality() const {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.normality);
  return out;
}

namespace scoring {

template <typename Scalar>
double psnr(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target) {
  if (pred.shape != target.shape) throw UserError("psnr: shape " + pred.shape.str() + " vs " + target.shape.str());
  const double mse = (pred.data - target.data).template cast<double>().squaredNorm() / double(pred.shape.pixels());
  const double peak = std::max(double(pred.data.maxCoeff()), kFloor);
  return 10.0 * std::log10(peak / std::max(mse, kFloor));
}

template <typename Scalar>
double feature_distance(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool, const MatchResult<Scalar>& m) {
  if (q.count() == 0) return 0.0;
  double total = 0.0;
  for (int k = 0; k < q.count(); ++k) total += double((q.queries.col(k) - pool.prototypes.col(m.nearest[k])).norm());
  return total / q.count();
}

template <typename Scalar>
double regular_score(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target) {
  if (pred.shape != target.shape) {
    throw UserError("regular score: shape " + pred.shape.str() + " vs " + target.shape.str());
  }
  const Eigen::ArrayXd err = (pred.data - target.data).template cast<double>().colwise().norm().transpose().array();
  const Eigen::ArrayXd w = 1.0 - (-err).exp();
  const double denom = w.sum();
  if (denom <= 0.0) return err.mean();
  return (w * err).sum() / denom;
}

std::vector<double> normalize_series(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  std::vector<double> out(values.size(), 0.5);
  if (span > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - *lo) / span;
  }
  return out;
}

std::vector<double> normality_score(std::span<const double> psnr, std::span<const double> dist, double lambda) {
  if (psnr.size() != dist.size()) {
    throw UserError("normality score: " + std::to_string(psnr.size()) + " PSNR values vs " +
                    std::to_string(dist.size()) + " distances");
  }
  const auto p = normalize_series(psnr);
  const auto d = normalize_series(dist);
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = lambda * p[i] + (1.0 - lambda) * (1.0 - d[i]);
  return out;
}

void finalize(ScoreSeries& series, double lambda) {
  const auto n = normality_score(series.psnr(), series.dist(), lambda);
  for (std::size_t i = 0; i < n.size(); ++i) series.records[i].normality = n[i];
}

std::optional<double> gap_score(std::span<const double> normality, std::span<const int> labels) {
  if (normality.size() != labels.size()) throw UserError("gap score: length mismatch");
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i] ? 1 : 0;
    sum[c] += normality[i];
    ++count[c];
  }
  if (count[0] == 0 || count[1] == 0) return std::nullopt;
  return sum[0] / double(count[0]) - sum[1] / double(count[1]);
}

std::optional<double> gap_score(std::span<const ScoreSeries> series) {
  std::vector<double> n;
  std::vector<int> labels;
  for (const auto& s : series) {
    for (const auto& r : s.records) {
      if (!r.label) continue;
      n.push_back(r.normality);
      labels.push_back(*r.label);
    }
  }
  return gap_score(n, labels);
}

template double psnr<float>(const Tensor3<float>&, const Tensor3<float>&);
template double psnr<double>(const Tensor3<double>&, const Tensor3<double>&);
template double feature_distance<float>(const QueryGrid<float>&, const MemoryPool<float>&, const MatchResult<float>&);
template double feature_distance<double>(const QueryGrid<double>&, const MemoryPool<double>&,
                                         const MatchResult<double>&);
template double regular_score<float>(const Tensor3<float>&, const Tensor3<float>&);
template double regular_score<double>(const Tensor3<double>&, const Tensor3<double>&);


void write_csv(const ScoreSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw UserError("cannot write " + path.string());
  out << "frame_index,psnr,dist,regular,normality,label\n";
  char buf[160];
  for (const auto& r : series.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,", r.frame_index, r.psnr, r.dist, r.regular,
                  r.normality);
    out << buf;
    if (r.label) out << *r.label;
    out << '\n';
  }
}

ScoreSeries read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open score file " + path.string());
  ScoreSeries series;
  series.video_id = path.stem().string();
  std::string line;
  std::getline(in, line);
  if (line.rfind("frame_index,psnr,dist,regular,normality,label", 0) != 0) {
    throw UserError(path.string() + ":1: not a score CSV header");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() == 5 && line.back() == ',') cells.emplace_back();
    if (cells.size() != 6) throw UserError(path.string() + ":" + std::to_string(line_no) + ": expected 6 fields");
    try {
      ScoreRecord r;
      r.frame_index = std::stoi(cells[0]);
      r.psnr = std::stod(cells[1]);
      r.dist = std::stod(cells[2]);
      r.regular = std::stod(cells[3]);
      r.normality = std::stod(cells[4]);
      if (!cells[5].empty()) r.label = std::stoi(cells[5]);
      series.records.push_back(r);
    } catch (const std::exception&) {
      throw UserError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return series;
}

}  // namespace scoring
}  // namespace lgn
