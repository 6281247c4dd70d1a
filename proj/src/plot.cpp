#include "lgn/plot.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cstdio>

namespace lgn::plot {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 360;
constexpr int kLeft = 60;
constexpr int kRight = 20;
constexpr int kTop = 36;
constexpr int kBottom = 44;

const cv::Scalar kInk(40, 40, 40);
const cv::Scalar kGrid(225, 225, 225);

struct Axes {
  cv::Mat canvas;
  double x0, x1, y0, y1;

  int px(double x) const {
    const double t = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
    return kLeft + int(t * (canvas.cols - kLeft - kRight));
  }
  int py(double y) const {
    const double t = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
    return canvas.rows - kBottom - int(t * (canvas.rows - kTop - kBottom));
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

void label(cv::Mat& img, const std::string& text, cv::Point at, double scale = 0.45) {
  cv::putText(img, text, at, cv::FONT_HERSHEY_SIMPLEX, scale, kInk, 1, cv::LINE_AA);
}

Axes make_axes(int width, int height, double x0, double x1, double y0, double y1, const std::string& title,
               const std::string& xlabel, const std::string& ylabel) {
  Axes a{cv::Mat(height, width, CV_8UC3, cv::Scalar(255, 255, 255)), x0, x1, y0, y1};
  for (int i = 0; i <= 4; ++i) {
    const double yv = y0 + (y1 - y0) * i / 4.0;
    cv::line(a.canvas, {a.px(x0), a.py(yv)}, {a.px(x1), a.py(yv)}, kGrid, 1);
    label(a.canvas, num(yv), {4, a.py(yv) + 4}, 0.4);
    const double xv = x0 + (x1 - x0) * i / 4.0;
    label(a.canvas, num(xv), {a.px(xv) - 10, height - kBottom + 16}, 0.4);
  }
  cv::rectangle(a.canvas, {a.px(x0), a.py(y1)}, {a.px(x1), a.py(y0)}, kInk, 1);
  label(a.canvas, title, {kLeft, 22}, 0.55);
  label(a.canvas, xlabel, {width / 2 - 30, height - 8});
  label(a.canvas, ylabel, {4, kTop - 8}, 0.4);
  return a;
}

void save(const cv::Mat& img, const std::filesystem::path& png) {
  if (png.has_parent_path()) std::filesystem::create_directories(png.parent_path());
  if (!cv::imwrite(png.string(), img)) throw UserError("cannot write image " + png.string());
}

}  // namespace

void normality_curve(const ScoreSeries& series, const std::filesystem::path& png) {
  const auto& recs = series.records;
  double x0 = 0.0, x1 = 1.0;
  if (!recs.empty()) {
    x0 = recs.front().frame_index;
    x1 = std::max(double(recs.back().frame_index), x0 + 1.0);
  }
  Axes a = make_axes(kWidth, kHeight, x0, x1, 0.0, 1.0, "normality score: " + series.video_id, "frame",
                     "N_t");
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (!recs[i].label || *recs[i].label == 0) continue;
    const double half = 0.5;
    cv::rectangle(a.canvas, {a.px(recs[i].frame_index - half), a.py(1.0)},
                  {a.px(recs[i].frame_index + half), a.py(0.0)}, cv::Scalar(200, 200, 255), cv::FILLED);
  }
  std::vector<cv::Point> pts;
  for (const auto& r : recs) pts.emplace_back(a.px(r.frame_index), a.py(std::clamp(r.normality, 0.0, 1.0)));
  if (pts.size() == 1) pts.emplace_back(a.px(x1), pts.front().y);
  if (!pts.empty()) cv::polylines(a.canvas, pts, false, cv::Scalar(180, 90, 20), 2, cv::LINE_AA);
  save(a.canvas, png);
}

void roc_curve(const RocCurve& roc, const std::filesystem::path& png, const std::string& title) {
  Axes a = make_axes(kHeight + 80, kHeight + 40, 0.0, 1.0, 0.0, 1.0, title + "  AUC " + num(roc.auc),
                     "false positive rate", "TPR");
  cv::line(a.canvas, {a.px(0), a.py(0)}, {a.px(1), a.py(1)}, cv::Scalar(160, 160, 160), 1, cv::LINE_AA);
  std::vector<cv::Point> pts;
  for (std::size_t i = 0; i < roc.fpr.size(); ++i) pts.emplace_back(a.px(roc.fpr[i]), a.py(roc.tpr[i]));
  if (!pts.empty()) cv::polylines(a.canvas, pts, false, cv::Scalar(40, 40, 200), 2, cv::LINE_AA);
  save(a.canvas, png);
}

void error_heatmap(const Matrix<double>& map, const std::filesystem::path& png, int scale) {
  if (map.size() == 0) throw UserError("error heatmap: empty map");
  scale = std::max(scale, 1);
  cv::Mat gray(int(map.rows()), int(map.cols()), CV_8UC1);
  for (int y = 0; y < gray.rows; ++y) {
    for (int x = 0; x < gray.cols; ++x) gray.at<std::uint8_t>(y, x) = cv::saturate_cast<std::uint8_t>(255.0 * map(y, x));
  }
  cv::Mat big, color;
  cv::resize(gray, big, {gray.cols * scale, gray.rows * scale}, 0, 0, cv::INTER_NEAREST);
  cv::applyColorMap(big, color, cv::COLORMAP_JET);
  save(color, png);
}

}  // namespace lgn::plot
