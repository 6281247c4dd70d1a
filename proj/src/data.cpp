#include "lgn/data.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <fstream>
#include <iostream>
#include <random>

namespace fs = std::filesystem;

namespace lgn::data {

namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && is_image(e.path()))) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string split_dir(Split split) { return split == Split::train ? "training" : "testing"; }

}  // namespace

Frame<float> read_frame(const fs::path& file, int resize_to) {
  cv::Mat bgr = cv::imread(file.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw UserError("cannot decode image " + file.string());
  if (bgr.rows != resize_to || bgr.cols != resize_to) {
    cv::resize(bgr, bgr, cv::Size(resize_to, resize_to), 0, 0, cv::INTER_LINEAR);
  }
  Frame<float> frame(Shape{3, resize_to, resize_to});
  for (int y = 0; y < resize_to; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < resize_to; ++x) {
      for (int c = 0; c < 3; ++c) frame(c, y, x) = normalize_pixel(row[x][2 - c]);
    }
  }
  return frame;
}

void write_frame(const Frame<float>& frame, const fs::path& file) {
  const Shape s = frame.shape;
  if (s.channels != 3 && s.channels != 1) throw UserError("can only write 1- or 3-channel frames");
  cv::Mat img(s.height, s.width, s.channels == 3 ? CV_8UC3 : CV_8UC1);
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (s.channels == 3) {
        auto& px = img.at<cv::Vec3b>(y, x);
        for (int c = 0; c < 3; ++c) px[2 - c] = static_cast<unsigned char>(denormalize_pixel(frame(c, y, x)));
      } else {
        img.at<unsigned char>(y, x) = static_cast<unsigned char>(denormalize_pixel(frame(0, y, x)));
      }
    }
  }
  if (!cv::imwrite(file.string(), img)) throw UserError("cannot write image " + file.string());
}

std::vector<int> read_labels(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw UserError("cannot open label file " + file.string());
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string token = line.substr(first, last - first + 1);
    if (token != "0" && token != "1") {
      throw UserError(file.string() + ":" + std::to_string(line_no) + ": expected 0 or 1, got '" + token + "'");
    }
    labels.push_back(token == "1");
  }
  return labels;
}

std::vector<LabeledVideo> load_video_frames(const fs::path& root, Split split, int resize_to) {
  const fs::path frames_dir = root / split_dir(split) / "frames";
  if (!fs::is_directory(frames_dir)) throw UserError("missing dataset directory " + frames_dir.string());
  const fs::path labels_dir = root / split_dir(split) / "labels";

  std::vector<LabeledVideo> videos;
  for (const fs::path& dir : sorted_entries(frames_dir, true)) {
    LabeledVideo v;
    v.video_id = dir.filename().string();
    for (const fs::path& f : sorted_entries(dir, false)) v.frames.push_back(read_frame(f, resize_to));
    const fs::path label_file = labels_dir / (v.video_id + ".txt");
    if (split == Split::test && fs::exists(label_file)) {
      v.labels = read_labels(label_file);
      if (v.labels.size() != v.frames.size()) {
        throw UserError("video " + v.video_id + ": " + std::to_string(v.labels.size()) + " labels for " +
                        std::to_string(v.frames.size()) + " frames");
      }
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

std::vector<FrameWindow> make_windows(const LabeledVideo& video, int n) {
  std::vector<FrameWindow> out;
  const int count = int(video.frames.size()) - n;
  if (count <= 0) {
    std::cerr << "warning: video " << video.video_id << " has " << video.frames.size()
              << " frames, fewer than the " << n + 1 << " needed for one window\n";
    return out;
  }
  out.reserve(count);
  for (int t = 0; t < count; ++t) out.push_back(FrameWindow{&video, t, n});
  return out;
}

std::vector<FrameWindow> make_windows(std::span<const LabeledVideo> videos, int n) {
  std::vector<FrameWindow> out;
  for (const auto& v : videos) {
    auto w = make_windows(v, n);
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::fast_motion: return "fast_motion";
    case AnomalyKind::shape_swap: return "shape_swap";
    case AnomalyKind::reverse_path: return "reverse_path";
  }
  return "unknown";
}

AnomalyKind parse_anomaly_kind(const std::string& name) {
  for (auto k : {AnomalyKind::fast_motion, AnomalyKind::shape_swap, AnomalyKind::reverse_path}) {
    if (to_string(k) == name) return k;
  }
  throw UserError("unknown anomaly kind '" + name + "'");
}

namespace {

using Rgb = std::array<int, 3>;

constexpr Rgb kObject{240, 220, 40};

Frame<float> background(int size) {
  Frame<float> f(Shape{3, size, size});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      Rgb c{40 + 40 * x / size, 60 + 30 * y / size, 90};
      if (y < size / 4 && (x / 8) % 3 == 0) c = {70, 70, 110};       // buildings
      if (y > size - size / 6) c = {c[0] / 2 + 30, c[1] / 2 + 30, 60};  // curb
      for (int ch = 0; ch < 3; ++ch) f(ch, y, x) = normalize_pixel(c[ch]);
    }
  }
  return f;
}

void draw_square(Frame<float>& f, int x0, int y0, int side) {
  for (int y = y0; y < y0 + side; ++y) {
    for (int x = x0; x < x0 + side; ++x) {
      if (y < 0 || x < 0 || y >= f.shape.height || x >= f.shape.width) continue;
      for (int c = 0; c < 3; ++c) f(c, y, x) = normalize_pixel(kObject[c]);
    }
  }
}

void draw_disc(Frame<float>& f, int x0, int y0, int side) {
  const double cx = x0 + (side - 1) / 2.0;
  const double cy = y0 + (side - 1) / 2.0;
  const double r = side / 2.0 + 1.0;
  for (int y = int(cy - r) - 1; y <= int(cy + r) + 1; ++y) {
    for (int x = int(cx - r) - 1; x <= int(cx + r) + 1; ++x) {
      if (y < 0 || x < 0 || y >= f.shape.height || x >= f.shape.width) continue;
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r * r) continue;
      for (int c = 0; c < 3; ++c) f(c, y, x) = normalize_pixel(kObject[c]);
    }
  }
}

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::string video_name(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", i);
  return buf;
}

}  // namespace

SyntheticDataset synth_generate(std::uint64_t seed, int num_train, int num_test, const std::set<AnomalyKind>& kinds,
                                const SynthOptions& o) {
  SyntheticDataset ds;
  if (num_test > 0 && kinds.empty()) throw UserError("test videos need at least one anomaly kind");
  std::mt19937_64 rng(seed);
  const Frame<float> scene = background(o.size);
  const int y_max = o.size - o.object_side - 8;

  for (int v = 0; v < num_train; ++v) {
    LabeledVideo video;
    video.video_id = video_name(v);
    int x = uniform(rng, -o.object_side, 4);
    const int y = uniform(rng, o.size / 4, y_max);
    for (int t = 0; t < o.train_length; ++t) {
      if (t > 0) x += o.normal_speed;
      Frame<float> f = scene;
      draw_square(f, x, y, o.object_side);
      video.frames.push_back(std::move(f));
    }
    ds.train.push_back(std::move(video));
  }

  const std::vector<AnomalyKind> kind_list(kinds.begin(), kinds.end());
  for (int v = 0; v < num_test; ++v) {
    const AnomalyKind kind = kind_list[v % kind_list.size()];
    LabeledVideo video;
    video.video_id = video_name(v);
    int x = uniform(rng, -6, 0);
    const int y = uniform(rng, o.size / 4, y_max);
    const int seg_begin = uniform(rng, 16, 20);
    const int seg_end = std::min(seg_begin + o.segment_length, o.test_length);
    for (int t = 0; t < o.test_length; ++t) {
      const bool abnormal = t >= seg_begin && t < seg_end;
      if (t > 0) {
        int step = o.normal_speed;
        if (abnormal && kind == AnomalyKind::fast_motion) step *= o.fast_factor;
        if (abnormal && kind == AnomalyKind::reverse_path) step = -step;
        x += step;
      }
      Frame<float> f = scene;
      if (abnormal && kind == AnomalyKind::shape_swap) {
        draw_disc(f, x, y, o.object_side);
      } else {
        draw_square(f, x, y, o.object_side);
      }
      video.frames.push_back(std::move(f));
      video.labels.push_back(abnormal ? 1 : 0);
    }
    ds.test.push_back(std::move(video));
  }
  return ds;
}

void write_dataset(const SyntheticDataset& ds, const fs::path& root) {
  auto write_split = [&](const std::vector<LabeledVideo>& videos, Split split) {
    for (const auto& v : videos) {
      const fs::path dir = root / split_dir(split) / "frames" / v.video_id;
      fs::create_directories(dir);
      for (std::size_t t = 0; t < v.frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "%04zu.png", t);
        write_frame(v.frames[t], dir / name);
      }
      if (v.labeled()) {
        const fs::path labels = root / split_dir(split) / "labels";
        fs::create_directories(labels);
        std::ofstream out(labels / (v.video_id + ".txt"));
        for (int l : v.labels) out << l << '\n';
        if (!out) throw UserError("cannot write labels for " + v.video_id);
      }
    }
  };
  write_split(ds.train, Split::train);
  write_split(ds.test, Split::test);
}

}  // namespace lgn::data
