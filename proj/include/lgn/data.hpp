#pragma once

#include "lgn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace lgn {

struct LabeledVideo {
  std::string video_id;
  std::vector<Frame<float>> frames;
  std::vector<int> labels;  // empty for unlabeled (training) videos; 1 = abnormal

  bool labeled() const { return !labels.empty(); }
};

/// n consecutive input frames of one video and the frame right after them.
struct FrameWindow {
  const LabeledVideo* video = nullptr;
  int start = 0;
  int n = 0;

  std::span<const Frame<float>> inputs() const { return {video->frames.data() + start, std::size_t(n)}; }
  const Frame<float>& target() const { return video->frames[start + n]; }
  int target_index() const { return start + n; }
};

enum class Split { train, test };

namespace data {

inline float normalize_pixel(double v) { return float(v / 127.5 - 1.0); }
inline int denormalize_pixel(double v) {
  const double x = (v + 1.0) * 127.5;
  return int(std::clamp(std::lround(x), 0L, 255L));
}

/// Reads root/{training,testing}/frames/<video>/<frame>.{png,jpg,jpeg,bmp}
/// plus root/testing/labels/<video>.txt when present. Frames are converted to
/// RGB, bilinearly resized to resize_to x resize_to and mapped to [-1, 1].
std::vector<LabeledVideo> load_video_frames(const std::filesystem::path& root, Split split, int resize_to);

std::vector<int> read_labels(const std::filesystem::path& file);

/// len(frames) - n windows; fewer than n + 1 frames gives none and a warning.
std::vector<FrameWindow> make_windows(const LabeledVideo& video, int n);

/// Windows of every video, in video order.
std::vector<FrameWindow> make_windows(std::span<const LabeledVideo> videos, int n);

enum class AnomalyKind { fast_motion, shape_swap, reverse_path };
std::string to_string(AnomalyKind k);
AnomalyKind parse_anomaly_kind(const std::string& name);

struct SynthOptions {
  int size = 64;
  int train_length = 48;
  int test_length = 48;
  int object_side = 8;
  int normal_speed = 1;  // pixels per frame, rightward
  int fast_factor = 3;
  int segment_length = 10;
};

struct SyntheticDataset {
  std::vector<LabeledVideo> train;
  std::vector<LabeledVideo> test;
};

/// One square translating right at a fixed slow speed over a static scene.
/// Test video i carries one contiguous anomaly of kind kinds[i % |kinds|]:
/// fast_motion (fast_factor x speed), shape_swap (a disc replaces the
/// square) or reverse_path (moves left), labeled frame by frame.
SyntheticDataset synth_generate(std::uint64_t seed, int num_train, int num_test,
                                const std::set<AnomalyKind>& kinds, const SynthOptions& options = {});

/// Writes frames as PNG plus label files in the load_video_frames layout.
void write_dataset(const SyntheticDataset& dataset, const std::filesystem::path& root);

void write_frame(const Frame<float>& frame, const std::filesystem::path& file);
Frame<float> read_frame(const std::filesystem::path& file, int resize_to);

}  // namespace data
}  // namespace lgn
