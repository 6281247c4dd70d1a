#pragma once

#include "lgn/data.hpp"
#include "lgn/eval.hpp"
#include "lgn/model.hpp"
#include "lgn/scoring.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace lgn {

struct TrainConfig {
  double learning_rate = 2e-4;
  int batch_size = 8;
  int epochs = 60;
  std::uint64_t seed = 0;
  LossWeights weights;
  double clip_norm = 10.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

template <typename Scalar>
class Adam {
 public:
  explicit Adam(const ParameterSet<Scalar>& params);
  /// One bias-corrected adaptive-moment step using the gradients in `params`.
  void step(ParameterSet<Scalar>& params, const TrainConfig& config);
  long steps() const { return steps_; }

 private:
  std::vector<Matrix<Scalar>> m_;
  std::vector<Matrix<Scalar>> v_;
  long steps_ = 0;
};

template <typename Scalar>
struct TrainState {
  Model<Scalar> model;
  MemoryPool<Scalar> pool;
  Adam<Scalar> optimizer;
  long step = 0;

  TrainState(Model<Scalar> m, MemoryPool<Scalar> p)
      : model(std::move(m)), pool(std::move(p)), optimizer(model.params()) {}

  static TrainState create(const ModelDims& dims, Variant variant, std::uint64_t seed);
};

namespace trainer {

/// Scales gradients so their global L2 norm is at most max_norm; returns the norm before clipping.
template <typename Scalar>
double clip_gradients(ParameterSet<Scalar>& params, double max_norm);

/// Forward/backward over the batch (losses averaged over windows), one
/// clipped Adam step, then the memory update with every query of the batch.
/// Throws if any loss part is not finite.
template <typename Scalar>
LossParts train_step(TrainState<Scalar>& state, std::span<const FrameWindow> batch, const TrainConfig& config);

using StepCallback = std::function<void(long step, int epoch, const LossParts&)>;

/// Shuffled mini-batch epochs over `windows`, deterministic given config.seed.
template <typename Scalar>
void train(TrainState<Scalar>& state, std::span<const FrameWindow> windows, const TrainConfig& config,
           const StepCallback& on_step = {});

struct EvalSettings {
  double gamma = 0.009;
  double lambda = 0.6;
};

struct EvaluationResult {
  std::vector<ScoreSeries> videos;
  std::optional<RocCurve> roc;
  std::optional<double> gap;
  int pool_updates = 0;
  double lambda = 0.0;  // effective lambda (1 without a memory branch)
};

/// Scores every window of every video in order against an in-session copy
/// of `pool`. A frame's scores are recorded first; the copy is then updated
/// with its queries if its regular score passes the gamma gate. Each video
/// is normalized on its own; the ROC pools all labeled frames.
template <typename Scalar>
EvaluationResult evaluate(const Model<Scalar>& model, const MemoryPool<Scalar>& pool,
                          std::span<const LabeledVideo> videos, const EvalSettings& settings);

/// Re-blends stored PSNR/distance series with another lambda and returns the dataset AUC.
std::optional<double> auc_for_lambda(std::span<const ScoreSeries> videos, double lambda);

/// Dataset ROC on 1 - N_t over all labeled frames; nullopt if a class is missing.
std::optional<RocCurve> dataset_roc(std::span<const ScoreSeries> videos);

}  // namespace trainer

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
struct Checkpoint {
  ModelDims dims;
  Variant variant = Variant::lgn_net;
  ParameterSet<Scalar> params;
  MemoryPool<Scalar> pool;
  TrainConfig config;
  long step = 0;
};

template <typename Scalar>
void save_checkpoint(const TrainState<Scalar>& state, const TrainConfig& config, const std::filesystem::path& path);

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

/// Rebuilds a ready-to-evaluate state (fresh optimizer moments).
template <typename Scalar>
TrainState<Scalar> restore(Checkpoint<Scalar> checkpoint);

}  // namespace lgn
