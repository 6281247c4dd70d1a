#pragma once

#include "lgn/backbone.hpp"
#include "lgn/losses.hpp"
#include "lgn/memory.hpp"
#include "lgn/stlstm.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace lgn {

/// lgn_net: ST-LSTM branch + memory branch.
/// lgn_st:  ConvLSTM branch + memory branch, local feature [H, C].
/// loc_net: ConvLSTM branch only.
/// glo_net: memory branch only, decoder sees [F_lat, F_glo].
enum class Variant { lgn_net, lgn_st, loc_net, glo_net };

std::string to_string(Variant v);
Variant parse_variant(const std::string& name);
inline bool has_memory(Variant v) { return v != Variant::loc_net; }
inline bool has_stp(Variant v) { return v != Variant::glo_net; }
inline stlstm::CellKind cell_kind(Variant v) {
  return v == Variant::lgn_net ? stlstm::CellKind::st_lstm : stlstm::CellKind::conv_lstm;
}

template <typename Scalar>
struct PredictionOutput {
  Frame<Scalar> predicted;
  std::optional<QueryGrid<Scalar>> queries;
  std::optional<MatchResult<Scalar>> match;
  FeatureMap<Scalar> f_loc;  // empty for glo_net
  FeatureMap<Scalar> f_glo;  // empty for loc_net
};

/// Tape handles of one forward pass.
template <typename Scalar>
struct ForwardGraph {
  Var predicted;
  Var queries;  // C x K, normalized
  Var f_loc;
  Var f_lat;
  Var f_glo;
  std::optional<MatchResult<Scalar>> match;
};

template <typename Scalar>
struct WindowLoss {
  Var total;
  Var intensity;
  Var compactness;   // invalid without a memory branch
  Var separateness;  // invalid without a memory branch
  ForwardGraph<Scalar> graph;
};

template <typename Scalar>
class Model {
 public:
  Model(const ModelDims& dims, Variant variant, std::uint64_t seed);
  /// Wraps existing parameters (checkpoint load); names must match the variant.
  Model(const ModelDims& dims, Variant variant, ParameterSet<Scalar> params);

  const ModelDims& dims() const { return dims_; }
  Variant variant() const { return variant_; }
  ParameterSet<Scalar>& params() { return params_; }
  const ParameterSet<Scalar>& params() const { return params_; }

  ForwardGraph<Scalar> forward(const Binding<Scalar>& bind, std::span<const Var> frames, Var prototypes,
                               stlstm::StpTrace<Scalar>* trace = nullptr) const;

  /// Forward pass plus the weighted training objective for one window.
  WindowLoss<Scalar> window_loss(const Binding<Scalar>& bind, std::span<const Var> frames, Var target,
                                 Var prototypes, const LossWeights& weights) const;

  PredictionOutput<Scalar> predict_next_frame(std::span<const Frame<Scalar>> inputs,
                                              const MemoryPool<Scalar>& pool) const;

  static ParameterSet<Scalar> make_params(const ModelDims& dims, Variant variant, std::uint64_t seed);

 private:
  ModelDims dims_;
  Variant variant_;
  ParameterSet<Scalar> params_;
};

inline constexpr double kQueryEps = 1e-12;

}  // namespace lgn
