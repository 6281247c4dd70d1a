#pragma once

#include "lgn/layers.hpp"

#include <random>
#include <span>

namespace lgn::backbone {

/// E_loc: frame -> x_t at input/4 resolution with loc_channels channels.
template <typename Scalar>
void add_loc_encoder(ParameterSet<Scalar>& params, const ModelDims& dims, std::mt19937_64& rng);

/// E_glo: n channel-stacked frames -> F_lat at input/8 with feature_dim channels.
template <typename Scalar>
void add_glo_encoder(ParameterSet<Scalar>& params, const ModelDims& dims, std::mt19937_64& rng);

/// Which aligned features feed D_lg.
struct FusionLayout {
  bool loc = true;  // F_loc via a 1x1 conv
  bool glo = true;  // F_glo via a stride-2 deconv
  bool lat = false; // F_lat via its own stride-2 deconv
  int count() const { return int(loc) + int(glo) + int(lat); }
};

/// Alignment layers for the enabled inputs plus D_lg.
template <typename Scalar>
void add_decoder(ParameterSet<Scalar>& params, const ModelDims& dims, FusionLayout layout,
                 std::mt19937_64& rng);

template <typename Scalar>
Var encode_loc(const Binding<Scalar>& bind, const ModelDims& dims, Var frame);

template <typename Scalar>
Var encode_glo(const Binding<Scalar>& bind, const ModelDims& dims, std::span<const Var> frames);

/// Aligns each present feature (invalid Var = absent) to
/// loc_size x loc_size x align_channels, concatenates, and decodes to a frame in [-1, 1].
template <typename Scalar>
Var fuse_and_decode(const Binding<Scalar>& bind, const ModelDims& dims, Var f_loc, Var f_glo,
                    Var f_lat = Var{});

// Value-level entry points.

template <typename Scalar>
FeatureMap<Scalar> encode_loc(const Frame<Scalar>& frame, const ParameterSet<Scalar>& params,
                              const ModelDims& dims);

template <typename Scalar>
FeatureMap<Scalar> encode_glo(std::span<const Frame<Scalar>> frames, const ParameterSet<Scalar>& params,
                              const ModelDims& dims);

template <typename Scalar>
Frame<Scalar> fuse_and_decode(const FeatureMap<Scalar>& f_loc, const FeatureMap<Scalar>& f_glo,
                              const ParameterSet<Scalar>& params, const ModelDims& dims);

}  // namespace lgn::backbone
