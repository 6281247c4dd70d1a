#include "lgn/backbone.hpp"

#include <vector>

namespace lgn {

void ModelDims::validate() const {
  if (input_size <= 0 || input_size % 8 != 0) {
    throw UserError("input size " + std::to_string(input_size) + " must be a positive multiple of 8");
  }
  if (channels < 1 || inputs < 1 || layers < 1) throw UserError("channels, inputs and layers must be >= 1");
  if (cell_kernel < 1 || cell_kernel % 2 == 0) throw UserError("cell kernel must be odd");
  if (memory_size < 2) throw UserError("memory size must be >= 2");
  for (int w : {loc_mid, loc_channels, hidden, feature_dim, align_channels}) {
    if (w < 1) throw UserError("layer widths must be >= 1");
  }
}

ModelDims ModelDims::toy() {
  ModelDims d;
  d.input_size = 16;
  d.loc_mid = 4;
  d.loc_channels = 8;
  d.hidden = 8;
  d.layers = 2;
  d.cell_kernel = 3;
  d.glo_widths = {4, 8, 8};
  d.feature_dim = 16;
  d.memory_size = 4;
  d.align_channels = 8;
  d.decoder_widths = {8, 6, 4};
  return d;
}

ModelDims ModelDims::synthetic() {
  ModelDims d;
  d.input_size = 64;
  d.loc_mid = 16;
  d.loc_channels = 16;
  d.hidden = 16;
  d.layers = 4;
  d.cell_kernel = 3;
  d.glo_widths = {16, 32, 32};
  d.feature_dim = 32;
  d.memory_size = 10;
  d.align_channels = 32;
  d.decoder_widths = {32, 16, 16};
  return d;
}

namespace backbone {

template <typename Scalar>
void add_loc_encoder(ParameterSet<Scalar>& params, const ModelDims& dims, std::mt19937_64& rng) {
  add_conv(params, "e_loc.0", dims.channels, dims.loc_mid, 3, rng);
  add_conv(params, "e_loc.1", dims.loc_mid, dims.loc_channels, 3, rng);
}

template <typename Scalar>
void add_glo_encoder(ParameterSet<Scalar>& params, const ModelDims& dims, std::mt19937_64& rng) {
  const auto& w = dims.glo_widths;
  add_conv(params, "e_glo.0", dims.inputs * dims.channels, w[0], 3, rng);
  add_conv(params, "e_glo.1", w[0], w[1], 3, rng);
  add_conv(params, "e_glo.2", w[1], w[2], 3, rng);
  add_conv(params, "e_glo.3", w[2], dims.feature_dim, 3, rng);
}

template <typename Scalar>
void add_decoder(ParameterSet<Scalar>& params, const ModelDims& dims, FusionLayout layout,
                 std::mt19937_64& rng) {
  const int a = dims.align_channels;
  if (layout.loc) add_conv(params, "align.loc", 2 * dims.hidden, a, 1, rng);
  if (layout.glo) add_deconv(params, "align.glo", dims.feature_dim, a, 4, 2, rng);
  if (layout.lat) add_deconv(params, "align.lat", dims.feature_dim, a, 4, 2, rng);
  const auto& w = dims.decoder_widths;
  add_deconv(params, "dec.0", layout.count() * a, w[0], 3, 1, rng);
  add_deconv(params, "dec.1", w[0], w[1], 4, 2, rng);
  add_deconv(params, "dec.2", w[1], w[2], 4, 2, rng);
  add_conv(params, "dec.out", w[2], dims.channels, 3, rng);
}

template <typename Scalar>
Var encode_loc(const Binding<Scalar>& bind, const ModelDims& dims, Var frame) {
  auto& tape = bind.tape();
  const Shape s = tape.shape(frame);
  if (s.height % 4 != 0 || s.width % 4 != 0) {
    throw UserError("E_loc input " + s.str() + " is not divisible by 4");
  }
  if (s.channels != dims.channels) throw UserError("E_loc expects " + std::to_string(dims.channels) + " channels");
  Var h = tape.silu(conv(bind, "e_loc.0", frame, kDown));
  return tape.silu(conv(bind, "e_loc.1", h, kDown));
}

template <typename Scalar>
Var encode_glo(const Binding<Scalar>& bind, const ModelDims& dims, std::span<const Var> frames) {
  auto& tape = bind.tape();
  if (int(frames.size()) != dims.inputs) {
    throw UserError("E_glo expects " + std::to_string(dims.inputs) + " frames, got " +
                    std::to_string(frames.size()));
  }
  const Shape s = tape.shape(frames.front());
  if (s.height % 8 != 0 || s.width % 8 != 0) {
    throw UserError("E_glo input " + s.str() + " is not divisible by 8");
  }
  Var x = tape.concat(std::vector<Var>(frames.begin(), frames.end()));
  x = tape.silu(conv(bind, "e_glo.0", x, kDown));
  x = tape.silu(conv(bind, "e_glo.1", x, kDown));
  x = tape.silu(conv(bind, "e_glo.2", x, kDown));
  return conv(bind, "e_glo.3", x, kSame3);
}

template <typename Scalar>
Var fuse_and_decode(const Binding<Scalar>& bind, const ModelDims& dims, Var f_loc, Var f_glo, Var f_lat) {
  auto& tape = bind.tape();
  const int side = dims.loc_size();
  std::vector<Var> aligned;
  auto check = [&](Var v, const char* what) {
    const Shape s = tape.shape(v);
    if (s.height != side || s.width != side) {
      throw UserError(std::string("aligned ") + what + " is " + s.str() + ", expected " +
                      std::to_string(side) + "x" + std::to_string(side));
    }
    aligned.push_back(v);
  };
  if (f_loc.valid()) check(tape.silu(conv(bind, "align.loc", f_loc, kPointwise)), "F_loc");
  if (f_lat.valid()) check(tape.silu(deconv(bind, "align.lat", f_lat, kUp, 2 * tape.shape(f_lat).height)), "F_lat");
  if (f_glo.valid()) check(tape.silu(deconv(bind, "align.glo", f_glo, kUp, 2 * tape.shape(f_glo).height)), "F_glo");
  if (aligned.empty()) throw UserError("decoder needs at least one feature map");

  Var x = tape.concat(aligned);
  x = tape.silu(deconv(bind, "dec.0", x, kSame3, side));
  x = tape.silu(deconv(bind, "dec.1", x, kUp, 2 * side));
  x = tape.silu(deconv(bind, "dec.2", x, kUp, 4 * side));
  return tape.tanh(conv(bind, "dec.out", x, kSame3));
}

template <typename Scalar>
FeatureMap<Scalar> encode_loc(const Frame<Scalar>& frame, const ParameterSet<Scalar>& params,
                              const ModelDims& dims) {
  Tape<Scalar> tape;
  Binding<Scalar> bind(tape, params);
  return tape.tensor(encode_loc(bind, dims, tape.constant(frame)));
}

template <typename Scalar>
FeatureMap<Scalar> encode_glo(std::span<const Frame<Scalar>> frames, const ParameterSet<Scalar>& params,
                              const ModelDims& dims) {
  Tape<Scalar> tape;
  Binding<Scalar> bind(tape, params);
  std::vector<Var> vars;
  for (const auto& f : frames) vars.push_back(tape.constant(f));
  return tape.tensor(encode_glo(bind, dims, std::span<const Var>(vars)));
}

template <typename Scalar>
Frame<Scalar> fuse_and_decode(const FeatureMap<Scalar>& f_loc, const FeatureMap<Scalar>& f_glo,
                              const ParameterSet<Scalar>& params, const ModelDims& dims) {
  Tape<Scalar> tape;
  Binding<Scalar> bind(tape, params);
  return tape.tensor(fuse_and_decode(bind, dims, tape.constant(f_loc), tape.constant(f_glo)));
}

#define LGN_INSTANTIATE(S)                                                                          \
  template void add_loc_encoder<S>(ParameterSet<S>&, const ModelDims&, std::mt19937_64&);          \
  template void add_glo_encoder<S>(ParameterSet<S>&, const ModelDims&, std::mt19937_64&);          \
  template void add_decoder<S>(ParameterSet<S>&, const ModelDims&, FusionLayout, std::mt19937_64&); \
  template Var encode_loc<S>(const Binding<S>&, const ModelDims&, Var);                             \
  template Var encode_glo<S>(const Binding<S>&, const ModelDims&, std::span<const Var>);            \
  template Var fuse_and_decode<S>(const Binding<S>&, const ModelDims&, Var, Var, Var);              \
  template FeatureMap<S> encode_loc<S>(const Frame<S>&, const ParameterSet<S>&, const ModelDims&);  \
  template FeatureMap<S> encode_glo<S>(std::span<const Frame<S>>, const ParameterSet<S>&,           \
                                       const ModelDims&);                                           \
  template Frame<S> fuse_and_decode<S>(const FeatureMap<S>&, const FeatureMap<S>&,                  \
                                       const ParameterSet<S>&, const ModelDims&);

LGN_INSTANTIATE(float)
LGN_INSTANTIATE(double)
#undef LGN_INSTANTIATE

}  // namespace backbone
}  // namespace lgn
