#include "lgn/model.hpp"

#include <random>
#include <vector>

namespace lgn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::lgn_net: return "lgn_net";
    case Variant::lgn_st: return "lgn_st";
    case Variant::loc_net: return "loc_net";
    case Variant::glo_net: return "glo_net";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::lgn_net, Variant::lgn_st, Variant::loc_net, Variant::glo_net}) {
    if (to_string(v) == name) return v;
  }
  throw UserError("unknown variant '" + name + "' (expected lgn_net, lgn_st, loc_net, glo_net)");
}

template <typename Scalar>
ParameterSet<Scalar> Model<Scalar>::make_params(const ModelDims& dims, Variant variant, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  ParameterSet<Scalar> params;
  if (has_stp(variant)) {
    backbone::add_loc_encoder(params, dims, rng);
    stlstm::add_stack(params, cell_kind(variant), dims, rng);
  }
  if (has_memory(variant)) backbone::add_glo_encoder(params, dims, rng);
  backbone::FusionLayout layout;
  layout.loc = has_stp(variant);
  layout.glo = has_memory(variant);
  layout.lat = variant == Variant::glo_net;
  backbone::add_decoder(params, dims, layout, rng);
  return params;
}

template <typename Scalar>
Model<Scalar>::Model(const ModelDims& dims, Variant variant, std::uint64_t seed)
    : dims_(dims), variant_(variant), params_(make_params(dims, variant, seed)) {}

template <typename Scalar>
Model<Scalar>::Model(const ModelDims& dims, Variant variant, ParameterSet<Scalar> params)
    : dims_(dims), variant_(variant), params_(std::move(params)) {
  const ParameterSet<Scalar> expected = make_params(dims, variant, 0);
  if (expected.names() != params_.names()) {
    throw UserError("parameters do not match variant " + to_string(variant));
  }
  for (const auto& p : expected.items()) {
    const auto& q = params_.at(p.name);
    if (q.value.rows() != p.value.rows() || q.value.cols() != p.value.cols()) {
      throw UserError("parameter " + p.name + " has the wrong shape");
    }
  }
}

template <typename Scalar>
ForwardGraph<Scalar> Model<Scalar>::forward(const Binding<Scalar>& bind, std::span<const Var> frames,
                                            Var prototypes, stlstm::StpTrace<Scalar>* trace) const {
  auto& tape = bind.tape();
  if (int(frames.size()) != dims_.inputs) {
    throw UserError("model expects " + std::to_string(dims_.inputs) + " input frames, got " +
                    std::to_string(frames.size()));
  }
  for (Var f : frames) {
    if (tape.shape(f) != dims_.frame_shape()) {
      throw UserError("input frame " + tape.shape(f).str() + " does not match model input " +
                      dims_.frame_shape().str());
    }
  }
  ForwardGraph<Scalar> g;
  if (has_stp(variant_)) {
    std::vector<Var> xs;
    for (Var f : frames) xs.push_back(backbone::encode_loc(bind, dims_, f));
    g.f_loc = stlstm::stp_forward(bind, cell_kind(variant_), dims_, std::span<const Var>(xs), trace);
  }
  if (has_memory(variant_)) {
    if (!prototypes.valid()) throw UserError(to_string(variant_) + " needs a memory pool");
    g.f_lat = backbone::encode_glo(bind, dims_, frames);
    const Shape lat = tape.shape(g.f_lat);
    g.queries = tape.normalize_cols(tape.reshape(g.f_lat, Shape{lat.channels, 1, lat.pixels()}), Scalar(kQueryEps));
    g.f_glo = tape.reshape(memory::read(tape, g.queries, prototypes), lat);
    QueryGrid<Scalar> q{tape.value(g.queries), lat.height, lat.width};
    MemoryPool<Scalar> pool{tape.value(prototypes)};
    g.match = memory::match(q, pool);
  }
  const Var lat_input = variant_ == Variant::glo_net ? g.f_lat : Var{};
  g.predicted = backbone::fuse_and_decode(bind, dims_, g.f_loc, g.f_glo, lat_input);
  return g;
}

template <typename Scalar>
WindowLoss<Scalar> Model<Scalar>::window_loss(const Binding<Scalar>& bind, std::span<const Var> frames, Var target,
                                              Var prototypes, const LossWeights& weights) const {
  auto& tape = bind.tape();
  WindowLoss<Scalar> out;
  out.graph = forward(bind, frames, prototypes);
  out.intensity = losses::intensity_loss(tape, out.graph.predicted, target);
  out.total = out.intensity;
  if (out.graph.match) {
    const auto& m = *out.graph.match;
    out.compactness = losses::compactness_loss(tape, out.graph.queries, prototypes, m.nearest);
    out.separateness = losses::separateness_loss(tape, out.graph.queries, prototypes, m.nearest, m.second,
                                                 weights.alpha);
    out.total = tape.add(out.total, tape.scale(out.compactness, Scalar(weights.lambda_c)));
    out.total = tape.add(out.total, tape.scale(out.separateness, Scalar(weights.lambda_s)));
  }
  return out;
}

template <typename Scalar>
PredictionOutput<Scalar> Model<Scalar>::predict_next_frame(std::span<const Frame<Scalar>> inputs,
                                                           const MemoryPool<Scalar>& pool) const {
  Tape<Scalar> tape;
  Binding<Scalar> bind(tape, params_);
  std::vector<Var> frames;
  for (const auto& f : inputs) frames.push_back(tape.constant(f));
  Var prototypes;
  if (has_memory(variant_)) {
    if (pool.dim() != dims_.feature_dim) {
      throw UserError("memory pool dimension " + std::to_string(pool.dim()) + " != model feature dimension " +
                      std::to_string(dims_.feature_dim));
    }
    prototypes = tape.constant(pool.prototypes, Shape{pool.dim(), 1, pool.size()});
  }
  ForwardGraph<Scalar> g = forward(bind, std::span<const Var>(frames), prototypes);

  PredictionOutput<Scalar> out;
  out.predicted = tape.tensor(g.predicted);
  if (g.f_loc.valid()) out.f_loc = tape.tensor(g.f_loc);
  if (g.f_glo.valid()) {
    out.f_glo = tape.tensor(g.f_glo);
    const Shape lat = tape.shape(g.f_lat);
    out.queries = QueryGrid<Scalar>{tape.value(g.queries), lat.height, lat.width};
    out.match = g.match;
  }
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace lgn
