#include "lgn/stlstm.hpp"

namespace lgn::stlstm {

namespace {

template <typename Scalar>
void add_kernel(ParameterSet<Scalar>& params, const std::string& name, int in, int out, int kernel,
                std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(in * kernel * kernel)));
  Matrix<Scalar> w(out, in * kernel * kernel);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(dist(rng));
  params.add(name, std::move(w));
}

template <typename Scalar>
Var stacked(const Binding<Scalar>& bind, const std::string& prefix, std::initializer_list<const char*> names) {
  std::vector<Var> parts;
  for (const char* n : names) parts.push_back(bind(prefix + "." + n));
  return bind.tape().concat(parts);
}

ConvGeometry same(int kernel) { return {kernel, 1, kernel / 2}; }

}  // namespace

template <typename Scalar>
void add_stlstm_cell(ParameterSet<Scalar>& params, const std::string& prefix, int in_channels, int hidden,
                     int kernel, std::mt19937_64& rng) {
  for (const char* g : {"x_i", "x_f", "x_im", "x_fm", "x_c", "x_m", "x_o"}) {
    add_kernel(params, prefix + "." + g, in_channels, hidden, kernel, rng);
  }
  for (const char* g : {"h_i", "h_f", "h_c", "h_o"}) add_kernel(params, prefix + "." + g, hidden, hidden, kernel, rng);
  for (const char* g : {"m_i", "m_f", "m_m"}) add_kernel(params, prefix + "." + g, hidden, hidden, kernel, rng);
  add_kernel(params, prefix + ".c_o", hidden, hidden, kernel, rng);
  add_kernel(params, prefix + ".m_o", hidden, hidden, kernel, rng);
  add_kernel(params, prefix + ".w11", 2 * hidden, hidden, 1, rng);
  for (const char* b : {"b_i", "b_f", "b_im", "b_fm", "b_c", "b_m", "b_o"}) {
    params.add(prefix + "." + b, Matrix<Scalar>::Zero(hidden, 1));
  }
}

template <typename Scalar>
void add_convlstm_cell(ParameterSet<Scalar>& params, const std::string& prefix, int in_channels, int hidden,
                       int kernel, std::mt19937_64& rng) {
  for (const char* g : {"x_i", "x_f", "x_c", "x_o"}) add_kernel(params, prefix + "." + g, in_channels, hidden, kernel, rng);
  for (const char* g : {"h_i", "h_f", "h_c", "h_o"}) add_kernel(params, prefix + "." + g, hidden, hidden, kernel, rng);
  for (const char* b : {"b_i", "b_f", "b_c", "b_o"}) params.add(prefix + "." + b, Matrix<Scalar>::Zero(hidden, 1));
}

template <typename Scalar>
void add_stack(ParameterSet<Scalar>& params, CellKind kind, const ModelDims& dims, std::mt19937_64& rng) {
  for (int l = 0; l < dims.layers; ++l) {
    const int in = l == 0 ? dims.loc_channels : dims.hidden;
    if (kind == CellKind::st_lstm) {
      add_stlstm_cell(params, layer_prefix(l), in, dims.hidden, dims.cell_kernel, rng);
    } else {
      add_convlstm_cell(params, layer_prefix(l), in, dims.hidden, dims.cell_kernel, rng);
    }
  }
}

template <typename Scalar>
CellOutput stlstm_cell(const Binding<Scalar>& bind, const std::string& prefix, Var x, Var h_prev, Var c_prev,
                       Var m_in, int kernel) {
  auto& t = bind.tape();
  const Shape hs = t.shape(h_prev);
  if (t.shape(c_prev) != hs || t.shape(m_in) != hs) {
    throw UserError("ST-LSTM state shapes differ: " + hs.str() + ", " + t.shape(c_prev).str() + ", " +
                    t.shape(m_in).str());
  }
  if (t.shape(x).height != hs.height || t.shape(x).width != hs.width) {
    throw UserError("ST-LSTM input " + t.shape(x).str() + " not aligned with state " + hs.str());
  }
  const int ch = hs.channels;
  const ConvGeometry g = same(kernel);

  Var bias = stacked(bind, prefix, {"b_i", "b_f", "b_im", "b_fm", "b_c", "b_m", "b_o"});
  Var xg = t.conv2d(x, stacked(bind, prefix, {"x_i", "x_f", "x_im", "x_fm", "x_c", "x_m", "x_o"}), bias, g);
  Var hg = t.conv2d(h_prev, stacked(bind, prefix, {"h_i", "h_f", "h_c", "h_o"}), Var{}, g);
  Var mg = t.conv2d(m_in, stacked(bind, prefix, {"m_i", "m_f", "m_m"}), Var{}, g);
  auto xs = [&](int k) { return t.slice(xg, k * ch, ch); };
  auto hs_ = [&](int k) { return t.slice(hg, k * ch, ch); };
  auto ms = [&](int k) { return t.slice(mg, k * ch, ch); };

  Var i = t.sigmoid(t.add(xs(0), hs_(0)));
  Var f = t.sigmoid(t.add(xs(1), hs_(1)));
  Var i_m = t.sigmoid(t.add(xs(2), ms(0)));
  Var f_m = t.sigmoid(t.add(xs(3), ms(1)));
  Var c = t.add(t.mul(f, c_prev), t.mul(i, t.tanh(t.add(xs(4), hs_(2)))));
  Var m = t.add(t.mul(f_m, m_in), t.mul(i_m, t.tanh(t.add(xs(5), ms(2)))));
  Var o_pre = t.add(t.add(xs(6), hs_(3)), t.conv2d(c, bind(prefix + ".c_o"), Var{}, g));
  Var o = t.sigmoid(t.add(o_pre, t.conv2d(m, bind(prefix + ".m_o"), Var{}, g)));
  Var h = t.mul(o, t.tanh(t.conv2d(t.concat({c, m}), bind(prefix + ".w11"), Var{}, kPointwise)));
  return {h, c, m};
}

template <typename Scalar>
CellOutput convlstm_cell(const Binding<Scalar>& bind, const std::string& prefix, Var x, Var h_prev, Var c_prev,
                         int kernel) {
  auto& t = bind.tape();
  const Shape hs = t.shape(h_prev);
  if (t.shape(c_prev) != hs) throw UserError("ConvLSTM state shapes differ");
  const int ch = hs.channels;
  const ConvGeometry g = same(kernel);
  Var bias = stacked(bind, prefix, {"b_i", "b_f", "b_c", "b_o"});
  Var xg = t.conv2d(x, stacked(bind, prefix, {"x_i", "x_f", "x_c", "x_o"}), bias, g);
  Var hg = t.conv2d(h_prev, stacked(bind, prefix, {"h_i", "h_f", "h_c", "h_o"}), Var{}, g);
  Var gates = t.add(xg, hg);
  Var i = t.sigmoid(t.slice(gates, 0, ch));
  Var f = t.sigmoid(t.slice(gates, ch, ch));
  Var cand = t.tanh(t.slice(gates, 2 * ch, ch));
  Var o = t.sigmoid(t.slice(gates, 3 * ch, ch));
  Var c = t.add(t.mul(f, c_prev), t.mul(i, cand));
  Var h = t.mul(o, t.tanh(c));
  return {h, c, Var{}};
}

template <typename Scalar>
Var stp_forward(const Binding<Scalar>& bind, CellKind kind, const ModelDims& dims, std::span<const Var> xs,
                StpTrace<Scalar>* trace) {
  if (xs.empty()) throw UserError("STP-Net needs at least one input step");
  auto& t = bind.tape();
  const Shape first = t.shape(xs.front());
  const Shape state{dims.hidden, first.height, first.width};
  const Var zero = t.constant(Matrix<Scalar>::Zero(state.channels, state.pixels()), state);

  std::vector<Var> h(dims.layers, zero);
  std::vector<Var> c(dims.layers, zero);
  Var m = zero;  // carried from the top layer of the previous step
  for (Var x : xs) {
    if (t.shape(x) != first) throw UserError("STP-Net inputs change shape across steps");
    if (trace) trace->bottom_memory_in.push_back(t.value(m));
    Var input = x;
    for (int l = 0; l < dims.layers; ++l) {
      const std::string prefix = layer_prefix(l);
      CellOutput out = kind == CellKind::st_lstm
                           ? stlstm_cell(bind, prefix, input, h[l], c[l], m, dims.cell_kernel)
                           : convlstm_cell(bind, prefix, input, h[l], c[l], dims.cell_kernel);
      h[l] = out.h;
      c[l] = out.c;
      if (kind == CellKind::st_lstm) m = out.m;
      input = out.h;
    }
    if (trace) trace->top_memory_out.push_back(t.value(m));
  }
  const int top = dims.layers - 1;
  return t.concat({h[top], kind == CellKind::st_lstm ? m : c[top]});
}

template <typename Scalar>
std::tuple<FeatureMap<Scalar>, FeatureMap<Scalar>, FeatureMap<Scalar>> cell_step(
    const FeatureMap<Scalar>& x, const FeatureMap<Scalar>& h_prev, const FeatureMap<Scalar>& c_prev,
    const FeatureMap<Scalar>& m_in, const ParameterSet<Scalar>& params, const std::string& prefix, int kernel) {
  Tape<Scalar> tape;
  Binding<Scalar> bind(tape, params);
  CellOutput out = stlstm_cell(bind, prefix, tape.constant(x), tape.constant(h_prev), tape.constant(c_prev),
                               tape.constant(m_in), kernel);
  return {tape.tensor(out.h), tape.tensor(out.c), tape.tensor(out.m)};
}

template <typename Scalar>
FeatureMap<Scalar> stp_forward(std::span<const FeatureMap<Scalar>> xs, const ParameterSet<Scalar>& params,
                               CellKind kind, const ModelDims& dims, StpTrace<Scalar>* trace) {
  Tape<Scalar> tape;
  Binding<Scalar> bind(tape, params);
  std::vector<Var> vars;
  for (const auto& x : xs) vars.push_back(tape.constant(x));
  return tape.tensor(stp_forward(bind, kind, dims, std::span<const Var>(vars), trace));
}

#define LGN_INSTANTIATE(S)                                                                                  \
  template void add_stlstm_cell<S>(ParameterSet<S>&, const std::string&, int, int, int, std::mt19937_64&); \
  template void add_convlstm_cell<S>(ParameterSet<S>&, const std::string&, int, int, int,                  \
                                     std::mt19937_64&);                                                    \
  template void add_stack<S>(ParameterSet<S>&, CellKind, const ModelDims&, std::mt19937_64&);              \
  template CellOutput stlstm_cell<S>(const Binding<S>&, const std::string&, Var, Var, Var, Var, int);       \
  template CellOutput convlstm_cell<S>(const Binding<S>&, const std::string&, Var, Var, Var, int);          \
  template Var stp_forward<S>(const Binding<S>&, CellKind, const ModelDims&, std::span<const Var>,          \
                              StpTrace<S>*);                                                                \
  template std::tuple<FeatureMap<S>, FeatureMap<S>, FeatureMap<S>> cell_step<S>(                            \
      const FeatureMap<S>&, const FeatureMap<S>&, const FeatureMap<S>&, const FeatureMap<S>&,               \
      const ParameterSet<S>&, const std::string&, int);                                                     \
  template FeatureMap<S> stp_forward<S>(std::span<const FeatureMap<S>>, const ParameterSet<S>&, CellKind,   \
                                        const ModelDims&, StpTrace<S>*);

LGN_INSTANTIATE(float)
LGN_INSTANTIATE(double)
#undef LGN_INSTANTIATE

}  // namespace lgn::stlstm
