#pragma once

#include "lgn/layers.hpp"

#include <random>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace lgn::stlstm {

enum class CellKind { st_lstm, conv_lstm };

/// Registers the kernels of one ST-LSTM cell under `prefix`:
///   x_i x_f x_im x_fm x_c x_m x_o   (input -> gates)
///   h_i h_f h_c h_o                  (hidden -> gates)
///   m_i m_f m_m                      (spatiotemporal memory -> gates)
///   c_o m_o                          (new C / new M -> output gate)
///   w11                              (1x1 over [C, M])
/// plus gate biases b_i b_f b_im b_fm b_c b_m b_o.
template <typename Scalar>
void add_stlstm_cell(ParameterSet<Scalar>& params, const std::string& prefix, int in_channels,
                     int hidden, int kernel, std::mt19937_64& rng);

/// Plain convolutional LSTM cell: x_* and h_* kernels for gates i f c o.
template <typename Scalar>
void add_convlstm_cell(ParameterSet<Scalar>& params, const std::string& prefix, int in_channels,
                       int hidden, int kernel, std::mt19937_64& rng);

template <typename Scalar>
void add_stack(ParameterSet<Scalar>& params, CellKind kind, const ModelDims& dims, std::mt19937_64& rng);

struct CellOutput {
  Var h;
  Var c;
  Var m;  // unused by conv_lstm
};

template <typename Scalar>
CellOutput stlstm_cell(const Binding<Scalar>& bind, const std::string& prefix, Var x, Var h_prev,
                       Var c_prev, Var m_in, int kernel);

template <typename Scalar>
CellOutput convlstm_cell(const Binding<Scalar>& bind, const std::string& prefix, Var x, Var h_prev,
                         Var c_prev, int kernel);

/// Memory maps observed by an instrumented stp_forward run, one per step.
template <typename Scalar>
struct StpTrace {
  std::vector<Matrix<Scalar>> bottom_memory_in;  // M_t^0 fed to layer 1
  std::vector<Matrix<Scalar>> top_memory_out;    // M_t^L emitted by layer L
};

/// Runs the stacked cells over `xs` in time order. For st_lstm the
/// spatiotemporal memory zigzags: upward through the layers within a step,
/// then from the top layer back to the bottom at the next step. Returns
/// [H_t^L, M_t^L] (st_lstm) or [H_t^L, C_t^L] (conv_lstm) at the last step.
template <typename Scalar>
Var stp_forward(const Binding<Scalar>& bind, CellKind kind, const ModelDims& dims, std::span<const Var> xs,
                StpTrace<Scalar>* trace = nullptr);

// Value-level entry points.

template <typename Scalar>
std::tuple<FeatureMap<Scalar>, FeatureMap<Scalar>, FeatureMap<Scalar>> cell_step(
    const FeatureMap<Scalar>& x, const FeatureMap<Scalar>& h_prev, const FeatureMap<Scalar>& c_prev,
    const FeatureMap<Scalar>& m_in, const ParameterSet<Scalar>& params, const std::string& prefix, int kernel);

template <typename Scalar>
FeatureMap<Scalar> stp_forward(std::span<const FeatureMap<Scalar>> xs, const ParameterSet<Scalar>& params,
                               CellKind kind, const ModelDims& dims, StpTrace<Scalar>* trace = nullptr);

inline std::string layer_prefix(int layer) { return "stp." + std::to_string(layer); }

}  // namespace lgn::stlstm
