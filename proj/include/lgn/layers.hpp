#pragma once

#include "lgn/tape.hpp"

#include <array>
#include <random>
#include <string>

namespace lgn {

/// Layer widths and sizes of the whole network. The defaults are the
/// full-resolution configuration (256 px input, 64x64x128 local features,
/// 32x32x512 latent features).
struct ModelDims {
  int input_size = 256;
  int channels = 3;
  int inputs = 4;  // n, frames per window
  int loc_mid = 64;
  int loc_channels = 128;
  int hidden = 128;  // c_h
  int layers = 4;
  int cell_kernel = 5;
  std::array<int, 3> glo_widths{64, 128, 256};
  int feature_dim = 512;  // C
  int memory_size = 10;   // I
  int align_channels = 256;
  std::array<int, 3> decoder_widths{256, 128, 64};

  int loc_size() const { return input_size / 4; }
  int lat_size() const { return input_size / 8; }
  Shape frame_shape() const { return {channels, input_size, input_size}; }

  /// Throws UserError on sizes the stacks cannot represent.
  void validate() const;

  /// 16x16 configuration used by the end-to-end gradient checks.
  static ModelDims toy();
  /// 64x64 configuration used for the synthetic dataset.
  static ModelDims synthetic();
};

/// Resolves parameter names to tape leaves, either tracked (training,
/// gradient checks) or frozen (inference).
template <typename Scalar>
class Binding {
 public:
  Binding(Tape<Scalar>& tape, ParameterSet<Scalar>& params)
      : tape_(tape), params_(params), mutable_(&params) {}
  Binding(Tape<Scalar>& tape, const ParameterSet<Scalar>& params)
      : tape_(tape), params_(params), mutable_(nullptr) {}

  Var operator()(const std::string& name) const {
    return mutable_ ? tape_.parameter(mutable_->at(name)) : tape_.frozen(params_.at(name));
  }
  Tape<Scalar>& tape() const { return tape_; }
  const ParameterSet<Scalar>& params() const { return params_; }
  bool tracking() const { return mutable_ != nullptr; }

 private:
  Tape<Scalar>& tape_;
  const ParameterSet<Scalar>& params_;
  ParameterSet<Scalar>* mutable_;
};

/// Fan-in scaled normal init for a Cout x (Cin*k*k) convolution plus a zero bias.
template <typename Scalar>
void add_conv(ParameterSet<Scalar>& params, const std::string& name, int in, int out, int kernel,
              std::mt19937_64& rng) {
  const int fan_in = in * kernel * kernel;
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(fan_in)));
  Matrix<Scalar> w(out, fan_in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(dist(rng));
  params.add(name + ".w", std::move(w));
  params.add(name + ".b", Matrix<Scalar>::Zero(out, 1));
}

/// Same for a transposed convolution, weight (Cout*k*k) x Cin.
template <typename Scalar>
void add_deconv(ParameterSet<Scalar>& params, const std::string& name, int in, int out, int kernel,
                int stride, std::mt19937_64& rng) {
  const double taps = double(kernel * kernel) / double(stride * stride);
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(in * taps));
  Matrix<Scalar> w(out * kernel * kernel, in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = Scalar(dist(rng));
  params.add(name + ".w", std::move(w));
  params.add(name + ".b", Matrix<Scalar>::Zero(out, 1));
}

template <typename Scalar>
Var conv(const Binding<Scalar>& bind, const std::string& name, Var x, ConvGeometry g) {
  return bind.tape().conv2d(x, bind(name + ".w"), bind(name + ".b"), g);
}

template <typename Scalar>
Var deconv(const Binding<Scalar>& bind, const std::string& name, Var x, ConvGeometry g, int out_size) {
  return bind.tape().deconv2d(x, bind(name + ".w"), bind(name + ".b"), g, out_size, out_size);
}

inline constexpr ConvGeometry kDown{3, 2, 1};
inline constexpr ConvGeometry kSame3{3, 1, 1};
inline constexpr ConvGeometry kUp{4, 2, 1};
inline constexpr ConvGeometry kPointwise{1, 1, 0};

}  // namespace lgn
