#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lgn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raised for inputs a caller can fix (bad shapes, bad config, missing files).
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  int pixels() const { return height * width; }
  std::int64_t size() const { return std::int64_t(channels) * pixels(); }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }
};

/// A dense channels x (height*width) grid. Column index is y*width + x, so
/// all channels of one pixel are contiguous.
template <typename Scalar>
struct Tensor3 {
  Shape shape;
  Matrix<Scalar> data;

  Tensor3() = default;
  explicit Tensor3(Shape s) : shape(s), data(Matrix<Scalar>::Zero(s.channels, s.pixels())) {}
  Tensor3(Shape s, Matrix<Scalar> values) : shape(s), data(std::move(values)) {
    if (data.rows() != s.channels || data.cols() != s.pixels()) {
      throw UserError("tensor data does not match shape " + s.str());
    }
  }

  Scalar& operator()(int c, int y, int x) { return data(c, y * shape.width + x); }
  Scalar operator()(int c, int y, int x) const { return data(c, y * shape.width + x); }

  template <typename Other>
  Tensor3<Other> cast() const {
    return Tensor3<Other>(shape, data.template cast<Other>());
  }
};

template <typename Scalar>
using FeatureMap = Tensor3<Scalar>;

/// Video frame with pixel values in [-1, 1].
template <typename Scalar>
using Frame = Tensor3<Scalar>;

struct ConvGeometry {
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

/// Unfolds kernel patches into columns: (C*k*k) x (Hout*Wout), rows ordered
/// (channel, ky, kx). Out-of-image taps read zero.
template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& image, Shape shape, ConvGeometry g);

/// Adjoint of im2col: scatters columns back onto an image of `shape`.
template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& cols, Shape shape, ConvGeometry g);

/// Maps [-1, 1] pixels to [0, 1].
template <typename Scalar>
Tensor3<Scalar> to_unit_range(const Tensor3<Scalar>& frame) {
  return Tensor3<Scalar>(frame.shape, ((frame.data.array() + Scalar(1)) * Scalar(0.5)).matrix());
}

}  // namespace lgn
