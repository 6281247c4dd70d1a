#include "lgn/tensor.hpp"

namespace lgn {

template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& image, Shape shape, ConvGeometry g) {
  const int out_h = g.out_size(shape.height);
  const int out_w = g.out_size(shape.width);
  const int k = g.kernel;
  Matrix<Scalar> cols(shape.channels * k * k, out_h * out_w);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      Scalar* col = cols.col(oy * out_w + ox).data();
      const int y0 = oy * g.stride - g.pad;
      const int x0 = ox * g.stride - g.pad;
      int row = 0;
      for (int c = 0; c < shape.channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          const int y = y0 + ky;
          for (int kx = 0; kx < k; ++kx, ++row) {
            const int x = x0 + kx;
            col[row] = (y >= 0 && y < shape.height && x >= 0 && x < shape.width)
                           ? image(c, y * shape.width + x)
                           : Scalar(0);
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& cols, Shape shape, ConvGeometry g) {
  const int out_h = g.out_size(shape.height);
  const int out_w = g.out_size(shape.width);
  const int k = g.kernel;
  if (cols.rows() != shape.channels * k * k || cols.cols() != out_h * out_w) {
    throw UserError("col2im: column matrix does not match image " + shape.str());
  }
  Matrix<Scalar> image = Matrix<Scalar>::Zero(shape.channels, shape.pixels());
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const Scalar* col = cols.col(oy * out_w + ox).data();
      const int y0 = oy * g.stride - g.pad;
      const int x0 = ox * g.stride - g.pad;
      int row = 0;
      for (int c = 0; c < shape.channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          const int y = y0 + ky;
          for (int kx = 0; kx < k; ++kx, ++row) {
            const int x = x0 + kx;
            if (y >= 0 && y < shape.height && x >= 0 && x < shape.width) {
              image(c, y * shape.width + x) += col[row];
            }
          }
        }
      }
    }
  }
  return image;
}

template Matrix<float> im2col(const Matrix<float>&, Shape, ConvGeometry);
template Matrix<double> im2col(const Matrix<double>&, Shape, ConvGeometry);
template Matrix<float> col2im(const Matrix<float>&, Shape, ConvGeometry);
template Matrix<double> col2im(const Matrix<double>&, Shape, ConvGeometry);

}  // namespace lgn
