#pragma once

#include "lgn/tape.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace lgn::testing {

inline Matrix<double> random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

inline Tensor3<double> random_tensor(Shape s, std::mt19937_64& rng, double scale = 1.0) {
  return Tensor3<double>(s, random_matrix(s.channels, s.pixels(), rng, scale));
}

inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

struct GradReport {
  double max_rel = 0.0;
  std::string worst;
  int checked = 0;
};

/// Compares analytic gradients of a scalar root against central differences.
/// `build` records the graph on a fresh tape from the given leaves; at most
/// `samples` entries per leaf are probed.
using GraphBuilder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

inline GradReport check_input_grads(std::vector<Matrix<double>*> inputs, const std::vector<Shape>& shapes,
                                    const GraphBuilder& build, int samples = 8, double h = 1e-5,
                                    std::uint64_t seed = 7) {
  std::vector<Matrix<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(tape.variable(*inputs[i], shapes[i]));
    tape.backward(build(tape, leaves));
    for (Var v : leaves) {
      analytic.push_back(tape.grad(v).size() ? tape.grad(v) : Matrix<double>::Zero(tape.value(v).rows(), tape.value(v).cols()));
    }
  }
  auto eval = [&]() {
    Tape<double> tape;
    std::vector<Var> leaves;
    for (std::size_t i = 0; i < inputs.size(); ++i) leaves.push_back(tape.constant(*inputs[i], shapes[i]));
    return tape.scalar(build(tape, leaves));
  };
  std::mt19937_64 rng(seed);
  GradReport report;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Matrix<double>& m = *inputs[i];
    std::uniform_int_distribution<Eigen::Index> pick(0, m.size() - 1);
    const int n = int(std::min<Eigen::Index>(samples, m.size()));
    for (int s = 0; s < n; ++s) {
      const Eigen::Index j = m.size() <= samples ? s : pick(rng);
      const double keep = m.data()[j];
      m.data()[j] = keep + h;
      const double up = eval();
      m.data()[j] = keep - h;
      const double down = eval();
      m.data()[j] = keep;
      const double numeric = (up - down) / (2 * h);
      const double err = rel_error(analytic[i].data()[j], numeric);
      ++report.checked;
      if (err > report.max_rel) {
        report.max_rel = err;
        report.worst = "input " + std::to_string(i) + "[" + std::to_string(j) + "] analytic " +
                       std::to_string(analytic[i].data()[j]) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return report;
}

using ParamBuilder = std::function<Var(Tape<double>&, ParameterSet<double>&)>;

/// Same for every tensor of a ParameterSet. The builder must bind parameters
/// through the set it is given.
inline GradReport check_param_grads(ParameterSet<double>& params, const ParamBuilder& build, int samples = 4,
                                    double h = 1e-5, std::uint64_t seed = 11) {
  {
    Tape<double> tape;
    params.zero_grad();
    tape.backward(build(tape, params));
  }
  std::vector<Matrix<double>> analytic;
  for (const auto& p : params.items()) analytic.push_back(p.grad);
  auto eval = [&]() {
    Tape<double> tape;
    return tape.scalar(build(tape, params));
  };
  std::mt19937_64 rng(seed);
  GradReport report;
  std::size_t idx = 0;
  for (auto& p : params.items()) {
    Matrix<double>& m = p.value;
    std::uniform_int_distribution<Eigen::Index> pick(0, m.size() - 1);
    const int n = int(std::min<Eigen::Index>(samples, m.size()));
    for (int s = 0; s < n; ++s) {
      const Eigen::Index j = m.size() <= samples ? s : pick(rng);
      const double keep = m.data()[j];
      m.data()[j] = keep + h;
      const double up = eval();
      m.data()[j] = keep - h;
      const double down = eval();
      m.data()[j] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[idx].size() ? analytic[idx].data()[j] : 0.0;
      const double err = rel_error(a, numeric);
      ++report.checked;
      if (err > report.max_rel) {
        report.max_rel = err;
        report.worst = p.name + "[" + std::to_string(j) + "] analytic " + std::to_string(a) + " numeric " +
                       std::to_string(numeric);
      }
    }
    ++idx;
  }
  return report;
}

// Direct-loop convolution, weight Cout x (Cin*k*k) with rows ordered (c, ky, kx).
inline Tensor3<double> naive_conv(const Tensor3<double>& in, const Matrix<double>& w, const Matrix<double>& b,
                           ConvGeometry g) {
  const int k = g.kernel;
  const int oh = g.out_size(in.shape.height), ow = g.out_size(in.shape.width);
  Tensor3<double> out(Shape{int(w.rows()), oh, ow});
  for (int o = 0; o < w.rows(); ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double acc = b.size() ? b(o, 0) : 0.0;
        for (int c = 0; c < in.shape.channels; ++c)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = y * g.stride - g.pad + ky, ix = x * g.stride - g.pad + kx;
              if (iy < 0 || ix < 0 || iy >= in.shape.height || ix >= in.shape.width) continue;
              acc += w(o, (c * k + ky) * k + kx) * in(c, iy, ix);
            }
        out(o, y, x) = acc;
      }
  return out;
}

// Scatter form of the transposed convolution, weight (Cout*k*k) x Cin.
inline Tensor3<double> naive_deconv(const Tensor3<double>& in, const Matrix<double>& w, const Matrix<double>& b,
                             ConvGeometry g, int oh, int ow) {
  const int k = g.kernel;
  const int cout = int(w.rows()) / (k * k);
  Tensor3<double> out(Shape{cout, oh, ow});
  for (int o = 0; o < cout; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) out(o, y, x) = b(o, 0);
  for (int c = 0; c < in.shape.channels; ++c)
    for (int iy = 0; iy < in.shape.height; ++iy)
      for (int ix = 0; ix < in.shape.width; ++ix)
        for (int o = 0; o < cout; ++o)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int y = iy * g.stride - g.pad + ky, x = ix * g.stride - g.pad + kx;
              if (y < 0 || x < 0 || y >= oh || x >= ow) continue;
              out(o, y, x) += w((o * k + ky) * k + kx, c) * in(c, iy, ix);
            }
  return out;
}


/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lgn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace lgn::testing
