#pragma once

#include "lgn/tensor.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <string>
#include <vector>

namespace lgn {

template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
};

/// Named learnable weights. Insertion order is the canonical order used by
/// the optimizer and by checkpoints.
template <typename Scalar>
class ParameterSet {
 public:
  Parameter<Scalar>& add(const std::string& name, Matrix<Scalar> value);
  Parameter<Scalar>& at(const std::string& name);
  const Parameter<Scalar>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Parameter<Scalar>>& items() { return items_; }
  const std::deque<Parameter<Scalar>>& items() const { return items_; }
  std::vector<std::string> names() const;
  std::int64_t scalar_count() const;
  void zero_grad();

 private:
  std::deque<Parameter<Scalar>> items_;
  std::map<std::string, std::size_t> index_;
};

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation tape. Every op records its output value and a
/// closure that pushes the output gradient back to its inputs. Matrices that
/// are not images use the shape {rows, 1, cols}.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value, Shape shape);
  Var constant(const Tensor3<Scalar>& t) { return constant(t.data, t.shape); }
  /// Leaf that collects a gradient but is not a Parameter.
  Var variable(Mat value, Shape shape);
  Var variable(const Tensor3<Scalar>& t) { return variable(t.data, t.shape); }
  /// Leaf bound to a Parameter; backward() accumulates into its grad.
  Var parameter(Parameter<Scalar>& p);
  /// Parameter value used without gradient tracking.
  Var frozen(const Parameter<Scalar>& p);

  const Mat& value(Var v) const;
  Shape shape(Var v) const { return nodes_.at(v.id).shape; }
  Tensor3<Scalar> tensor(Var v) const { return Tensor3<Scalar>(shape(v), value(v)); }
  Scalar scalar(Var v) const { return value(v)(0, 0); }
  /// Gradient of the last backward() root w.r.t. v; empty if v did not need one.
  const Mat& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Back-propagates from a 1x1 root and accumulates parameter gradients.
  void backward(Var root);

  Var conv2d(Var x, Var w, Var b, ConvGeometry g);
  /// Transposed convolution; w is (Cout*k*k) x Cin, g describes the output side.
  Var deconv2d(Var x, Var w, Var b, ConvGeometry g, int out_h, int out_w);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, Scalar s);
  Var add_scalar(Var a, Scalar s);

  Var sigmoid(Var a);
  Var tanh(Var a);
  Var silu(Var a);
  Var relu(Var a);

  /// Stacks rows (channels); all inputs need the same column count.
  Var concat(std::initializer_list<Var> parts);
  Var concat(const std::vector<Var>& parts);
  Var slice(Var a, int row_begin, int rows);
  Var reshape(Var a, Shape s);

  Var matmul(Var a, Var b);
  /// a^T * b
  Var matmul_tn(Var a, Var b);
  Var softmax_cols(Var a);
  /// Divides each column by max(||column||, eps).
  Var normalize_cols(Var a, Scalar eps);
  /// 1 x cols row of column L2 norms.
  Var col_norms(Var a);
  Var gather_cols(Var a, std::vector<int> index);
  Var sum(Var a);
  /// Frobenius norm.
  Var norm(Var a);

 private:
  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;
    Shape shape;
    bool requires_grad = false;
    Parameter<Scalar>* param = nullptr;
    std::function<void()> backward;
  };

  Var push(Mat value, Shape shape, bool requires_grad);
  bool any_grad(std::initializer_list<Var> vars) const;
  Mat& grad_ref(Var v);
  void accumulate(Var v, const Mat& g);
  template <typename Expr>
  void accumulate_expr(Var v, const Expr& g);

  std::vector<Node> nodes_;
};

}  // namespace lgn
