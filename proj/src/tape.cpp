#include "lgn/tape.hpp"

#include <cmath>

namespace lgn {

// ---------------------------------------------------------------------------
// ParameterSet

template <typename Scalar>
Parameter<Scalar>& ParameterSet<Scalar>::add(const std::string& name, Matrix<Scalar> value) {
  if (contains(name)) throw UserError("duplicate parameter " + name);
  index_[name] = items_.size();
  Matrix<Scalar> grad = Matrix<Scalar>::Zero(value.rows(), value.cols());
  items_.push_back(Parameter<Scalar>{name, std::move(value), std::move(grad)});
  return items_.back();
}

template <typename Scalar>
Parameter<Scalar>& ParameterSet<Scalar>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw UserError("unknown parameter " + name);
  return items_[it->second];
}

template <typename Scalar>
const Parameter<Scalar>& ParameterSet<Scalar>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UserError("unknown parameter " + name);
  return items_[it->second];
}

template <typename Scalar>
std::vector<std::string> ParameterSet<Scalar>::names() const {
  std::vector<std::string> out;
  out.reserve(items_.size());
  for (const auto& p : items_) out.push_back(p.name);
  return out;
}

template <typename Scalar>
std::int64_t ParameterSet<Scalar>::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& p : items_) n += p.value.size();
  return n;
}

template <typename Scalar>
void ParameterSet<Scalar>::zero_grad() {
  for (auto& p : items_) p.grad.setZero(p.value.rows(), p.value.cols());
}

// ---------------------------------------------------------------------------
// Tape plumbing

template <typename Scalar>
Var Tape<Scalar>::push(Mat value, Shape shape, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.shape = shape;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var{int(nodes_.size()) - 1};
}

template <typename Scalar>
bool Tape<Scalar>::any_grad(std::initializer_list<Var> vars) const {
  for (Var v : vars) {
    if (v.valid() && nodes_[v.id].requires_grad) return true;
  }
  return false;
}

template <typename Scalar>
typename Tape<Scalar>::Mat& Tape<Scalar>::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) {
    const Mat& val = value(v);
    n.grad.setZero(val.rows(), val.cols());
  }
  return n.grad;
}

template <typename Scalar>
void Tape<Scalar>::accumulate(Var v, const Mat& g) {
  if (!v.valid() || !nodes_[v.id].requires_grad) return;
  grad_ref(v) += g;
}

template <typename Scalar>
template <typename Expr>
void Tape<Scalar>::accumulate_expr(Var v, const Expr& g) {
  if (!v.valid() || !nodes_[v.id].requires_grad) return;
  grad_ref(v) += g;
}

template <typename Scalar>
Var Tape<Scalar>::constant(Mat value, Shape shape) {
  return push(std::move(value), shape, false);
}

template <typename Scalar>
Var Tape<Scalar>::variable(Mat value, Shape shape) {
  return push(std::move(value), shape, true);
}

template <typename Scalar>
Var Tape<Scalar>::parameter(Parameter<Scalar>& p) {
  Var v = push(Mat(), Shape{int(p.value.rows()), 1, int(p.value.cols())}, true);
  nodes_[v.id].external = &p.value;
  nodes_[v.id].param = &p;
  return v;
}

template <typename Scalar>
Var Tape<Scalar>::frozen(const Parameter<Scalar>& p) {
  Var v = push(Mat(), Shape{int(p.value.rows()), 1, int(p.value.cols())}, false);
  nodes_[v.id].external = &p.value;
  return v;
}

template <typename Scalar>
const typename Tape<Scalar>::Mat& Tape<Scalar>::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.external ? *n.external : n.value;
}

template <typename Scalar>
void Tape<Scalar>::backward(Var root) {
  if (value(root).size() != 1) throw UserError("backward root must be a scalar");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!nodes_[root.id].requires_grad) return;
  grad_ref(root)(0, 0) = Scalar(1);
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward();
    if (n.param) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

bool is_pointwise(ConvGeometry g) { return g.kernel == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

template <typename Scalar>
Var Tape<Scalar>::conv2d(Var x, Var w, Var b, ConvGeometry g) {
  const Shape in = shape(x);
  const Mat& wv = value(w);
  if (wv.cols() != in.channels * g.kernel * g.kernel) {
    throw UserError("conv2d: weight expects " + std::to_string(wv.cols() / (g.kernel * g.kernel)) +
                    " input channels, got " + std::to_string(in.channels));
  }
  const Shape out{int(wv.rows()), g.out_size(in.height), g.out_size(in.width)};
  Mat cols = is_pointwise(g) ? value(x) : im2col<Scalar>(value(x), in, g);
  Mat y = wv * cols;
  if (b.valid()) y.colwise() += value(b).col(0);
  Var r = push(std::move(y), out, any_grad({x, w, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, x, w, b, g, in, cols = std::move(cols)]() {
      const Mat& gy = nodes_[r.id].grad;
      accumulate_expr(w, gy * cols.transpose());
      if (b.valid()) accumulate_expr(b, gy.rowwise().sum());
      if (nodes_[x.id].requires_grad) {
        Mat gcols = value(w).transpose() * gy;
        if (is_pointwise(g)) {
          accumulate(x, gcols);
        } else {
          accumulate(x, col2im<Scalar>(gcols, in, g));
        }
      }
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::deconv2d(Var x, Var w, Var b, ConvGeometry g, int out_h, int out_w) {
  const Shape in = shape(x);
  const Mat& wv = value(w);
  const int kk = g.kernel * g.kernel;
  if (wv.cols() != in.channels || wv.rows() % kk != 0) {
    throw UserError("deconv2d: weight does not match " + std::to_string(in.channels) +
                    " input channels");
  }
  if (g.out_size(out_h) != in.height || g.out_size(out_w) != in.width) {
    throw UserError("deconv2d: output " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                    " inconsistent with input " + in.str());
  }
  const Shape out{int(wv.rows()) / kk, out_h, out_w};
  Mat cols = wv * value(x);
  Mat y = col2im<Scalar>(cols, out, g);
  if (b.valid()) y.colwise() += value(b).col(0);
  Var r = push(std::move(y), out, any_grad({x, w, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, x, w, b, g, out]() {
      const Mat& gy = nodes_[r.id].grad;
      Mat gcols = im2col<Scalar>(gy, out, g);
      accumulate_expr(w, gcols * value(x).transpose());
      accumulate_expr(x, value(w).transpose() * gcols);
      if (b.valid()) accumulate_expr(b, gy.rowwise().sum());
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Var Tape<Scalar>::add(Var a, Var b) {
  if (shape(a) != shape(b)) throw UserError("add: shape mismatch " + shape(a).str() + " vs " + shape(b).str());
  Var r = push(value(a) + value(b), shape(a), any_grad({a, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, b]() {
      const Mat& g = nodes_[r.id].grad;
      accumulate(a, g);
      accumulate(b, g);
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::sub(Var a, Var b) {
  if (shape(a) != shape(b)) throw UserError("sub: shape mismatch " + shape(a).str() + " vs " + shape(b).str());
  Var r = push(value(a) - value(b), shape(a), any_grad({a, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, b]() {
      const Mat& g = nodes_[r.id].grad;
      accumulate(a, g);
      accumulate_expr(b, -g);
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::mul(Var a, Var b) {
  if (shape(a) != shape(b)) throw UserError("mul: shape mismatch " + shape(a).str() + " vs " + shape(b).str());
  Var r = push(value(a).cwiseProduct(value(b)), shape(a), any_grad({a, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, b]() {
      const Mat& g = nodes_[r.id].grad;
      accumulate_expr(a, g.cwiseProduct(value(b)));
      accumulate_expr(b, g.cwiseProduct(value(a)));
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::scale(Var a, Scalar s) {
  Var r = push(value(a) * s, shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, s]() { accumulate_expr(a, nodes_[r.id].grad * s); };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::add_scalar(Var a, Scalar s) {
  Var r = push((value(a).array() + s).matrix(), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() { accumulate(a, nodes_[r.id].grad); };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::sigmoid(Var a) {
  Mat y = (Scalar(1) / (Scalar(1) + (-value(a).array()).exp())).matrix();
  Var r = push(std::move(y), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const auto y = nodes_[r.id].value.array();
      accumulate_expr(a, (nodes_[r.id].grad.array() * y * (Scalar(1) - y)).matrix());
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::tanh(Var a) {
  Var r = push(value(a).array().tanh().matrix(), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const auto y = nodes_[r.id].value.array();
      accumulate_expr(a, (nodes_[r.id].grad.array() * (Scalar(1) - y.square())).matrix());
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::silu(Var a) {
  const auto x = value(a).array();
  Var r = push((x / (Scalar(1) + (-x).exp())).matrix(), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const auto x = value(a).array();
      const auto s = Scalar(1) / (Scalar(1) + (-x).exp());
      accumulate_expr(a, (nodes_[r.id].grad.array() * s * (Scalar(1) + x * (Scalar(1) - s))).matrix());
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::relu(Var a) {
  Var r = push(value(a).cwiseMax(Scalar(0)), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const auto mask = (value(a).array() > Scalar(0)).template cast<Scalar>();
      accumulate_expr(a, (nodes_[r.id].grad.array() * mask).matrix());
    };
  }
  return r;
}

// ---------------------------------------------------------------------------
// Structural

template <typename Scalar>
Var Tape<Scalar>::concat(std::initializer_list<Var> parts) {
  return concat(std::vector<Var>(parts));
}

template <typename Scalar>
Var Tape<Scalar>::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw UserError("concat: no inputs");
  Shape out = shape(parts.front());
  out.channels = 0;
  bool grad = false;
  for (Var p : parts) {
    const Shape s = shape(p);
    if (s.height != out.height || s.width != out.width) {
      throw UserError("concat: spatial mismatch " + s.str() + " vs " + shape(parts.front()).str());
    }
    out.channels += s.channels;
    grad = grad || nodes_[p.id].requires_grad;
  }
  Mat y(out.channels, out.pixels());
  int row = 0;
  for (Var p : parts) {
    const Mat& v = value(p);
    y.middleRows(row, v.rows()) = v;
    row += int(v.rows());
  }
  Var r = push(std::move(y), out, grad);
  if (grad) {
    nodes_[r.id].backward = [this, r, parts]() {
      const Mat& g = nodes_[r.id].grad;
      int row = 0;
      for (Var p : parts) {
        const int rows = int(value(p).rows());
        accumulate_expr(p, g.middleRows(row, rows));
        row += rows;
      }
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::slice(Var a, int row_begin, int rows) {
  Shape out = shape(a);
  if (row_begin < 0 || row_begin + rows > out.channels) throw UserError("slice: rows out of range");
  out.channels = rows;
  Var r = push(value(a).middleRows(row_begin, rows), out, any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, row_begin, rows]() {
      grad_ref(a).middleRows(row_begin, rows) += nodes_[r.id].grad;
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::reshape(Var a, Shape s) {
  const Mat& v = value(a);
  if (v.rows() != s.channels || v.cols() != s.pixels()) {
    throw UserError("reshape: incompatible shape " + s.str());
  }
  Var r = push(v, s, any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() { accumulate(a, nodes_[r.id].grad); };
  }
  return r;
}

// ---------------------------------------------------------------------------
// Matrix ops

template <typename Scalar>
Var Tape<Scalar>::matmul(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.cols() != bv.rows()) throw UserError("matmul: inner dimension mismatch");
  Var r = push(av * bv, Shape{int(av.rows()), 1, int(bv.cols())}, any_grad({a, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, b]() {
      const Mat& g = nodes_[r.id].grad;
      accumulate_expr(a, g * value(b).transpose());
      accumulate_expr(b, value(a).transpose() * g);
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::matmul_tn(Var a, Var b) {
  const Mat& av = value(a);
  const Mat& bv = value(b);
  if (av.rows() != bv.rows()) throw UserError("matmul_tn: inner dimension mismatch");
  Var r = push(av.transpose() * bv, Shape{int(av.cols()), 1, int(bv.cols())}, any_grad({a, b}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, b]() {
      const Mat& g = nodes_[r.id].grad;
      accumulate_expr(a, value(b) * g.transpose());
      accumulate_expr(b, value(a) * g);
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::softmax_cols(Var a) {
  const Mat& x = value(a);
  Mat y = (x.rowwise() - x.colwise().maxCoeff()).array().exp().matrix();
  y.array().rowwise() /= y.colwise().sum().array();
  Var r = push(std::move(y), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const Mat& y = nodes_[r.id].value;
      const Mat& g = nodes_[r.id].grad;
      const auto dots = g.cwiseProduct(y).colwise().sum();
      accumulate_expr(a, (y.array() * (g.rowwise() - dots).array()).matrix());
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::normalize_cols(Var a, Scalar eps) {
  const Mat& x = value(a);
  Vector<Scalar> denom = x.colwise().norm().transpose().cwiseMax(eps);
  Mat y = x * denom.cwiseInverse().asDiagonal();
  Var r = push(std::move(y), shape(a), any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, eps, denom = std::move(denom)]() {
      const Mat& y = nodes_[r.id].value;
      const Mat& g = nodes_[r.id].grad;
      const Mat& x = value(a);
      Mat gx(g.rows(), g.cols());
      for (Eigen::Index k = 0; k < g.cols(); ++k) {
        if (x.col(k).norm() > eps) {
          gx.col(k) = (g.col(k) - y.col(k) * y.col(k).dot(g.col(k))) / denom(k);
        } else {
          gx.col(k) = g.col(k) / denom(k);
        }
      }
      accumulate(a, gx);
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::col_norms(Var a) {
  const Mat& x = value(a);
  Mat y = x.colwise().norm();
  Var r = push(std::move(y), Shape{1, 1, int(x.cols())}, any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const Mat& y = nodes_[r.id].value;
      const Mat& g = nodes_[r.id].grad;
      const Mat& x = value(a);
      Mat gx = Mat::Zero(x.rows(), x.cols());
      for (Eigen::Index k = 0; k < x.cols(); ++k) {
        if (y(0, k) > Scalar(0)) gx.col(k) = x.col(k) * (g(0, k) / y(0, k));
      }
      accumulate(a, gx);
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::gather_cols(Var a, std::vector<int> index) {
  const Mat& x = value(a);
  Mat y(x.rows(), Eigen::Index(index.size()));
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= x.cols()) throw UserError("gather_cols: index out of range");
    y.col(Eigen::Index(k)) = x.col(index[k]);
  }
  Var r = push(std::move(y), Shape{int(x.rows()), 1, int(index.size())}, any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a, index = std::move(index)]() {
      const Mat& g = nodes_[r.id].grad;
      Mat& gx = grad_ref(a);
      for (std::size_t k = 0; k < index.size(); ++k) gx.col(index[k]) += g.col(Eigen::Index(k));
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::sum(Var a) {
  Mat y(1, 1);
  y(0, 0) = value(a).sum();
  Var r = push(std::move(y), Shape{1, 1, 1}, any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const Mat& x = value(a);
      accumulate_expr(a, Mat::Constant(x.rows(), x.cols(), nodes_[r.id].grad(0, 0)));
    };
  }
  return r;
}

template <typename Scalar>
Var Tape<Scalar>::norm(Var a) {
  Mat y(1, 1);
  y(0, 0) = value(a).norm();
  Var r = push(std::move(y), Shape{1, 1, 1}, any_grad({a}));
  if (nodes_[r.id].requires_grad) {
    nodes_[r.id].backward = [this, r, a]() {
      const Scalar n = nodes_[r.id].value(0, 0);
      if (n > Scalar(0)) accumulate_expr(a, value(a) * (nodes_[r.id].grad(0, 0) / n));
    };
  }
  return r;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace lgn
