#include "lgn/memory.hpp"

#include <random>

namespace lgn::memory {

namespace {

template <typename Scalar>
void check_dims(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool) {
  if (q.dim() != pool.dim()) {
    throw UserError("query dimension " + std::to_string(q.dim()) + " != prototype dimension " +
                    std::to_string(pool.dim()));
  }
}

template <typename Scalar>
Matrix<Scalar> softmax_columns(const Matrix<Scalar>& logits) {
  Matrix<Scalar> w = (logits.rowwise() - logits.colwise().maxCoeff()).array().exp().matrix();
  w.array().rowwise() /= w.colwise().sum().array();
  return w;
}

}  // namespace

template <typename Scalar>
MemoryPool<Scalar> init_pool(int size, int dim, std::uint64_t seed) {
  if (size < 2) throw UserError("memory pool needs at least 2 prototypes, got " + std::to_string(size));
  if (dim < 1) throw UserError("prototype dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix<double> p(dim, size);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = dist(rng);
  p.colwise().normalize();
  return {p.cast<Scalar>()};
}

template <typename Scalar>
QueryGrid<Scalar> queries_from(const Tensor3<Scalar>& features) {
  Matrix<Scalar> q = features.data;
  for (Eigen::Index k = 0; k < q.cols(); ++k) {
    const Scalar n = std::max(q.col(k).norm(), Scalar(1e-12));
    q.col(k) /= n;
  }
  return {std::move(q), features.shape.height, features.shape.width};
}

template <typename Scalar>
void rank_columns(const Matrix<Scalar>& weights, std::vector<int>& nearest, std::vector<int>& second) {
  const Eigen::Index rows = weights.rows();
  nearest.assign(weights.cols(), 0);
  second.assign(weights.cols(), rows > 1 ? 1 : 0);
  for (Eigen::Index k = 0; k < weights.cols(); ++k) {
    int best = -1, next = -1;
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Scalar v = weights(i, k);
      if (best < 0 || v > weights(best, k)) {
        next = best;
        best = int(i);
      } else if (next < 0 || v > weights(next, k)) {
        next = int(i);
      }
    }
    nearest[k] = best;
    second[k] = next < 0 ? best : next;
  }
}

template <typename Scalar>
MatchResult<Scalar> match(const QueryGrid<Scalar>& queries, const MemoryPool<Scalar>& pool) {
  check_dims(queries, pool);
  MatchResult<Scalar> r;
  r.weights = softmax_columns<Scalar>(pool.prototypes.transpose() * queries.queries);
  rank_columns(r.weights, r.nearest, r.second);
  return r;
}

template <typename Scalar>
Tensor3<Scalar> read(const QueryGrid<Scalar>& queries, const MemoryPool<Scalar>& pool) {
  const MatchResult<Scalar> m = match(queries, pool);
  return Tensor3<Scalar>(Shape{pool.dim(), queries.height, queries.width}, pool.prototypes * m.weights);
}

template <typename Scalar>
MemoryPool<Scalar> update(const QueryGrid<Scalar>& queries, const MemoryPool<Scalar>& pool) {
  check_dims(queries, pool);
  if (queries.count() == 0) return pool;
  const Matrix<Scalar> logits = pool.prototypes.transpose() * queries.queries;  // I x K
  std::vector<int> nearest, second;
  rank_columns<Scalar>(softmax_columns<Scalar>(logits), nearest, second);

  // Softmax over queries, per prototype (row).
  Matrix<Scalar> v = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp().matrix();
  v.array().colwise() /= v.rowwise().sum().array();

  MemoryPool<Scalar> out = pool;
  for (int i = 0; i < pool.size(); ++i) {
    Scalar vmax = Scalar(-1);
    for (int k = 0; k < queries.count(); ++k) {
      if (nearest[k] == i) vmax = std::max(vmax, v(i, k));
    }
    if (vmax < Scalar(0)) continue;
    Vector<Scalar> sum = pool.prototypes.col(i);
    for (int k = 0; k < queries.count(); ++k) {
      if (nearest[k] == i) sum += (v(i, k) / vmax) * queries.queries.col(k);
    }
    out.prototypes.col(i) = sum / sum.norm();
  }
  return out;
}

template <typename Scalar>
Var read(Tape<Scalar>& tape, Var queries, Var prototypes) {
  if (tape.shape(queries).channels != tape.shape(prototypes).channels) {
    throw UserError("memory read: query and prototype dimensions differ");
  }
  Var w = tape.softmax_cols(tape.matmul_tn(prototypes, queries));
  return tape.matmul(prototypes, w);
}

#define LGN_INSTANTIATE(S)                                                                          \
  template MemoryPool<S> init_pool<S>(int, int, std::uint64_t);                                     \
  template QueryGrid<S> queries_from<S>(const Tensor3<S>&);                                         \
  template void rank_columns<S>(const Matrix<S>&, std::vector<int>&, std::vector<int>&);            \
  template MatchResult<S> match<S>(const QueryGrid<S>&, const MemoryPool<S>&);                      \
  template Tensor3<S> read<S>(const QueryGrid<S>&, const MemoryPool<S>&);                           \
  template MemoryPool<S> update<S>(const QueryGrid<S>&, const MemoryPool<S>&);                      \
  template Var read<S>(Tape<S>&, Var, Var);

LGN_INSTANTIATE(float)
LGN_INSTANTIATE(double)
#undef LGN_INSTANTIATE

}  // namespace lgn::memory
