#include "lgn/losses.hpp"

#include <algorithm>

namespace lgn::losses {

template <typename Scalar>
double intensity_loss(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target) {
  if (pred.shape != target.shape) {
    throw UserError("intensity loss: shape " + pred.shape.str() + " vs " + target.shape.str());
  }
  return double((pred.data - target.data).norm());
}

template <typename Scalar>
double compactness_loss(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool, const MatchResult<Scalar>& m) {
  double total = 0.0;
  for (int k = 0; k < q.count(); ++k) total += double((q.queries.col(k) - pool.prototypes.col(m.nearest[k])).norm());
  return total;
}

template <typename Scalar>
double separateness_loss(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool, const MatchResult<Scalar>& m,
                         double alpha) {
  if (pool.size() < 2) throw UserError("separateness loss needs at least 2 prototypes");
  double total = 0.0;
  for (int k = 0; k < q.count(); ++k) {
    const double near = double((q.queries.col(k) - pool.prototypes.col(m.nearest[k])).norm());
    const double far = double((q.queries.col(k) - pool.prototypes.col(m.second[k])).norm());
    total += std::max(0.0, near - far + alpha);
  }
  return total;
}

template <typename Scalar>
Var intensity_loss(Tape<Scalar>& tape, Var pred, Var target) {
  if (tape.shape(pred) != tape.shape(target)) throw UserError("intensity loss: shape mismatch");
  return tape.norm(tape.sub(pred, target));
}

template <typename Scalar>
Var compactness_loss(Tape<Scalar>& tape, Var queries, Var prototypes, const std::vector<int>& nearest) {
  return tape.sum(tape.col_norms(tape.sub(queries, tape.gather_cols(prototypes, nearest))));
}

template <typename Scalar>
Var separateness_loss(Tape<Scalar>& tape, Var queries, Var prototypes, const std::vector<int>& nearest,
                      const std::vector<int>& second, double alpha) {
  if (tape.shape(prototypes).width < 2) throw UserError("separateness loss needs at least 2 prototypes");
  Var near = tape.col_norms(tape.sub(queries, tape.gather_cols(prototypes, nearest)));
  Var far = tape.col_norms(tape.sub(queries, tape.gather_cols(prototypes, second)));
  return tape.sum(tape.relu(tape.add_scalar(tape.sub(near, far), Scalar(alpha))));
}

#define LGN_INSTANTIATE(S)                                                                                    \
  template double intensity_loss<S>(const Tensor3<S>&, const Tensor3<S>&);                                    \
  template double compactness_loss<S>(const QueryGrid<S>&, const MemoryPool<S>&, const MatchResult<S>&);     \
  template double separateness_loss<S>(const QueryGrid<S>&, const MemoryPool<S>&, const MatchResult<S>&,     \
                                       double);                                                              \
  template Var intensity_loss<S>(Tape<S>&, Var, Var);                                                        \
  template Var compactness_loss<S>(Tape<S>&, Var, Var, const std::vector<int>&);                             \
  template Var separateness_loss<S>(Tape<S>&, Var, Var, const std::vector<int>&, const std::vector<int>&,    \
                                    double);

LGN_INSTANTIATE(float)
LGN_INSTANTIATE(double)
#undef LGN_INSTANTIATE

}  // namespace lgn::losses
