#pragma once

#include "lgn/memory.hpp"

#include <vector>

namespace lgn {

struct LossWeights {
  double lambda_c = 10.0;
  double lambda_s = 5.0;
  double alpha = 1.0;  // separateness margin
};

struct LossParts {
  double intensity = 0.0;
  double compactness = 0.0;
  double separateness = 0.0;
  double total = 0.0;
};

namespace losses {

/// ||pred - target||_2 over all pixels and channels.
template <typename Scalar>
double intensity_loss(const Tensor3<Scalar>& pred, const Tensor3<Scalar>& target);

/// Sum over queries of the distance to the nearest prototype.
template <typename Scalar>
double compactness_loss(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool, const MatchResult<Scalar>& m);

/// Sum over queries of [d_nearest - d_second + alpha]_+.
template <typename Scalar>
double separateness_loss(const QueryGrid<Scalar>& q, const MemoryPool<Scalar>& pool, const MatchResult<Scalar>& m,
                         double alpha);

inline double total_loss(double intensity, double compactness, double separateness, const LossWeights& w) {
  return intensity + w.lambda_c * compactness + w.lambda_s * separateness;
}

inline LossParts combine(double intensity, double compactness, double separateness, const LossWeights& w) {
  return {intensity, compactness, separateness, total_loss(intensity, compactness, separateness, w)};
}

// Differentiable forms. `queries` is C x K, `prototypes` C x I.

template <typename Scalar>
Var intensity_loss(Tape<Scalar>& tape, Var pred, Var target);

template <typename Scalar>
Var compactness_loss(Tape<Scalar>& tape, Var queries, Var prototypes, const std::vector<int>& nearest);

template <typename Scalar>
Var separateness_loss(Tape<Scalar>& tape, Var queries, Var prototypes, const std::vector<int>& nearest,
                      const std::vector<int>& second, double alpha);

}  // namespace losses
}  // namespace lgn
