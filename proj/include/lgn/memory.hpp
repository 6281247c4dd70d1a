#pragma once

#include "lgn/tape.hpp"

#include <cstdint>
#include <vector>

namespace lgn {

/// I unit-norm prototype vectors stored as the columns of a C x I matrix.
template <typename Scalar>
struct MemoryPool {
  Matrix<Scalar> prototypes;

  int size() const { return int(prototypes.cols()); }
  int dim() const { return int(prototypes.rows()); }
};

/// K query vectors (columns, C x K) expanded from a height x width feature map.
template <typename Scalar>
struct QueryGrid {
  Matrix<Scalar> queries;
  int height = 0;
  int width = 0;

  int count() const { return int(queries.cols()); }
  int dim() const { return int(queries.rows()); }
};

/// Matching probabilities, stored I x K: column k is the softmax over the
/// prototypes for query k.
template <typename Scalar>
struct MatchResult {
  Matrix<Scalar> weights;
  std::vector<int> nearest;
  std::vector<int> second;
};

namespace memory {

/// Isotropic Gaussian draws, L2-normalized. Requires I >= 2.
template <typename Scalar>
MemoryPool<Scalar> init_pool(int size, int dim, std::uint64_t seed);

/// Splits a feature map into per-cell queries, L2-normalizing each one.
template <typename Scalar>
QueryGrid<Scalar> queries_from(const Tensor3<Scalar>& features);

/// Largest and second-largest entry per column, ties to the lowest index.
template <typename Scalar>
void rank_columns(const Matrix<Scalar>& weights, std::vector<int>& nearest, std::vector<int>& second);

template <typename Scalar>
MatchResult<Scalar> match(const QueryGrid<Scalar>& queries, const MemoryPool<Scalar>& pool);

/// Convex combination of prototypes per query, laid out as a C x h x w map.
template <typename Scalar>
Tensor3<Scalar> read(const QueryGrid<Scalar>& queries, const MemoryPool<Scalar>& pool);

/// Moves each prototype toward the queries that picked it as nearest, with
/// per-prototype softmax weights over queries rescaled so the strongest
/// member weighs 1, then re-normalizes. Prototypes nobody picked are untouched.
template <typename Scalar>
MemoryPool<Scalar> update(const QueryGrid<Scalar>& queries, const MemoryPool<Scalar>& pool);

/// Test-time update gate: inclusive threshold on the regular score.
inline bool gate_allows(double regular_score, double gamma) { return regular_score <= gamma; }

/// Read on the tape: softmax_cols(P^T Q) then P * W. Returns the C x K result.
template <typename Scalar>
Var read(Tape<Scalar>& tape, Var queries, Var prototypes);

}  // namespace memory
}  // namespace lgn
