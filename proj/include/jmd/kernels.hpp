#pragma once

// Data-parallel inner loops. Every kernel has a plain serial counterpart in
// jmd::kernels::serial with the same contract; the serial versions are kept
// as test oracles and as the baseline in bench/.

#include <vector>

#include "jmd/bridge_matrix.hpp"
#include "jmd/types.hpp"

namespace jmd::kernels {

/// k nearest neighbours of every row of `points` (self excluded), ordered by
/// (squared distance, index).
struct KnnTable {
  Index n = 0;
  int k = 0;
  std::vector<Index> index;    // n * k, row-major
  std::vector<double> sq_dist;  // n * k, row-major

  Index neighbor(Index i, int j) const { return index[static_cast<size_t>(i * k + j)]; }
  double distance2(Index i, int j) const { return sq_dist[static_cast<size_t>(i * k + j)]; }
};

KnnTable knn(const Matrix& points, int k);

/// S^T S, accumulated over fixed row blocks so the result does not depend on
/// the thread count.
Matrix column_gram(const Matrix& s);

/// One explicit bridge sweep: B - d Lf B, then (.) - d (.) Lk, followed by
/// clamp / top-K / normalize on every row.
std::vector<BridgeRow> explicit_bridge_sweep(const std::vector<BridgeRow>& b, const SparseMatrix& laplacian_main,
                                             const SparseMatrix& laplacian_ref, double delta_b, int sparsity_cap);

/// V + d (Lf V + V Lk) for dense V, computed column by column.
Matrix kronecker_sum_apply(const Matrix& v, const SparseMatrix& laplacian_main, const SparseMatrix& laplacian_ref, double delta);

namespace serial {

KnnTable knn(const Matrix& points, int k);
Matrix column_gram(const Matrix& s);
std::vector<BridgeRow> explicit_bridge_sweep(const std::vector<BridgeRow>& b, const SparseMatrix& laplacian_main,
                                             const SparseMatrix& laplacian_ref, double delta_b, int sparsity_cap);
Matrix kronecker_sum_apply(const Matrix& v, const SparseMatrix& laplacian_main, const SparseMatrix& laplacian_ref, double delta);

}  // namespace serial
}  // namespace jmd::kernels
