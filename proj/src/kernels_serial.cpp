// Straightforward reference versions of the kernels in kernels.cpp.

#include <algorithm>
#include <numeric>

#include "jmd/error.hpp"
#include "jmd/kernels.hpp"

namespace jmd::kernels::serial {

KnnTable knn(const Matrix& points, int k) {
  const Index n = points.rows();
  if (k < 1 || n < k + 1) throw Error(ErrorCode::TooFewPoints, "k-NN needs more points than neighbours");
  KnnTable table{n, k, std::vector<Index>(static_cast<size_t>(n * k)), std::vector<double>(static_cast<size_t>(n * k))};
  std::vector<std::pair<double, Index>> all;
  for (Index i = 0; i < n; ++i) {
    all.clear();
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (Index c = 0; c < points.cols(); ++c) {
        const double diff = points(i, c) - points(j, c);
        s += diff * diff;
      }
      all.emplace_back(s, j);
    }
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    for (int j = 0; j < k; ++j) {
      table.index[static_cast<size_t>(i * k + j)] = all[static_cast<size_t>(j)].second;
      table.sq_dist[static_cast<size_t>(i * k + j)] = all[static_cast<size_t>(j)].first;
    }
  }
  return table;
}

Matrix column_gram(const Matrix& s) { return s.transpose() * s; }

std::vector<BridgeRow> explicit_bridge_sweep(const std::vector<BridgeRow>& b, const SparseMatrix& laplacian_main,
                                             const SparseMatrix& laplacian_ref, double delta_b, int sparsity_cap) {
  SparseMatrix bs(static_cast<Index>(b.size()), laplacian_ref.rows());
  std::vector<Eigen::Triplet<double>> trips;
  for (size_t i = 0; i < b.size(); ++i)
    for (const BridgeEntry& e : b[i]) trips.emplace_back(static_cast<Index>(i), e.col, e.value);
  bs.setFromTriplets(trips.begin(), trips.end());

  const SparseMatrix t = bs - delta_b * SparseMatrix(laplacian_main * bs);
  const SparseMatrix r = t - delta_b * SparseMatrix(t * laplacian_ref);

  std::vector<BridgeRow> out(b.size());
  for (Index i = 0; i < r.rows(); ++i) {
    BridgeRow row;
    for (SparseMatrix::InnerIterator it(r, i); it; ++it)
      if (it.value() > 0.0) row.push_back({it.col(), it.value()});
    prune_and_normalize(row, sparsity_cap);
    out[static_cast<size_t>(i)] = std::move(row);
  }
  return out;
}

Matrix kronecker_sum_apply(const Matrix& v, const SparseMatrix& laplacian_main, const SparseMatrix& laplacian_ref, double delta) {
  return v + delta * (laplacian_main * v) + delta * (v * laplacian_ref);
}

}  // namespace jmd::kernels::serial
