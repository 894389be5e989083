#pragma once

#include <span>
#include <vector>

#include "jmd/types.hpp"

namespace jmd {

struct BridgeEntry {
  Index col;
  double value;
};

using BridgeRow = std::vector<BridgeEntry>;

/// Row-sparse, row-stochastic alignment of n_ref reference instances onto
/// n_main main instances. Each stored row is sorted by column, holds at most
/// `sparsity_cap()` strictly positive entries and sums to one; rows with no
/// mass stay empty.
class BridgeMatrix {
 public:
  BridgeMatrix(Index n_main, Index n_ref, int sparsity_cap);

  Index rows() const noexcept { return static_cast<Index>(rows_.size()); }
  Index cols() const noexcept { return n_ref_; }
  int sparsity_cap() const noexcept { return cap_; }

  std::span<const BridgeEntry> row(Index i) const { return rows_[static_cast<size_t>(i)]; }
  const std::vector<BridgeRow>& row_data() const noexcept { return rows_; }

  /// Clamps negatives, keeps the K largest entries (ties to the lower
  /// column), and renormalizes before storing.
  void assign_row(Index i, BridgeRow entries);

  Index nonzeros() const;
  Matrix to_dense() const;
  SparseMatrix to_sparse() const;

  /// Builds a bridge from dense values through the same clamp/prune/normalize.
  static BridgeMatrix from_dense(const Eigen::Ref<const Matrix>& values, int sparsity_cap);

 private:
  Index n_ref_;
  int cap_;
  std::vector<BridgeRow> rows_;
};

/// In-place clamp + top-K + row normalization shared by every bridge update.
void prune_and_normalize(BridgeRow& row, int sparsity_cap);

}  // namespace jmd
