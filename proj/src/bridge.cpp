#include "jmd/bridge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jmd/error.hpp"
#include "jmd/kernels.hpp"
#include "jmd/manifold.hpp"

namespace jmd {

// ---- BridgeMatrix ---------------------------------------------------------

void prune_and_normalize(BridgeRow& row, int sparsity_cap) {
  std::erase_if(row, [](const BridgeEntry& e) { return !(e.value > 0.0); });
  if (row.size() > static_cast<size_t>(sparsity_cap)) {
    std::nth_element(row.begin(), row.begin() + sparsity_cap, row.end(), [](const BridgeEntry& a, const BridgeEntry& b) {
      return a.value > b.value || (a.value == b.value && a.col < b.col);
    });
    row.resize(static_cast<size_t>(sparsity_cap));
  }
  std::sort(row.begin(), row.end(), [](const BridgeEntry& a, const BridgeEntry& b) { return a.col < b.col; });
  double total = 0.0;
  for (const BridgeEntry& e : row) total += e.value;
  if (total > 0.0)
    for (BridgeEntry& e : row) e.value /= total;
  else
    row.clear();
}

BridgeMatrix::BridgeMatrix(Index n_main, Index n_ref, int sparsity_cap)
    : n_ref_(n_ref), cap_(sparsity_cap), rows_(static_cast<size_t>(n_main)) {
  if (n_main < 0 || n_ref < 0) throw Error(ErrorCode::InvalidArgument, "negative bridge dimensions");
  if (sparsity_cap < 1) throw Error(ErrorCode::InvalidArgument, "bridge sparsity cap must be at least 1");
}

void BridgeMatrix::assign_row(Index i, BridgeRow entries) {
  for (const BridgeEntry& e : entries)
    if (e.col < 0 || e.col >= n_ref_) throw Error(ErrorCode::IndexOutOfRange, "bridge column out of range");
  prune_and_normalize(entries, cap_);
  entries.shrink_to_fit();  // rows are often built from many more candidates than K
  rows_[static_cast<size_t>(i)] = std::move(entries);
}

Index BridgeMatrix::nonzeros() const {
  Index nnz = 0;
  for (const BridgeRow& r : rows_) nnz += static_cast<Index>(r.size());
  return nnz;
}

Matrix BridgeMatrix::to_dense() const {
  Matrix d = Matrix::Zero(rows(), n_ref_);
  for (Index i = 0; i < rows(); ++i)
    for (const BridgeEntry& e : rows_[static_cast<size_t>(i)]) d(i, e.col) = e.value;
  return d;
}

SparseMatrix BridgeMatrix::to_sparse() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(nonzeros()));
  for (Index i = 0; i < rows(); ++i)
    for (const BridgeEntry& e : rows_[static_cast<size_t>(i)]) trips.emplace_back(i, e.col, e.value);
  SparseMatrix s(rows(), n_ref_);
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

BridgeMatrix BridgeMatrix::from_dense(const Eigen::Ref<const Matrix>& values, int sparsity_cap) {
  BridgeMatrix b(values.rows(), values.cols(), sparsity_cap);
  for (Index i = 0; i < values.rows(); ++i) {
    BridgeRow row;
    for (Index j = 0; j < values.cols(); ++j)
      if (values(i, j) > 0.0) row.push_back({j, values(i, j)});
    b.assign_row(i, std::move(row));
  }
  return b;
}

// ---- labels and initialization ---------------------------------------------

void CouplingLabels::validate() const {
  std::vector<char> main_used(static_cast<size_t>(n_main), 0), ref_used(static_cast<size_t>(n_ref), 0);
  for (const auto& [i, j] : pairs) {
    if (i < 0 || i >= n_main || j < 0 || j >= n_ref) {
      throw Error(ErrorCode::IndexOutOfRange, "coupling pair (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    }
    if (main_used[static_cast<size_t>(i)]++ || ref_used[static_cast<size_t>(j)]++) {
      throw Error(ErrorCode::DuplicateIndex, "coupling pair (" + std::to_string(i) + "," + std::to_string(j) + ") reuses an index");
    }
  }
}

CouplingLabels CouplingLabels::identity(Index n) {
  CouplingLabels labels{{}, n, n};
  labels.pairs.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) labels.pairs.emplace_back(i, i);
  return labels;
}

BridgeMatrix init_bridge(const CouplingLabels& labels, int sparsity_cap) {
  labels.validate();
  BridgeMatrix b(labels.n_main, labels.n_ref, sparsity_cap);
  for (const auto& [i, j] : labels.pairs) b.assign_row(i, {{j, 1.0}});
  return b;
}

// ---- implicit step ---------------------------------------------------------

Matrix solve_bridge_sylvester(const Matrix& b0, const SparseMatrix& lf, const SparseMatrix& lk, double delta_b) {
  if (b0.rows() != lf.rows() || b0.cols() != lk.rows()) throw Error(ErrorCode::LengthMismatch, "bridge shape does not match the Laplacians");
  if (!(delta_b > 0.0)) throw Error(ErrorCode::NonPositiveScale, "delta_b must be positive");
  if (b0.rows() > kImplicitSizeLimit || b0.cols() > kImplicitSizeLimit) {
    throw Error(ErrorCode::SizeLimitExceeded, "dense bridge solve limited to " + std::to_string(kImplicitSizeLimit) + " instances, got " +
                                                  std::to_string(std::max(b0.rows(), b0.cols())));
  }
  auto apply = [&](const Matrix& v) { return kernels::kronecker_sum_apply(v, lf, lk, delta_b); };

  const double target = 1e-14 * b0.norm();
  Matrix v = b0;
  Matrix r = b0 - apply(v);
  Matrix p = r;
  double rr = r.squaredNorm();
  const int max_iter = 10 * static_cast<int>(std::max<Index>(b0.rows(), b0.cols())) + 100;
  for (int it = 0; it < max_iter && std::sqrt(rr) > target; ++it) {
    const Matrix ap = apply(p);
    const double pap = (p.array() * ap.array()).sum();
    if (!(pap > 0.0)) throw Error(ErrorCode::SingularSystem, "Sylvester operator is not positive definite");
    const double alpha = rr / pap;
    v.noalias() += alpha * p;
    r.noalias() -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  // The recursive residual drifts from the true one; judge convergence on the latter.
  if (!((b0 - apply(v)).norm() <= 1e-8 * b0.norm())) throw Error(ErrorCode::SingularSystem, "Sylvester solve did not converge");
  return v;
}

BridgeMatrix bridge_step_implicit(const BridgeMatrix& b0, const FeatureGraph& main, const FeatureGraph& ref, double delta_b) {
  if (b0.rows() != main.size() || b0.cols() != ref.size()) throw Error(ErrorCode::LengthMismatch, "bridge shape does not match the graphs");
  if (b0.nonzeros() == 0) return b0;
  Matrix v = solve_bridge_sylvester(b0.to_dense(), main.laplacian, ref.laplacian, delta_b);
  const double floor = 1e-12 * v.cwiseAbs().maxCoeff();
  v = v.unaryExpr([floor](double x) { return x > floor ? x : 0.0; });
  return BridgeMatrix::from_dense(v, b0.sparsity_cap());
}

// ---- explicit step ---------------------------------------------------------

BridgeMatrix bridge_step_explicit(const BridgeMatrix& b, const FeatureGraph& main, const FeatureGraph& ref, double delta_b,
                                  int sparsity_cap) {
  if (b.rows() != main.size() || b.cols() != ref.size()) throw Error(ErrorCode::LengthMismatch, "bridge shape does not match the graphs");
  if (!(delta_b >= 0.0)) throw Error(ErrorCode::NonPositiveScale, "delta_b must be nonnegative");
  BridgeMatrix out(b.rows(), b.cols(), sparsity_cap);
  auto rows = kernels::explicit_bridge_sweep(b.row_data(), main.laplacian, ref.laplacian, delta_b, sparsity_cap);
  for (Index i = 0; i < out.rows(); ++i) out.assign_row(i, std::move(rows[static_cast<size_t>(i)]));
  return out;
}

// ---- alignment -------------------------------------------------------------

Vector aligned_reference(const BridgeMatrix& b, const Vector& g) {
  if (g.size() != b.cols()) {
    throw Error(ErrorCode::LengthMismatch,
                "reference has " + std::to_string(g.size()) + " values, bridge expects " + std::to_string(b.cols()));
  }
  Vector out = Vector::Zero(b.rows());
  for (Index i = 0; i < b.rows(); ++i) {
    double s = 0.0;
    for (const BridgeEntry& e : b.row(i)) s += e.value * g[e.col];
    out[i] = s;
  }
  return out;
}

double alignment_score(const Vector& f, const Vector& g, const BridgeMatrix& b) {
  if (f.size() != b.rows()) throw Error(ErrorCode::LengthMismatch, "main predictions do not match bridge rows");
  const Vector aligned = aligned_reference(b, g);
  const double rho = manifold_metric(f, aligned);
  return rho * rho;
}

}  // namespace jmd
