#pragma once

// Bridge matrices align a reference predictor's instances with the main
// predictor's instances. They start from a handful of known pairings and are
// spread over the bipartite graph formed by the two feature graphs, either by
// an exact implicit step (a Sylvester equation) or by cheap explicit sweeps.

#include <utility>
#include <vector>

#include "jmd/bridge_matrix.hpp"
#include "jmd/feature_graph.hpp"

namespace jmd {

/// Known (main_index, ref_index) pairings; injective in both coordinates.
struct CouplingLabels {
  std::vector<std::pair<Index, Index>> pairs;
  Index n_main = 0;
  Index n_ref = 0;

  void validate() const;
  static CouplingLabels identity(Index n);
};

/// B[i][j] = 1 for every labeled pair, empty rows elsewhere.
BridgeMatrix init_bridge(const CouplingLabels& labels, int sparsity_cap);

inline constexpr Index kImplicitSizeLimit = 10'000;

/// Solves (I + d Lf) V + d V Lk = B0 for dense V. With symmetric PSD
/// Laplacians the left side is a symmetric positive definite operator on
/// n_main x n_ref matrices, so conjugate gradients with sparse products
/// suffice. Converges to ||residual||_F <= 1e-14 ||B0||_F or throws
/// SingularSystem.
Matrix solve_bridge_sylvester(const Matrix& b0, const SparseMatrix& main_laplacian, const SparseMatrix& ref_laplacian,
                              double delta_b);

/// Implicit step followed by clamp / top-K / normalize with b0's cap. Entries
/// below 1e-12 of the largest magnitude are treated as zero: they are below
/// the accuracy of the solve.
BridgeMatrix bridge_step_implicit(const BridgeMatrix& b0, const FeatureGraph& main, const FeatureGraph& ref, double delta_b);

BridgeMatrix bridge_step_explicit(const BridgeMatrix& b, const FeatureGraph& main, const FeatureGraph& ref, double delta_b,
                                  int sparsity_cap);

/// B g: each main instance receives a convex combination of reference values.
Vector aligned_reference(const BridgeMatrix& b, const Vector& g);

/// Centered gram alignment of f f^T against B g g^T B^T; for rank-one grams
/// this is <f, B g>_M^2.
double alignment_score(const Vector& f, const Vector& g, const BridgeMatrix& b);

}  // namespace jmd
