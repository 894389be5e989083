#pragma once

#include "jmd/kernels.hpp"
#include "jmd/types.hpp"

namespace jmd {

/// Anisotropic k-NN graph over one feature domain. Edge weights multiply a
/// feature-proximity Gaussian W^x with a prediction-proximity Gaussian W^f;
/// the Laplacian is the symmetric normalized one, I - D^-1/2 W D^-1/2.
struct FeatureGraph {
  SparseMatrix affinity_x;  // W^x, symmetric, no self loops
  SparseMatrix affinity;    // W^x o W^f
  SparseMatrix laplacian;   // stored with its diagonal
  double sigma_x2 = 0.0;
  double sigma_f2 = 0.0;
  int neighbors = 0;

  Index size() const noexcept { return laplacian.rows(); }
};

/// sigma_x^2 is twice the mean squared distance over all k-NN edges.
FeatureGraph build_feature_graph(const Matrix& features, const Vector& predictions, int neighbors, double sigma_f2);

/// Same W^x, new predictions: the per-iteration rebuild of the main graph.
FeatureGraph reweight_feature_graph(const FeatureGraph& graph, const Vector& predictions, double sigma_f2);

/// I - D^-1/2 W D^-1/2 for a symmetric nonnegative W; isolated vertices get a
/// unit diagonal.
SparseMatrix normalized_laplacian(const SparseMatrix& affinity);

}  // namespace jmd
