#include "jmd/feature_graph.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "jmd/error.hpp"

namespace jmd {
namespace {

SparseMatrix prediction_weighted(const SparseMatrix& wx, const Vector& predictions, double sigma_f2) {
  SparseMatrix w = wx;
  for (Index i = 0; i < w.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(w, i); it; ++it) {
      const double gap = predictions[i] - predictions[it.col()];
      it.valueRef() *= std::exp(-gap * gap / sigma_f2);
    }
  }
  return w;
}

}  // namespace

SparseMatrix normalized_laplacian(const SparseMatrix& affinity) {
  const Index n = affinity.rows();
  Vector inv_sqrt_degree(n);
  for (Index i = 0; i < n; ++i) {
    const double d = affinity.row(i).sum();
    inv_sqrt_degree[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(affinity.nonZeros() + n));
  for (Index i = 0; i < n; ++i) {
    double diag = 1.0;
    for (SparseMatrix::InnerIterator it(affinity, i); it; ++it) {
      const double v = inv_sqrt_degree[i] * it.value() * inv_sqrt_degree[it.col()];
      if (it.col() == i)
        diag -= v;
      else
        trips.emplace_back(i, it.col(), -v);
    }
    trips.emplace_back(i, i, diag);
  }
  SparseMatrix lap(n, n);
  lap.setFromTriplets(trips.begin(), trips.end());
  return lap;
}

FeatureGraph build_feature_graph(const Matrix& features, const Vector& predictions, int neighbors, double sigma_f2) {
  const Index n = features.rows();
  if (neighbors < 1 || n < neighbors + 1) {
    throw Error(ErrorCode::TooFewPoints,
                std::to_string(n) + " points cannot support " + std::to_string(neighbors) + " neighbours");
  }
  if (predictions.size() != n) throw Error(ErrorCode::LengthMismatch, "predictions do not match feature rows");
  if (!(sigma_f2 > 0.0)) throw Error(ErrorCode::NonPositiveScale, "sigma_f2 must be positive");

  const kernels::KnnTable table = kernels::knn(features, neighbors);
  double mean_d2 = 0.0;
  for (double d2 : table.sq_dist) mean_d2 += d2;
  mean_d2 /= static_cast<double>(table.sq_dist.size());
  // All points coincide: every feature weight is exp(0) whatever the scale.
  const double sigma_x2 = mean_d2 > 0.0 ? 2.0 * mean_d2 : 1.0;

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(table.sq_dist.size() * 2);
  for (Index i = 0; i < n; ++i) {
    for (int j = 0; j < neighbors; ++j) {
      const Index nb = table.neighbor(i, j);
      const double w = std::exp(-table.distance2(i, j) / sigma_x2);
      trips.emplace_back(i, nb, w);
      trips.emplace_back(nb, i, w);
    }
  }
  FeatureGraph g;
  g.affinity_x.resize(n, n);
  g.affinity_x.setFromTriplets(trips.begin(), trips.end(), [](double a, double b) { return std::max(a, b); });
  g.sigma_x2 = sigma_x2;
  g.neighbors = neighbors;
  return reweight_feature_graph(g, predictions, sigma_f2);
}

FeatureGraph reweight_feature_graph(const FeatureGraph& graph, const Vector& predictions, double sigma_f2) {
  if (predictions.size() != graph.affinity_x.rows()) throw Error(ErrorCode::LengthMismatch, "predictions do not match graph size");
  if (!(sigma_f2 > 0.0)) throw Error(ErrorCode::NonPositiveScale, "sigma_f2 must be positive");
  FeatureGraph g;
  g.affinity_x = graph.affinity_x;
  g.affinity = prediction_weighted(graph.affinity_x, predictions, sigma_f2);
  g.laplacian = normalized_laplacian(g.affinity);
  g.sigma_x2 = graph.sigma_x2;
  g.sigma_f2 = sigma_f2;
  g.neighbors = graph.neighbors;
  return g;
}

}  // namespace jmd
