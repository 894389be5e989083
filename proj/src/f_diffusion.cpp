#include "jmd/f_diffusion.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "jmd/error.hpp"
#include "jmd/kernels.hpp"

namespace jmd {
namespace {

constexpr double kTieTolerance = 1e-12;

// out = scale * C v / ||C v||, written in place.
template <class Column>
void put_unit_centered(const Vector& v, double scale, Column&& out) {
  out = v.array() - v.mean();
  const double norm = out.norm();
  if (norm < 1e-12 * std::max(1.0, v.norm())) throw Error(ErrorCode::ZeroVariance, "constant column in score problem");
  out *= scale / norm;
}

}  // namespace

void ScoreProblem::validate() const {
  if (aligned_refs.size() != weights.size()) {
    throw Error(ErrorCode::LengthMismatch, "score problem has " + std::to_string(aligned_refs.size()) +
                                               " references but " + std::to_string(weights.size()) + " weights");
  }
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error(ErrorCode::InvalidArgument, "delta must be a nonnegative finite value");
  for (size_t k = 0; k < aligned_refs.size(); ++k) {
    if (aligned_refs[k].size() != size()) throw Error(ErrorCode::LengthMismatch, "reference " + std::to_string(k) + " has wrong length");
    if (!(weights[k] > 0.0 && weights[k] <= 1.0)) throw Error(ErrorCode::InvalidArgument, "weights must lie in (0, 1]");
  }
}

Matrix build_s_matrix(const ScoreProblem& p) {
  p.validate();
  const Index m = static_cast<Index>(p.aligned_refs.size());
  Matrix s(p.size(), m + 1);
  put_unit_centered(p.f_current.values(), 1.0, s.col(0));
  for (Index k = 0; k < m; ++k) {
    put_unit_centered(p.aligned_refs[static_cast<size_t>(k)].values(), std::sqrt(p.delta * p.weights[static_cast<size_t>(k)]), s.col(k + 1));
  }
  return s;
}

double score(const ScoreProblem& p, const Vector& candidate) {
  p.validate();
  if (candidate.size() != p.size()) throw Error(ErrorCode::LengthMismatch, "candidate has wrong length");
  const double r0 = manifold_metric(candidate, p.f_current.values());
  double total = r0 * r0;
  for (size_t k = 0; k < p.aligned_refs.size(); ++k) {
    const double r = manifold_metric(candidate, p.aligned_refs[k].values());
    total += p.delta * p.weights[k] * r * r;
  }
  return total;
}

FStepResult diffuse_f_step(const ScoreProblem& p, const ManifoldPoint& f_initial) {
  if (f_initial.size() != p.size()) throw Error(ErrorCode::LengthMismatch, "f_initial has wrong length");
  const Matrix s = build_s_matrix(p);
  const Matrix gram = kernels::column_gram(s);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Vector& lambda = eig.eigenvalues();  // ascending
  const Index top = lambda.size() - 1;
  const double lambda_max = lambda[top];

  Index tie_count = 1;
  while (tie_count <= top && lambda_max - lambda[top - tie_count] <= kTieTolerance * std::max(1.0, lambda_max)) ++tie_count;

  Vector u;
  if (tie_count == 1) {
    Vector v = eig.eigenvectors().col(top);
    for (Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > 1e-12) {
        if (v[i] < 0.0) v = -v;
        break;
      }
    }
    u = s * v / std::sqrt(lambda_max);
  } else {
    // Orthonormal basis of the top eigenspace, then the member closest to f(0).
    Matrix basis(s.rows(), tie_count);
    for (Index j = 0; j < tie_count; ++j) basis.col(j) = s * eig.eigenvectors().col(top - j) / std::sqrt(lambda[top - j]);
    const Vector anchor = f_initial.values().array() - f_initial.values().mean();
    u = basis * (basis.transpose() * anchor);
    if (u.norm() < 1e-12) u = basis.col(0);
  }

  ManifoldPoint point = project_to_manifold(std::move(u));
  // Both are manifold points, so the metric is their dot product.
  if (point.values().dot(f_initial.values()) < 0.0) point = project_to_manifold(Vector(-point.values()));
  return FStepResult{std::move(point), lambda_max, tie_count > 1};
}

}  // namespace jmd
