#include "jmd/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jmd/error.hpp"

namespace jmd {
namespace {

void require_finite(const Vector& v) {
  if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, "prediction vector has non-finite entries");
}

double centered_norm(const Vector& v, Vector& centered) {
  centered = v.array() - v.mean();
  centered.array() -= centered.mean();  // second pass removes the rounding left by a large offset
  return centered.norm();
}

}  // namespace

bool is_constant(const Vector& v) {
  Vector c;
  return centered_norm(v, c) < 1e-12 * std::max(1.0, v.norm());
}

ManifoldPoint project_to_manifold(Vector&& v) {
  if (v.size() < 2) throw Error(ErrorCode::TooFewPoints, "prediction vector needs at least two entries");
  require_finite(v);
  const double raw_norm = v.norm();
  v.array() -= v.mean();
  v.array() -= v.mean();
  const double norm = v.norm();
  if (norm < 1e-12 * std::max(1.0, raw_norm)) throw Error(ErrorCode::ZeroVariance, "constant prediction vector");
  v /= norm;
  return ManifoldPoint(std::move(v));
}

ManifoldPoint project_to_manifold(const Vector& v) { return project_to_manifold(Vector(v)); }

double manifold_metric(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "metric between vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  Vector ca, cb;
  const double na = centered_norm(a, ca);
  const double nb = centered_norm(b, cb);
  if (na < 1e-12 * std::max(1.0, a.norm()) || nb < 1e-12 * std::max(1.0, b.norm())) {
    throw Error(ErrorCode::ZeroVariance, "metric against a constant prediction vector");
  }
  return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

double task_affinity(double rho, double sigma2) {
  if (!(sigma2 > 0.0)) throw Error(ErrorCode::NonPositiveScale, "task affinity scale must be positive");
  return std::exp(-(1.0 - rho * rho) / sigma2);
}

}  // namespace jmd
