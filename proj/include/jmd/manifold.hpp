#pragma once

// Prediction vectors live on a Hilbert sphere: centered, unit-norm. Rankings
// are invariant to the scale and shift that projection quotients out, so all
// comparisons between predictors go through the centered cosine below.

#include "jmd/types.hpp"

namespace jmd {

/// A centered, unit-norm prediction vector. Only obtainable through
/// project_to_manifold (or the f-diffusion step, which produces one).
class ManifoldPoint {
 public:
  const Vector& values() const noexcept { return values_; }
  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

 private:
  explicit ManifoldPoint(Vector values) : values_(std::move(values)) {}
  friend ManifoldPoint project_to_manifold(Vector&& v);

  Vector values_;
};

/// True when ||Cv|| < 1e-12 * max(1, ||v||), i.e. v cannot induce a ranking.
bool is_constant(const Vector& v);

/// (v - mean(v)) / ||v - mean(v)||. Throws ZeroVariance for constant v.
ManifoldPoint project_to_manifold(const Vector& v);
ManifoldPoint project_to_manifold(Vector&& v);  // reuses the buffer

/// Centered cosine (Ca)^T Cb / (||Ca|| ||Cb||).
double manifold_metric(const Vector& a, const Vector& b);
inline double manifold_metric(const ManifoldPoint& a, const ManifoldPoint& b) {
  return manifold_metric(a.values(), b.values());
}

/// Task-graph edge weight exp(-(1 - rho^2) / sigma2); increasing in |rho|.
double task_affinity(double rho, double sigma2);

}  // namespace jmd
