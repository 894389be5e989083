#pragma once

// One implicit-Euler step of task-graph diffusion that moves only the main
// predictor. The step maximizes
//   O(p) = <p, f>^2 + delta * sum_k w_k <p, g_k>^2
// over the manifold, which is the top left singular vector of
//   S = [ Cf/|Cf|, sqrt(delta w_1) Cg_1/|Cg_1|, ..., sqrt(delta w_m) Cg_m/|Cg_m| ].
// Only the (m+1)x(m+1) Gram S^T S is decomposed, so a step costs O(m^2 n).

#include <vector>

#include "jmd/manifold.hpp"

namespace jmd {

struct ScoreProblem {
  ManifoldPoint f_current;
  std::vector<ManifoldPoint> aligned_refs;
  std::vector<double> weights;  // w_k in (0, 1]
  double delta = 0.0;

  Index size() const noexcept { return f_current.size(); }
  void validate() const;
};

Matrix build_s_matrix(const ScoreProblem& p);

/// O(candidate), evaluated through manifold metrics.
double score(const ScoreProblem& p, const Vector& candidate);

struct FStepResult {
  ManifoldPoint point;
  double top_eigenvalue = 0.0;
  /// The top eigenvalue of S^T S was (numerically) repeated; the returned
  /// point is the member of that eigenspace closest to f_initial.
  bool degenerate_spectrum = false;
};

/// Maximizer of the score, with the sign chosen so that its metric against
/// f_initial (the pre-diffusion predictor) is nonnegative.
FStepResult diffuse_f_step(const ScoreProblem& p, const ManifoldPoint& f_initial);

}  // namespace jmd
