#pragma once

#include <vector>

#include "jmd/joint.hpp"

namespace jmd {

struct TuneGrid {
  std::vector<double> sigma2{0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
  std::vector<double> delta{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
  std::vector<int> neighbors{5, 10, 20};
  std::vector<int> sparsity{3, 5, 10};
  // Used for both sigma_f2 and sigma_k2 (relative to prediction variance).
  std::vector<double> prediction_scale{0.01, 0.1, 1.0};
};

/// Two-stage grid search. Stage 1 picks (N, K, sigma_f2 = sigma_k2) by the
/// largest alignment score over references after bridge initialization;
/// stage 2 keeps those fixed and picks (sigma2, delta) by the validation
/// accuracy of a full run. Ties go to the earliest grid point.
DiffusionConfig tune_hyperparameters(const ProblemInstance& inst, const TuneGrid& grid, const DiffusionConfig& base = {});

/// Best validation accuracy of a full run for each (sigma2[i], delta[j]).
Matrix accuracy_surface(const ProblemInstance& inst, const DiffusionConfig& base, const std::vector<double>& sigma2,
                        const std::vector<double>& delta);

}  // namespace jmd
