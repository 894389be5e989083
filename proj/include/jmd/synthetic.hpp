#pragma once

// Twelve-task toy world with known task structure: two groups of four
// linearly dependent linear rankers plus four unrelated ones, observed both
// on a shared sample (coupled) and through per-task PCA features on random
// half-size subsamples (decoupled) that share their first rows.

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "jmd/joint.hpp"

namespace jmd {

struct ToyConfig {
  int n_tasks = 12;
  int dim = 100;
  Index n = 1000;
  // Half-open, 0-based task ranges that share a rank-one weight matrix.
  std::array<std::pair<int, int>, 2> group_spans{{{0, 4}, {4, 8}}};
  double noise_std = 0.2;
  Index n_coupled = 30;
  double variance_retained = 0.95;
  std::uint64_t seed = 0;

  void validate() const;
  int group_of(int task) const;  // -1 for ungrouped tasks
};

struct PcaResult {
  Vector mean;
  Matrix components;  // columns are principal directions, by decreasing variance
  Vector eigenvalues;  // decreasing
  Index retained = 0;  // fewest leading components reaching the variance fraction
};

PcaResult pca_extractor(const Matrix& data, double variance_retained);

/// argmin_w ||X w - y||^2 via the normal equations; falls back to a ridge of
/// 1e-8 * trace(X^T X) / d when X^T X is (numerically) rank deficient.
Vector least_squares_fit(const Matrix& features, const Vector& targets);

struct DecoupledTask {
  std::vector<Index> source_rows;  // rows of the shared sample; first n_coupled are 0..n_coupled-1
  Vector feature_mean;             // PCA extractor: (x - mean) * projection
  Matrix projection;               // dim x d_k
  Index retained_dims = 0;         // d_95 of the subsample
  Matrix features;                 // |source_rows| x d_k
  Vector ls_weights;
  Vector predictions;
};

struct ToyWorld {
  ToyConfig config;
  Matrix weights;  // dim x n_tasks, column k is the ground-truth weight vector
  Matrix inputs;   // n x dim
  Matrix coupled;  // n x n_tasks noisy coupled observations
  std::vector<DecoupledTask> decoupled;

  Vector ground_truth(int task) const;            // noiseless, on all n inputs
  Vector decoupled_ground_truth(int task) const;  // noiseless, on the task's subsample
};

ToyWorld generate_toy_world(const ToyConfig& cfg);

/// Coupling between two tasks: their shared first n_coupled rows.
CouplingLabels toy_coupling(const ToyWorld& world, int main_task, int ref_task);

/// Problem with `main_task` as the main predictor and every other task as a
/// reference (in increasing task order). Validation pairs are drawn among the
/// uncoupled main instances and ordered by the noiseless ground truth.
ProblemInstance toy_problem(const ToyWorld& world, int main_task, Index n_validation_pairs = 500);

struct ToyTaskOutcome {
  int outer_iterations = 0;
  double metric_initial = 0.0;  // <f0, ground truth>_M
  double metric_refined = 0.0;  // <refined f, ground truth>_M
  double accuracy_initial = 0.0;
  double accuracy_refined = 0.0;
  int degenerate_steps = 0;
  Vector refined;
};

struct ToyExperimentResult {
  MetricMatrixReport ground_truth;  // coupled observations
  MetricMatrixReport initial;       // decoupled f0 with the bridges after initialization
  MetricMatrixReport refined;       // refined f with the final bridges
  std::vector<ToyTaskOutcome> tasks;
  std::vector<DiffusionConfig> configs;
};

/// Runs every task as the main predictor against the rest. With no config the
/// hyperparameters are tuned per task on the default grids.
ToyExperimentResult run_toy_experiment(const ToyConfig& cfg, const std::optional<DiffusionConfig>& dcfg);
ToyExperimentResult run_toy_experiment(const ToyWorld& world, const std::optional<DiffusionConfig>& dcfg);

}  // namespace jmd
