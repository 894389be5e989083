#pragma once

// Joint diffusion: alternate f-diffusion (refine the main predictor against
// bridge-aligned references) with B-diffusion (refine the bridges against the
// current predictor), stopping on validation accuracy and alignment score.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "jmd/bridge.hpp"
#include "jmd/f_diffusion.hpp"
#include "jmd/rank.hpp"

namespace jmd {

enum class BridgeSolver { Auto, Implicit, Explicit };

const char* to_string(BridgeSolver s) noexcept;

struct DiffusionConfig {
  double sigma2 = 0.05;   // task-affinity scale
  double delta = 0.5;     // f-diffusion step
  double delta_b = 1e-5;  // bridge diffusion step
  // Prediction-gap scales of the anisotropic feature graphs, in units of the
  // variance of the main (sigma_f2) or reference (sigma_k2) predictions.
  double sigma_f2 = 0.01;
  double sigma_k2 = 0.01;
  int neighbors = 20;  // N
  int sparsity = 5;    // K, bridge nonzeros per row
  int max_outer = 20;  // T1
  int max_inner = 20;  // T2
  double improvement_eps = 1e-6;
  // Auto: dense implicit solve when both sides have <= 10,000 instances.
  BridgeSolver bridge_solver = BridgeSolver::Auto;
  bool auto_terminate = true;

  void validate() const;
  bool uses_implicit(Index n_main, Index n_ref) const;
};

struct ReferenceData {
  Matrix features;
  Vector predictions;
  CouplingLabels coupling;  // main index -> reference index
};

struct ProblemInstance {
  Matrix main_features;
  Vector main_predictions;
  RankPairs validation;
  std::vector<ReferenceData> refs;

  Index n_main() const noexcept { return main_predictions.size(); }
  void validate() const;
};

/// A reference's feature graph. Depends only on the reference data and the
/// config, so it can be shared between problems that use the same reference.
struct PreparedReference {
  FeatureGraph graph;
};

PreparedReference prepare_reference(const ReferenceData& ref, const DiffusionConfig& cfg);

struct DiffusionState {
  Vector f;  // best-so-far main predictor, a manifold point
  std::vector<BridgeMatrix> initial_bridges;  // after the bridge-initialization phase
  std::vector<BridgeMatrix> bridges;
  std::vector<double> weights;  // task affinities used by the last accepted f-step
  int outer_iterations = 0;
  int f_steps = 0;
  int bridge_steps = 0;
  int degenerate_steps = 0;
  int constant_reference_skips = 0;
  std::vector<double> accuracy_history;                // accuracy of Proj(f0), then each accepted f-step
  // [reference][bridge phase]: alignment against the f of that phase on entry,
  // then after each accepted step. Increasing within a phase only, since f
  // moves between phases.
  std::vector<std::vector<std::vector<double>>> alignment_history;
};

struct JointResult {
  Vector refined;
  DiffusionState state;
};

/// w_k = task_affinity(<f, g_k>_M, sigma2).
std::vector<double> task_weights(const ManifoldPoint& f, std::span<const ManifoldPoint> aligned_refs, double sigma2);

JointResult run_joint_diffusion(const ProblemInstance& inst, const DiffusionConfig& cfg);
JointResult run_joint_diffusion(const ProblemInstance& inst, const DiffusionConfig& cfg,
                                std::span<const PreparedReference* const> prepared);

/// Only the bridge-initialization phase: labels, then up to T2 bridge steps
/// per reference while the alignment score keeps increasing.
struct BridgeInitResult {
  std::vector<BridgeMatrix> bridges;
  std::vector<double> alignment;
};
BridgeInitResult initialize_bridges(const ProblemInstance& inst, const DiffusionConfig& cfg);

/// Pairwise manifold metrics among {f, B_1 g_1, ..., B_m g_m}, all on the main
/// instance set. Entries involving a constant aligned reference are 0; the
/// diagonal is 1.
struct MetricMatrixReport {
  Matrix values;
};
MetricMatrixReport build_metric_report(const DiffusionState& state, const ProblemInstance& inst);
MetricMatrixReport build_metric_report(const Vector& f, std::span<const BridgeMatrix> bridges, const ProblemInstance& inst);

}  // namespace jmd
