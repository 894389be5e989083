#include "jmd/tune.hpp"

#include <algorithm>
#include <exception>
#include <limits>

#include "jmd/error.hpp"

namespace jmd {
namespace {

double best_accuracy(const ProblemInstance& inst, const DiffusionConfig& cfg) {
  const JointResult r = run_joint_diffusion(inst, cfg);
  return r.state.accuracy_history.empty() ? 0.0
                                          : *std::max_element(r.state.accuracy_history.begin(), r.state.accuracy_history.end());
}

// Evaluates score(i) for every grid point (concurrently) and returns the
// first argmax. Points that fail on a size precondition score -inf.
template <class Fn>
size_t argmax_over(size_t count, Fn&& score) {
  std::vector<double> values(count, -std::numeric_limits<double>::infinity());
  std::vector<std::exception_ptr> errors(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < static_cast<long>(count); ++i) {
    try {
      values[static_cast<size_t>(i)] = score(static_cast<size_t>(i));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewPoints) errors[static_cast<size_t>(i)] = std::current_exception();
    } catch (...) {
      errors[static_cast<size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  size_t best = 0;
  for (size_t i = 1; i < count; ++i)
    if (values[i] > values[best]) best = i;
  if (values[best] == -std::numeric_limits<double>::infinity())
    throw Error(ErrorCode::TooFewPoints, "no grid point fits the instance sizes");
  return best;
}

}  // namespace

DiffusionConfig tune_hyperparameters(const ProblemInstance& inst, const TuneGrid& grid, const DiffusionConfig& base) {
  if (grid.sigma2.empty() || grid.delta.empty() || grid.neighbors.empty() || grid.sparsity.empty() || grid.prediction_scale.empty())
    throw Error(ErrorCode::InvalidArgument, "every tuning grid needs at least one value");
  if (inst.validation.empty()) throw Error(ErrorCode::NoValidationPairs, "tuning needs validation pairs");
  inst.validate();

  struct GraphPoint {
    int neighbors, sparsity;
    double scale;
  };
  std::vector<GraphPoint> stage1;
  for (int n : grid.neighbors)
    for (int k : grid.sparsity)
      for (double s : grid.prediction_scale) stage1.push_back({n, k, s});

  DiffusionConfig cfg = base;
  if (stage1.size() > 1) {
    const size_t pick = argmax_over(stage1.size(), [&](size_t i) {
      DiffusionConfig c = base;
      c.neighbors = stage1[i].neighbors;
      c.sparsity = stage1[i].sparsity;
      c.sigma_f2 = c.sigma_k2 = stage1[i].scale;
      const BridgeInitResult init = initialize_bridges(inst, c);
      return *std::max_element(init.alignment.begin(), init.alignment.end());
    });
    stage1 = {stage1[pick]};
  }
  cfg.neighbors = stage1.front().neighbors;
  cfg.sparsity = stage1.front().sparsity;
  cfg.sigma_f2 = cfg.sigma_k2 = stage1.front().scale;

  std::vector<std::pair<double, double>> stage2;
  for (double s2 : grid.sigma2)
    for (double d : grid.delta) stage2.emplace_back(s2, d);
  if (stage2.size() > 1) {
    const size_t pick = argmax_over(stage2.size(), [&](size_t i) {
      DiffusionConfig c = cfg;
      c.sigma2 = stage2[i].first;
      c.delta = stage2[i].second;
      return best_accuracy(inst, c);
    });
    stage2 = {stage2[pick]};
  }
  cfg.sigma2 = stage2.front().first;
  cfg.delta = stage2.front().second;
  cfg.validate();
  return cfg;
}

Matrix accuracy_surface(const ProblemInstance& inst, const DiffusionConfig& base, const std::vector<double>& sigma2,
                        const std::vector<double>& delta) {
  Matrix surface(static_cast<Index>(sigma2.size()), static_cast<Index>(delta.size()));
  const long total = static_cast<long>(sigma2.size() * delta.size());
  std::vector<std::exception_ptr> errors(static_cast<size_t>(total));
#pragma omp parallel for schedule(dynamic, 1)
  for (long idx = 0; idx < total; ++idx) {
    const size_t i = static_cast<size_t>(idx) / delta.size(), j = static_cast<size_t>(idx) % delta.size();
    try {
      DiffusionConfig c = base;
      c.sigma2 = sigma2[i];
      c.delta = delta[j];
      surface(static_cast<Index>(i), static_cast<Index>(j)) = best_accuracy(inst, c);
    } catch (...) {
      errors[static_cast<size_t>(idx)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return surface;
}

}  // namespace jmd
