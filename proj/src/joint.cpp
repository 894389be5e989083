#include "jmd/joint.hpp"

#include <cmath>
#include <exception>
#include <optional>

#include "jmd/error.hpp"

namespace jmd {

const char* to_string(BridgeSolver s) noexcept {
  switch (s) {
    case BridgeSolver::Auto: return "auto";
    case BridgeSolver::Implicit: return "implicit";
    case BridgeSolver::Explicit: return "explicit";
  }
  return "auto";
}

void DiffusionConfig::validate() const {
  if (!(sigma2 > 0.0) || !(sigma_f2 > 0.0) || !(sigma_k2 > 0.0))
    throw Error(ErrorCode::NonPositiveScale, "sigma2, sigma_f2 and sigma_k2 must be positive");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");
  if (!(delta_b > 0.0)) throw Error(ErrorCode::NonPositiveScale, "delta_b must be positive");
  if (neighbors < 1 || sparsity < 1 || max_outer < 1 || max_inner < 1)
    throw Error(ErrorCode::InvalidArgument, "N, K, T1 and T2 must be at least 1");
  if (!(improvement_eps >= 0.0)) throw Error(ErrorCode::InvalidArgument, "improvement_eps must be nonnegative");
}

bool DiffusionConfig::uses_implicit(Index n_main, Index n_ref) const {
  switch (bridge_solver) {
    case BridgeSolver::Implicit: return true;
    case BridgeSolver::Explicit: return false;
    case BridgeSolver::Auto: break;
  }
  return n_main <= kImplicitSizeLimit && n_ref <= kImplicitSizeLimit;
}

void ProblemInstance::validate() const {
  if (refs.empty()) throw Error(ErrorCode::InvalidArgument, "at least one reference required");
  if (main_features.rows() != n_main())
    throw Error(ErrorCode::LengthMismatch, "main features have " + std::to_string(main_features.rows()) + " rows, predictions " +
                                               std::to_string(n_main()));
  if (!validation.empty()) {
    if (validation.n != n_main()) throw Error(ErrorCode::LengthMismatch, "validation pairs do not index the main instances");
    validation.validate();
  }
  for (size_t k = 0; k < refs.size(); ++k) {
    const ReferenceData& r = refs[k];
    const std::string which = "reference " + std::to_string(k);
    if (r.features.rows() != r.predictions.size()) throw Error(ErrorCode::LengthMismatch, which + ": features and predictions differ in length");
    if (r.coupling.n_main != n_main() || r.coupling.n_ref != r.predictions.size())
      throw Error(ErrorCode::LengthMismatch, which + ": coupling labels have the wrong index space");
    if (r.coupling.pairs.empty()) throw Error(ErrorCode::InvalidArgument, which + ": no coupling labels");
    r.coupling.validate();
  }
}

namespace {

double population_variance(const Vector& v) { return (v.array() - v.mean()).square().mean(); }

double scaled(double relative, const Vector& v) {
  const double var = population_variance(v);
  return relative * (var > 0.0 ? var : 1.0);
}

// Alignment, with a constant aligned reference scoring zero.
double safe_alignment(const Vector& f, const Vector& g, const BridgeMatrix& b) {
  const Vector aligned = aligned_reference(b, g);
  if (is_constant(aligned)) return 0.0;
  const double rho = manifold_metric(f, aligned);
  return rho * rho;
}

template <class Fn>
void parallel_for_each(Index count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
#pragma omp parallel for schedule(dynamic, 1)
  for (Index k = 0; k < count; ++k) {
    try {
      fn(k);
    } catch (...) {
      errors[static_cast<size_t>(k)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

class JointDiffusion {
 public:
  JointDiffusion(const ProblemInstance& inst, const DiffusionConfig& cfg, std::span<const PreparedReference* const> prepared)
      : inst_(inst), cfg_(cfg), refs_(prepared.begin(), prepared.end()), f0_(project_to_manifold(inst.main_predictions)) {
    implicit_ = true;
    for (const PreparedReference* r : refs_) implicit_ = implicit_ && cfg.uses_implicit(inst.n_main(), r->graph.size());
    f_ = f0_.values();
    main_graph_ = build_feature_graph(inst.main_features, f_, cfg.neighbors, scaled(cfg.sigma_f2, f_));
  }

  BridgeInitResult initialize() {
    const Index m = static_cast<Index>(refs_.size());
    bridges_.clear();
    history_.assign(static_cast<size_t>(m), {});
    for (Index k = 0; k < m; ++k) bridges_.push_back(init_bridge(inst_.refs[static_cast<size_t>(k)].coupling, cfg_.sparsity));
    std::vector<double> alignment(static_cast<size_t>(m));
    parallel_for_each(m, [&](Index k) { alignment[static_cast<size_t>(k)] = bridge_phase(k); });
    return {bridges_, alignment};
  }

  JointResult run() {
    if (cfg_.auto_terminate && inst_.validation.empty())
      throw Error(ErrorCode::NoValidationPairs, "validation pairs are required for automatic termination");

    DiffusionState state;
    initialize();
    state.initial_bridges = bridges_;
    const bool scored = !inst_.validation.empty();
    double accuracy = scored ? ranking_accuracy(f_, inst_.validation) : 0.0;
    if (scored) state.accuracy_history.push_back(accuracy);
    // Without automatic termination steps are taken regardless, so keep the best.
    Vector best = f_;
    double best_accuracy = accuracy;

    for (int outer = 1; outer <= cfg_.max_outer; ++outer) {
      state.outer_iterations = outer;
      bool improved = false;
      for (int inner = 0; inner < cfg_.max_inner; ++inner) {
        const ManifoldPoint current = project_to_manifold(f_);
        std::vector<ManifoldPoint> aligned;
        for (size_t k = 0; k < refs_.size(); ++k) {
          const Vector a = aligned_reference(bridges_[k], inst_.refs[k].predictions);
          if (is_constant(a)) {
            ++state.constant_reference_skips;
            continue;
          }
          aligned.push_back(project_to_manifold(a));
        }
        std::vector<double> weights = task_weights(current, aligned, cfg_.sigma2);
        // An affinity that underflowed to zero contributes nothing to the score.
        for (size_t k = weights.size(); k-- > 0;) {
          if (weights[k] > 0.0) continue;
          weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(k));
          aligned.erase(aligned.begin() + static_cast<std::ptrdiff_t>(k));
        }
        ScoreProblem problem{current, std::move(aligned), weights, cfg_.delta};
        FStepResult step = diffuse_f_step(problem, f0_);
        if (step.degenerate_spectrum) ++state.degenerate_steps;

        const double next_accuracy = scored ? ranking_accuracy(step.point.values(), inst_.validation) : 0.0;
        if (cfg_.auto_terminate && !(next_accuracy > accuracy + cfg_.improvement_eps)) break;
        f_ = step.point.values();
        accuracy = next_accuracy;
        state.weights = std::move(weights);
        if (scored) state.accuracy_history.push_back(accuracy);
        if (scored && accuracy > best_accuracy) {
          best = f_;
          best_accuracy = accuracy;
        }
        ++state.f_steps;
        improved = true;
      }
      if (cfg_.auto_terminate && !improved) break;

      const Index m = static_cast<Index>(refs_.size());
      parallel_for_each(m, [&](Index k) { bridge_phase(k); });

      main_graph_ = reweight_feature_graph(main_graph_, f_, scaled(cfg_.sigma_f2, f_));
    }

    for (const auto& phases : history_)
      for (const auto& h : phases) state.bridge_steps += static_cast<int>(h.size()) - 1;
    state.f = scored ? best : f_;
    state.bridges = bridges_;
    state.alignment_history = history_;
    Vector refined = state.f;
    return JointResult{std::move(refined), std::move(state)};
  }

 private:
  BridgeMatrix bridge_step(Index k, const BridgeMatrix& b) const {
    const PreparedReference& ref = *refs_[static_cast<size_t>(k)];
    if (implicit_) return bridge_step_implicit(b, main_graph_, ref.graph, cfg_.delta_b);
    return bridge_step_explicit(b, main_graph_, ref.graph, cfg_.delta_b, cfg_.sparsity);
  }

  // Up to T2 steps on bridge k; stops (and discards the step) once the
  // alignment fails to improve. Returns the final alignment.
  double bridge_phase(Index k) {
    const Vector& g = inst_.refs[static_cast<size_t>(k)].predictions;
    BridgeMatrix& b = bridges_[static_cast<size_t>(k)];
    double align = safe_alignment(f_, g, b);
    auto& hist = history_[static_cast<size_t>(k)].emplace_back(1, align);
    for (int t = 0; t < cfg_.max_inner; ++t) {
      BridgeMatrix next = bridge_step(k, b);
      const double next_align = safe_alignment(f_, g, next);
      if (cfg_.auto_terminate && !(next_align > align + cfg_.improvement_eps)) break;
      b = std::move(next);
      align = next_align;
      hist.push_back(align);
    }
    return align;
  }

  const ProblemInstance& inst_;
  const DiffusionConfig& cfg_;
  std::vector<const PreparedReference*> refs_;
  ManifoldPoint f0_;
  Vector f_;
  bool implicit_ = false;
  FeatureGraph main_graph_;
  std::vector<BridgeMatrix> bridges_;
  std::vector<std::vector<std::vector<double>>> history_;
};

std::vector<PreparedReference> prepare_all(const ProblemInstance& inst, const DiffusionConfig& cfg) {
  std::vector<PreparedReference> out(inst.refs.size());
  parallel_for_each(static_cast<Index>(inst.refs.size()), [&](Index k) {
    const ReferenceData& r = inst.refs[static_cast<size_t>(k)];
    out[static_cast<size_t>(k)] = prepare_reference(r, cfg);
  });
  return out;
}

std::vector<const PreparedReference*> pointers(const std::vector<PreparedReference>& prepared) {
  std::vector<const PreparedReference*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  return ptrs;
}

}  // namespace

PreparedReference prepare_reference(const ReferenceData& ref, const DiffusionConfig& cfg) {
  return {build_feature_graph(ref.features, ref.predictions, cfg.neighbors, scaled(cfg.sigma_k2, ref.predictions))};
}

std::vector<double> task_weights(const ManifoldPoint& f, std::span<const ManifoldPoint> aligned_refs, double sigma2) {
  std::vector<double> w;
  w.reserve(aligned_refs.size());
  for (const ManifoldPoint& g : aligned_refs) w.push_back(task_affinity(manifold_metric(f, g), sigma2));
  return w;
}

JointResult run_joint_diffusion(const ProblemInstance& inst, const DiffusionConfig& cfg) {
  cfg.validate();
  inst.validate();
  const auto prepared = prepare_all(inst, cfg);
  const auto ptrs = pointers(prepared);
  return JointDiffusion(inst, cfg, ptrs).run();
}

JointResult run_joint_diffusion(const ProblemInstance& inst, const DiffusionConfig& cfg,
                                std::span<const PreparedReference* const> prepared) {
  cfg.validate();
  inst.validate();
  if (prepared.size() != inst.refs.size()) throw Error(ErrorCode::LengthMismatch, "one prepared graph per reference required");
  for (size_t k = 0; k < prepared.size(); ++k)
    if (prepared[k]->graph.size() != inst.refs[k].predictions.size())
      throw Error(ErrorCode::LengthMismatch, "prepared graph does not match reference " + std::to_string(k));
  return JointDiffusion(inst, cfg, prepared).run();
}

BridgeInitResult initialize_bridges(const ProblemInstance& inst, const DiffusionConfig& cfg) {
  cfg.validate();
  inst.validate();
  const auto prepared = prepare_all(inst, cfg);
  const auto ptrs = pointers(prepared);
  return JointDiffusion(inst, cfg, ptrs).initialize();
}

MetricMatrixReport build_metric_report(const Vector& f, std::span<const BridgeMatrix> bridges, const ProblemInstance& inst) {
  if (bridges.size() != inst.refs.size()) throw Error(ErrorCode::LengthMismatch, "one bridge per reference required");
  const Index m = static_cast<Index>(bridges.size());
  std::vector<Vector> v;
  v.push_back(f);
  for (Index k = 0; k < m; ++k) v.push_back(aligned_reference(bridges[static_cast<size_t>(k)], inst.refs[static_cast<size_t>(k)].predictions));
  std::vector<char> usable(v.size());
  for (size_t i = 0; i < v.size(); ++i) usable[i] = !is_constant(v[i]);

  MetricMatrixReport report{Matrix::Identity(m + 1, m + 1)};
  for (Index i = 0; i <= m; ++i) {
    for (Index j = i + 1; j <= m; ++j) {
      const double rho = usable[static_cast<size_t>(i)] && usable[static_cast<size_t>(j)]
                             ? manifold_metric(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)])
                             : 0.0;
      report.values(i, j) = rho;
      report.values(j, i) = rho;
    }
  }
  return report;
}

MetricMatrixReport build_metric_report(const DiffusionState& state, const ProblemInstance& inst) {
  return build_metric_report(state.f, state.bridges, inst);
}

}  // namespace jmd
