#include "jmd/synthetic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <exception>
#include <numeric>
#include <random>

#include "jmd/error.hpp"
#include "jmd/tune.hpp"

namespace jmd {

void ToyConfig::validate() const {
  if (n_tasks < 2 || dim < 1) throw Error(ErrorCode::InvalidArgument, "toy world needs >= 2 tasks and dim >= 1");
  if (!(variance_retained > 0.0 && variance_retained <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "variance_retained must lie in (0, 1]");
  if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_std must be nonnegative");
  for (const auto& [b, e] : group_spans)
    if (b < 0 || e > n_tasks || b >= e) throw Error(ErrorCode::InvalidArgument, "group span outside the task range");
  if (group_spans[0].second > group_spans[1].first && group_spans[1].second > group_spans[0].first)
    throw Error(ErrorCode::InvalidArgument, "group spans overlap");
  if (n_coupled < 1 || n_coupled > n / 2) throw Error(ErrorCode::InvalidArgument, "n_coupled must lie in [1, n/2]");
}

int ToyConfig::group_of(int task) const {
  for (int g = 0; g < 2; ++g)
    if (task >= group_spans[static_cast<size_t>(g)].first && task < group_spans[static_cast<size_t>(g)].second) return g;
  return -1;
}

PcaResult pca_extractor(const Matrix& data, double variance_retained) {
  if (data.rows() < 2) throw Error(ErrorCode::TooFewPoints, "PCA needs at least two rows");
  if (!(variance_retained > 0.0 && variance_retained <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "variance_retained must lie in (0, 1]");
  PcaResult out;
  out.mean = data.colwise().mean().transpose();
  const Matrix centered = data.rowwise() - out.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(data.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const Index d = cov.rows();
  out.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  out.components = eig.eigenvectors().rowwise().reverse();
  const double total = out.eigenvalues.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateData, "data has zero covariance");

  double cumulative = 0.0;
  out.retained = d;
  for (Index i = 0; i < d; ++i) {
    cumulative += out.eigenvalues[i];
    if (cumulative / total >= variance_retained) {
      out.retained = i + 1;
      break;
    }
  }
  return out;
}

Vector least_squares_fit(const Matrix& features, const Vector& targets) {
  if (features.rows() != targets.size()) throw Error(ErrorCode::LengthMismatch, "features and targets differ in length");
  const Index d = features.cols();
  Matrix gram = features.transpose() * features;
  const Vector rhs = features.transpose() * targets;

  Eigen::LDLT<Matrix> ldlt(gram);
  const Vector diag = ldlt.vectorD().cwiseAbs();
  const bool deficient = ldlt.info() != Eigen::Success || features.rows() < d || diag.size() == 0 ||
                         diag.minCoeff() <= 1e-12 * std::max(diag.maxCoeff(), 1e-300);
  if (!deficient) return ldlt.solve(rhs);

  const double ridge = 1e-8 * gram.trace() / static_cast<double>(std::max<Index>(d, 1));
  gram.diagonal().array() += ridge > 0.0 ? ridge : 1e-8;
  return gram.ldlt().solve(rhs);
}

Vector ToyWorld::ground_truth(int task) const { return inputs * weights.col(task); }

Vector ToyWorld::decoupled_ground_truth(int task) const {
  const auto& rows = decoupled[static_cast<size_t>(task)].source_rows;
  Vector out(static_cast<Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) out[static_cast<Index>(i)] = inputs.row(rows[i]).dot(weights.col(task));
  return out;
}

ToyWorld generate_toy_world(const ToyConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  ToyWorld w;
  w.config = cfg;
  w.weights.resize(cfg.dim, cfg.n_tasks);
  std::vector<char> assigned(static_cast<size_t>(cfg.n_tasks), 0);
  for (const auto& [begin, end] : cfg.group_spans) {
    Vector left(cfg.dim);
    for (Index i = 0; i < cfg.dim; ++i) left[i] = unif(rng);
    for (int t = begin; t < end; ++t) {
      w.weights.col(t) = left * unif(rng);
      assigned[static_cast<size_t>(t)] = 1;
    }
  }
  for (int t = 0; t < cfg.n_tasks; ++t) {
    if (assigned[static_cast<size_t>(t)]) continue;
    for (Index i = 0; i < cfg.dim; ++i) w.weights(i, t) = unif(rng);
  }

  w.inputs.resize(cfg.n, cfg.dim);
  for (Index r = 0; r < cfg.n; ++r)
    for (Index c = 0; c < cfg.dim; ++c) w.inputs(r, c) = unif(rng);

  w.coupled = w.inputs * w.weights;
  for (int t = 0; t < cfg.n_tasks; ++t)
    for (Index r = 0; r < cfg.n; ++r) w.coupled(r, t) += cfg.noise_std * noise(rng);

  const Index sub = cfg.n / 2;
  for (int t = 0; t < cfg.n_tasks; ++t) {
    DecoupledTask task;
    std::vector<Index> pool(static_cast<size_t>(cfg.n - cfg.n_coupled));
    std::iota(pool.begin(), pool.end(), cfg.n_coupled);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<size_t>(sub - cfg.n_coupled));
    std::sort(pool.begin(), pool.end());
    task.source_rows.resize(static_cast<size_t>(cfg.n_coupled));
    std::iota(task.source_rows.begin(), task.source_rows.end(), Index{0});
    task.source_rows.insert(task.source_rows.end(), pool.begin(), pool.end());

    Matrix raw(sub, cfg.dim);
    Vector target(sub);
    for (Index i = 0; i < sub; ++i) {
      raw.row(i) = w.inputs.row(task.source_rows[static_cast<size_t>(i)]);
      target[i] = w.coupled(task.source_rows[static_cast<size_t>(i)], t);
    }
    const PcaResult pca = pca_extractor(raw, cfg.variance_retained);
    task.retained_dims = pca.retained;
    const Index dims = std::uniform_int_distribution<Index>(pca.retained, cfg.dim)(rng);
    task.feature_mean = pca.mean;
    task.projection = pca.components.leftCols(dims);
    task.features = (raw.rowwise() - pca.mean.transpose()) * task.projection;
    task.ls_weights = least_squares_fit(task.features, target);
    task.predictions = task.features * task.ls_weights;
    for (Index i = 0; i < sub; ++i) task.predictions[i] += cfg.noise_std * noise(rng);
    w.decoupled.push_back(std::move(task));
  }
  return w;
}

CouplingLabels toy_coupling(const ToyWorld& world, int main_task, int ref_task) {
  CouplingLabels labels;
  labels.n_main = static_cast<Index>(world.decoupled[static_cast<size_t>(main_task)].source_rows.size());
  labels.n_ref = static_cast<Index>(world.decoupled[static_cast<size_t>(ref_task)].source_rows.size());
  for (Index i = 0; i < world.config.n_coupled; ++i) labels.pairs.emplace_back(i, i);
  return labels;
}

ProblemInstance toy_problem(const ToyWorld& world, int main_task, Index n_validation_pairs) {
  const auto& main = world.decoupled[static_cast<size_t>(main_task)];
  ProblemInstance inst;
  inst.main_features = main.features;
  inst.main_predictions = main.predictions;
  inst.validation.n = main.predictions.size();

  const Vector truth = world.decoupled_ground_truth(main_task);
  std::seed_seq seq{static_cast<std::uint64_t>(world.config.seed), static_cast<std::uint64_t>(main_task), std::uint64_t{0x76a1}};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<Index> pick(world.config.n_coupled, inst.validation.n - 1);
  while (static_cast<Index>(inst.validation.size()) < n_validation_pairs) {
    const Index a = pick(rng), b = pick(rng);
    if (a == b || truth[a] == truth[b]) continue;
    inst.validation.pairs.emplace_back(truth[a] > truth[b] ? a : b, truth[a] > truth[b] ? b : a);
  }

  for (int t = 0; t < world.config.n_tasks; ++t) {
    if (t == main_task) continue;
    const auto& ref = world.decoupled[static_cast<size_t>(t)];
    inst.refs.push_back(ReferenceData{ref.features, ref.predictions, toy_coupling(world, main_task, t)});
  }
  return inst;
}

ToyExperimentResult run_toy_experiment(const ToyConfig& cfg, const std::optional<DiffusionConfig>& dcfg) {
  return run_toy_experiment(generate_toy_world(cfg), dcfg);
}

ToyExperimentResult run_toy_experiment(const ToyWorld& world, const std::optional<DiffusionConfig>& dcfg) {
  const int tasks = world.config.n_tasks;
  ToyExperimentResult out;
  out.ground_truth.values = Matrix::Identity(tasks, tasks);
  out.initial.values = Matrix::Identity(tasks, tasks);
  out.refined.values = Matrix::Identity(tasks, tasks);
  out.tasks.resize(static_cast<size_t>(tasks));
  out.configs.resize(static_cast<size_t>(tasks));

  for (int k = 0; k < tasks; ++k)
    for (int l = k + 1; l < tasks; ++l) {
      const double rho = manifold_metric(Vector(world.coupled.col(k)), Vector(world.coupled.col(l)));
      out.ground_truth.values(k, l) = out.ground_truth.values(l, k) = rho;
    }

  // Reference graphs depend only on the reference task, so with a fixed
  // config they are built once and shared by all problems.
  std::vector<PreparedReference> shared;
  if (dcfg) {
    dcfg->validate();
    shared.resize(static_cast<size_t>(tasks));
    std::vector<std::exception_ptr> errors(static_cast<size_t>(tasks));
#pragma omp parallel for schedule(dynamic, 1)
    for (int t = 0; t < tasks; ++t) {
      try {
        const auto& d = world.decoupled[static_cast<size_t>(t)];
        shared[static_cast<size_t>(t)] = prepare_reference(ReferenceData{d.features, d.predictions, {}}, *dcfg);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<std::exception_ptr> errors(static_cast<size_t>(tasks));
#pragma omp parallel for schedule(dynamic, 1)
  for (int k = 0; k < tasks; ++k) {
    try {
      const ProblemInstance inst = toy_problem(world, k);
      const DiffusionConfig cfg = dcfg ? *dcfg : tune_hyperparameters(inst, TuneGrid{});
      JointResult res;
      if (dcfg) {
        std::vector<const PreparedReference*> prepared;
        for (int t = 0; t < tasks; ++t)
          if (t != k) prepared.push_back(&shared[static_cast<size_t>(t)]);
        res = run_joint_diffusion(inst, cfg, prepared);
      } else {
        res = run_joint_diffusion(inst, cfg);
      }

      const Vector f0 = project_to_manifold(inst.main_predictions).values();
      const Matrix initial = build_metric_report(f0, res.state.initial_bridges, inst).values;
      const Matrix refined = build_metric_report(res.state, inst).values;
      Index col = 1;
      for (int l = 0; l < tasks; ++l) {
        if (l == k) continue;
        out.initial.values(k, l) = initial(0, col);
        out.refined.values(k, l) = refined(0, col);
        ++col;
      }

      const Vector truth = world.decoupled_ground_truth(k);
      ToyTaskOutcome& o = out.tasks[static_cast<size_t>(k)];
      o.outer_iterations = res.state.outer_iterations;
      o.metric_initial = manifold_metric(f0, truth);
      o.metric_refined = manifold_metric(res.refined, truth);
      o.accuracy_initial = res.state.accuracy_history.front();
      o.accuracy_refined = res.state.accuracy_history.back();
      o.degenerate_steps = res.state.degenerate_steps;
      o.refined = res.refined;
      out.configs[static_cast<size_t>(k)] = cfg;
    } catch (...) {
      errors[static_cast<size_t>(k)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace jmd
