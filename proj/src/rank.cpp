#include "jmd/rank.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "jmd/error.hpp"

namespace jmd {

void RankPairs::validate() const {
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw Error(ErrorCode::IndexOutOfRange, "rank pair (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    if (i == j) throw Error(ErrorCode::InvalidArgument, "rank pair compares instance " + std::to_string(i) + " with itself");
  }
}

double rank_loss(double fi, double fj) {
  const double slack = std::max(1.0 - (fi - fj), 0.0);
  return slack * slack;
}

double ranking_accuracy(const Vector& predictions, const RankPairs& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyPairs, "ranking accuracy needs at least one pair");
  if (predictions.size() != pairs.n) throw Error(ErrorCode::LengthMismatch, "predictions do not match pair index space");
  pairs.validate();
  size_t correct = 0;
  for (const auto& [i, j] : pairs.pairs)
    if (predictions[i] > predictions[j]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double rank_objective(const Matrix& features, const RankPairs& pairs, const Vector& w, double lambda_s) {
  const Vector f = features * w;
  double total = lambda_s * w.squaredNorm();
  for (const auto& [i, j] : pairs.pairs) total += rank_loss(f[i], f[j]);
  return total;
}

namespace {

Vector objective_gradient(const Matrix& features, const RankPairs& pairs, const Vector& w, double lambda_s) {
  const Vector f = features * w;
  Vector grad = 2.0 * lambda_s * w;
  for (const auto& [i, j] : pairs.pairs) {
    const double slack = 1.0 - (f[i] - f[j]);
    if (slack > 0.0) grad -= 2.0 * slack * (features.row(i) - features.row(j)).transpose();
  }
  return grad;
}

void check_training_inputs(const Matrix& features, const RankPairs& train, double lambda_s) {
  if (train.empty()) throw Error(ErrorCode::EmptyPairs, "training needs at least one rank pair");
  if (features.rows() < 2 || features.cols() < 1) throw Error(ErrorCode::TooFewPoints, "training needs n >= 2 and d >= 1");
  if (train.n != features.rows()) throw Error(ErrorCode::LengthMismatch, "pairs do not index the feature rows");
  if (!(lambda_s >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda_s must be nonnegative");
  train.validate();
}

}  // namespace

TrainReport fit_linear_ranker(const Matrix& features, const RankPairs& train, double lambda_s, const TrainOptions& opts) {
  check_training_inputs(features, train, lambda_s);
  TrainReport report;
  Vector w = Vector::Zero(features.cols());
  double obj = rank_objective(features, train, w, lambda_s);
  report.objective_history.push_back(obj);
  double step = 1.0;

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    const Vector grad = objective_gradient(features, train, w, lambda_s);
    const double gnorm2 = grad.squaredNorm();
    report.gradient_norm = std::sqrt(gnorm2);
    if (report.gradient_norm < opts.gradient_tolerance) break;

    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving) {
      const Vector trial = w - step * grad;
      const double trial_obj = rank_objective(features, train, trial, lambda_s);
      if (trial_obj <= obj - 1e-4 * step * gnorm2) {
        w = trial;
        obj = trial_obj;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable descent step left
    report.objective_history.push_back(obj);
    report.iterations = iter + 1;
    step *= 2.0;
  }
  report.gradient_norm = objective_gradient(features, train, w, lambda_s).norm();
  report.ranker = LinearRanker{std::move(w), lambda_s};
  return report;
}

LinearRanker train_linear_ranker(const Matrix& features, const RankPairs& train, double lambda_s, const TrainOptions& opts) {
  return fit_linear_ranker(features, train, lambda_s, opts).ranker;
}

LinearRanker train_linear_ranker(const Matrix& features, const RankPairs& train, std::span<const double> lambda_grid,
                                 const RankPairs& validation, const TrainOptions& opts) {
  if (lambda_grid.empty()) throw Error(ErrorCode::InvalidArgument, "empty lambda grid");
  if (lambda_grid.size() > 1 && validation.empty()) throw Error(ErrorCode::NoValidationPairs, "lambda selection needs validation pairs");
  LinearRanker best;
  double best_acc = -1.0;
  for (double lambda : lambda_grid) {
    LinearRanker r = train_linear_ranker(features, train, lambda, opts);
    const double acc = validation.empty() ? 0.0 : ranking_accuracy(r.predict(features), validation);
    if (acc > best_acc) {
      best_acc = acc;
      best = std::move(r);
    }
  }
  return best;
}

}  // namespace jmd
