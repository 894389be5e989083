#pragma once

#include <span>
#include <utility>
#include <vector>

#include "jmd/types.hpp"

namespace jmd {

/// Ordered pairs (i, j) meaning instance i ranks above instance j.
struct RankPairs {
  std::vector<std::pair<Index, Index>> pairs;
  Index n = 0;

  bool empty() const noexcept { return pairs.empty(); }
  size_t size() const noexcept { return pairs.size(); }
  void validate() const;
};

/// Squared margin loss (max(1 - (fi - fj), 0))^2.
double rank_loss(double fi, double fj);

/// Fraction of pairs with predictions[i] > predictions[j]; ties are wrong.
double ranking_accuracy(const Vector& predictions, const RankPairs& pairs);

struct LinearRanker {
  Vector w;
  double lambda_s = 0.0;

  Vector predict(const Matrix& features) const { return features * w; }
};

struct TrainOptions {
  int max_iterations = 5000;
  double gradient_tolerance = 1e-8;
};

struct TrainReport {
  LinearRanker ranker;
  std::vector<double> objective_history;  // objective after each accepted step, starting at w = 0
  double gradient_norm = 0.0;
  int iterations = 0;
};

/// sum over pairs of rank_loss + lambda_s ||w||^2.
double rank_objective(const Matrix& features, const RankPairs& pairs, const Vector& w, double lambda_s);

/// Full-batch gradient descent with step halving (Armijo backtracking).
TrainReport fit_linear_ranker(const Matrix& features, const RankPairs& train, double lambda_s, const TrainOptions& opts = {});

LinearRanker train_linear_ranker(const Matrix& features, const RankPairs& train, double lambda_s, const TrainOptions& opts = {});

/// Trains one ranker per lambda and keeps the one with the best validation
/// accuracy (first in grid order on ties).
LinearRanker train_linear_ranker(const Matrix& features, const RankPairs& train, std::span<const double> lambda_grid,
                                 const RankPairs& validation, const TrainOptions& opts = {});

inline constexpr double kDefaultLambdaGrid[] = {1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0};

}  // namespace jmd
