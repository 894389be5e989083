#include <omp.h>

#include <algorithm>

#include "doctest.h"
#include "jmd/feature_graph.hpp"
#include "jmd/kernels.hpp"
#include "support.hpp"

using namespace jmd;
using jmd::testing::Gen;

namespace {

// Points on a coarse integer lattice produce many distance ties.
Matrix lattice_points(Gen& g, Index n, int dim) {
  Matrix x(n, dim);
  for (Index i = 0; i < n; ++i)
    for (int d = 0; d < dim; ++d) x(i, d) = g.integer(-3, 3);
  return x;
}

void check_same_table(const kernels::KnnTable& a, const kernels::KnnTable& b) {
  REQUIRE(a.n == b.n);
  REQUIRE(a.k == b.k);
  CHECK(a.index == b.index);
  CHECK(a.sq_dist == b.sq_dist);
}

struct ThreadScope {
  explicit ThreadScope(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadScope() { omp_set_num_threads(saved); }
  int saved;
};

}  // namespace

TEST_CASE("knn agrees with the serial reference, ties included") {
  for (int c = 0; c < 60; ++c) {
    Gen g(jmd::testing::case_seed(41, c));
    const Index n = g.integer(2, 300);
    const int dim = c % 3 == 0 ? g.integer(13, 20) : g.integer(1, 12);  // brute force and tree paths
    const int k = g.integer(1, static_cast<int>(std::min<Index>(n - 1, 12)));
    const Matrix x = c % 2 ? lattice_points(g, n, dim) : g.matrix(n, dim);
    INFO("case " << c << " n=" << n << " dim=" << dim << " k=" << k);
    check_same_table(kernels::knn(x, k), kernels::serial::knn(x, k));
  }
}

TEST_CASE("knn excludes self and orders by distance then index") {
  Matrix x(4, 1);
  x << 0.0, 1.0, -1.0, 2.0;
  const kernels::KnnTable t = kernels::knn(x, 2);
  CHECK(t.neighbor(0, 0) == 1);  // tie at distance 1 with index 2
  CHECK(t.neighbor(0, 1) == 2);
  CHECK(t.distance2(0, 0) == 1.0);
  CHECK(t.neighbor(3, 0) == 1);
  CHECK(t.neighbor(3, 1) == 0);
}

TEST_CASE("column gram agrees with the serial reference") {
  for (int c = 0; c < 20; ++c) {
    Gen g(jmd::testing::case_seed(42, c));
    const Matrix s = g.matrix(g.integer(1, 20000), g.integer(1, 7));
    const Matrix par = kernels::column_gram(s), ser = kernels::serial::column_gram(s);
    CHECK((par - ser).norm() <= 1e-12 * std::max(1.0, ser.norm()));
    CHECK((par - par.transpose()).norm() == 0.0);
  }
}

TEST_CASE("explicit sweep agrees with the serial reference") {
  for (int c = 0; c < 40; ++c) {
    Gen g(jmd::testing::case_seed(43, c));
    const Index nm = g.integer(2, 60), nr = g.integer(2, 60);
    const FeatureGraph gm = build_feature_graph(g.matrix(nm, 3), g.vector(nm), 1, 1.0);
    const FeatureGraph gr = build_feature_graph(g.matrix(nr, 3), g.vector(nr), 1, 1.0);
    const int cap = g.integer(1, 8);
    const Matrix dense = g.bridge_values(nm, nr, cap, 0.5);
    const BridgeMatrix b = BridgeMatrix::from_dense(dense, cap);
    const double d = g.uniform(0.0, 0.5);
    const auto par = kernels::explicit_bridge_sweep(b.row_data(), gm.laplacian, gr.laplacian, d, cap);
    const auto ser = kernels::serial::explicit_bridge_sweep(b.row_data(), gm.laplacian, gr.laplacian, d, cap);
    REQUIRE(par.size() == ser.size());
    INFO("case " << c);
    for (size_t i = 0; i < par.size(); ++i) {
      REQUIRE(par[i].size() == ser[i].size());
      for (size_t t = 0; t < par[i].size(); ++t) {
        CHECK(par[i][t].col == ser[i][t].col);
        CHECK(par[i][t].value == doctest::Approx(ser[i][t].value).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("Kronecker-sum apply agrees with the serial reference") {
  for (int c = 0; c < 20; ++c) {
    Gen g(jmd::testing::case_seed(44, c));
    const Index nm = g.integer(2, 80), nr = g.integer(2, 80);
    const FeatureGraph gm = build_feature_graph(g.matrix(nm, 2), g.vector(nm), 1, 1.0);
    const FeatureGraph gr = build_feature_graph(g.matrix(nr, 2), g.vector(nr), 1, 1.0);
    const Matrix v = g.matrix(nm, nr);
    const double d = g.uniform(0.0, 2.0);
    const Matrix par = kernels::kronecker_sum_apply(v, gm.laplacian, gr.laplacian, d);
    const Matrix ser = kernels::serial::kronecker_sum_apply(v, gm.laplacian, gr.laplacian, d);
    CHECK((par - ser).norm() <= 1e-13 * ser.norm());
  }
}

TEST_CASE("parallel kernels do not depend on the thread count") {
  Gen g(45);
  const Matrix x = g.matrix(3000, 6);
  const Matrix s = g.matrix(50000, 6);
  const FeatureGraph gm = build_feature_graph(g.matrix(200, 3), g.vector(200), 5, 1.0);
  const FeatureGraph gr = build_feature_graph(g.matrix(150, 3), g.vector(150), 5, 1.0);
  const BridgeMatrix b = BridgeMatrix::from_dense(g.bridge_values(200, 150, 4, 0.3), 4);
  const Matrix v = g.matrix(200, 150);

  kernels::KnnTable t1;
  Matrix gram1, apply1;
  std::vector<BridgeRow> sweep1;
  {
    ThreadScope one(1);
    t1 = kernels::knn(x, 7);
    gram1 = kernels::column_gram(s);
    sweep1 = kernels::explicit_bridge_sweep(b.row_data(), gm.laplacian, gr.laplacian, 0.1, 4);
    apply1 = kernels::kronecker_sum_apply(v, gm.laplacian, gr.laplacian, 0.1);
  }
  for (int threads : {2, 3, 4}) {
    ThreadScope many(threads);
    check_same_table(kernels::knn(x, 7), t1);
    CHECK(kernels::column_gram(s) == gram1);
    CHECK(kernels::kronecker_sum_apply(v, gm.laplacian, gr.laplacian, 0.1) == apply1);
    const auto sweep = kernels::explicit_bridge_sweep(b.row_data(), gm.laplacian, gr.laplacian, 0.1, 4);
    REQUIRE(sweep.size() == sweep1.size());
    for (size_t i = 0; i < sweep.size(); ++i) {
      REQUIRE(sweep[i].size() == sweep1[i].size());
      for (size_t t = 0; t < sweep[i].size(); ++t) {
        CHECK(sweep[i][t].col == sweep1[i][t].col);
        CHECK(sweep[i][t].value == sweep1[i][t].value);
      }
    }
  }
}
