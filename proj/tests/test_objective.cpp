#include "support.hpp"
#include "perron_radius/selfcheck.hpp"

#include <catch_amalgamated.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <set>

using namespace perron_radius;
using Catch::Approx;

TEST_CASE("top-m selection on the nine-node vector") {
  PerronPair p = perron_pair(fixtures::nine_node().matrix(), false);
  TopMSelection sel = top_m_indices(p.v, 2);
  REQUIRE(sel.m() == 2);
  CHECK(sel.indices[0] == 3);  // node 4, 1-based
  CHECK(sel.indices[1] == 0);  // node 1
  CHECK(p.v(0) == Approx(0.4844).margin(5e-5));
  CHECK(p.v(3) == Approx(0.4553).margin(5e-5));
  CHECK(sel.mean == Approx((p.v(0) + p.v(3)) / 2));
}

TEST_CASE("top-m ties go to smaller indices") {
  Vector c = Vector::Constant(6, 0.5);
  TopMSelection sel = top_m_indices(c, 3);
  std::set<Index> got(sel.indices.begin(), sel.indices.end());
  CHECK(got == std::set<Index>{0, 1, 2});
  CHECK(sel.mean == 0.5);
  CHECK_THROWS_AS(top_m_indices(c, 1), std::invalid_argument);
  CHECK_THROWS_AS(top_m_indices(c, 7), std::invalid_argument);
}

TEST_CASE("top-m selection agrees with a full sort") {
  synthetic::Rng rng(21);
  for (int t = 0; t < 20; ++t) {
    Vector v = Vector::NullaryExpr(15, [&] { return synthetic::uniform(rng, 0, 1); });
    TopMSelection sel = top_m_indices(v, 5);
    std::vector<double> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.rbegin(), sorted.rend());
    for (int k = 0; k < 5; ++k) CHECK(v(sel.indices[4 - k]) == sorted[k]);
    for (int k = 0; k + 1 < 5; ++k) CHECK(v(sel.indices[k]) <= v(sel.indices[k + 1]));
  }
}

TEST_CASE("dispersion functional") {
  Vector v(4);
  v << 0.3, 0.5, 0.5, 0.1;
  CHECK(functional_value(v, top_m_indices(v, 2)) == 0.0);

  PerronPair p = perron_pair(fixtures::nine_node().matrix(), false);
  double gap = p.v(0) - p.v(3);
  double f = functional_value(p.v, top_m_indices(p.v, 2));
  CHECK(f == Approx(gap * gap / 4).epsilon(1e-14));
  CHECK(f == Approx(2.117e-4).margin(2e-7));

  synthetic::Rng rng(22);
  Vector r = Vector::NullaryExpr(12, [&] { return synthetic::uniform(rng, 0, 1); });
  TopMSelection sel = top_m_indices(r, 5);
  double mean = 0;
  for (Index i : sel.indices) mean += r(i);
  mean /= 5;
  double direct = 0;
  for (Index i : sel.indices) direct += 0.5 * (r(i) - mean) * (r(i) - mean);
  CHECK(functional_value(r, sel) == Approx(direct).epsilon(1e-15));
}

TEST_CASE("gradient vanishes when the selected entries coalesce") {
  // Directed cycle with equal weights: all Perron entries equal.
  std::vector<Edge> edges;
  for (Index i = 0; i < 5; ++i) edges.push_back({i, (i + 1) % 5});
  WeightedGraph g(5, edges, std::vector<double>(5, 1.0), true);
  PerronPair pair = perron_pair(g.matrix(), true);
  BorderedSolver s;
  s.update(g.matrix(), pair, false);
  FreeGradient r = free_gradient_directed(pair, top_m_indices(pair.v, 3), s);
  CHECK(r.r.norm() < 1e-12);

  WeightedGraph u = synthetic::uniform_cycle(6);
  PerronPair up = perron_pair(u.matrix(), false);
  BorderedSolver su;
  su.update(u.matrix(), up, true);
  std::vector<double> gu = gradient_undirected(u, EdgePattern::full(u), up,
                                               top_m_indices(up.v, 2), su);
  CHECK(frobenius_norm(gu) < 1e-12);
}

TEST_CASE("structured gradients match finite differences") {
  SelfCheckOptions o;
  o.seed = 4;
  SuiteResult d = check_gradient_suite(true, o);
  SuiteResult u = check_gradient_suite(false, o);
  CHECK(d.cases == 10);
  CHECK(u.cases == 10);
  CHECK(d.worst <= 1e-5);
  CHECK(u.worst <= 1e-5);
}

TEST_CASE("directed gradient is supported on the pattern") {
  WeightedGraph a = normalize_frobenius(fixtures::four_node());
  EdgePattern p = EdgePattern::full(a);
  std::vector<double> zero(a.edge_count(), 0.0);
  BorderedSolver s;
  GradientBundle b = evaluate_gradient(a, p, zero, 0.0, 2, s);
  DenseMatrix r = b.r * b.pair.v.transpose();
  DenseMatrix pr = project_pattern(r, a, p);
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      if (!a.find(i, j)) CHECK(pr(i, j) == 0.0);
  for (std::size_t k = 0; k < a.edge_count(); ++k)
    CHECK(b.G[k] == pr(a.edges()[k].row, a.edges()[k].col));
}

TEST_CASE("undirected gradient is exactly symmetric and has rank-2 structure") {
  WeightedGraph g = fixtures::nine_node();
  EdgePattern p = EdgePattern::full(g);
  std::vector<double> zero(g.edge_count(), 0.0);
  BorderedSolver s;
  GradientBundle b = evaluate_gradient(g, p, zero, 0.0, 2, s);
  for (std::size_t k = 0; k < g.edge_count(); ++k) CHECK(b.G[k] == b.G[g.mirror(k)]);

  Rank2Factors f = rank2_decomposition(b.pair, b.selection, s);
  DenseMatrix l = f.dense();
  for (Index i = 0; i < 9; ++i)
    for (Index j = 0; j < 9; ++j)
      CHECK(l(i, j) == Approx(-(f.a(i) * f.v(j) + f.a(j) * f.v(i)) / 2).margin(1e-16));
  Eigen::JacobiSVD<DenseMatrix> svd(l);
  CHECK(svd.singularValues()(2) / svd.singularValues()(0) <= 1e-8);
  // Pattern projection of the rank-2 matrix is the gradient.
  std::vector<double> projected = gather_pattern(l, g, p);
  for (std::size_t k = 0; k < g.edge_count(); ++k)
    CHECK(b.G[k] == Approx(projected[k]).margin(1e-16));

  Rank2Factors parallel{2.0 * f.v, f.v};
  Eigen::JacobiSVD<DenseMatrix> svd1(parallel.dense());
  CHECK(svd1.singularValues()(1) / svd1.singularValues()(0) <= 1e-14);
}

TEST_CASE("nine-node initial gradient points like the printed one") {
  WeightedGraph g = fixtures::nine_node();
  std::vector<double> zero(g.edge_count(), 0.0);
  BorderedSolver s;
  GradientBundle b = evaluate_gradient(g, EdgePattern::full(g), zero, 0.0, 2, s);
  double norm = b.gradient_norm();
  // Printed weights are rounded (lambda differs in the 4th decimal), so allow 1e-3.
  for (const auto& e : fixtures::printed_g0()) {
    double scaled = 100.0 * b.G[*g.find(e.i - 1, e.j - 1)];
    CHECK(scaled == Approx(e.value).margin(1e-3));
  }
  CHECK(norm == Approx(0.015083).margin(1e-6));
}

TEST_CASE("gradients avoid dense storage at large sizes") {
  synthetic::Rng rng(23);
  WeightedGraph g = normalize_frobenius(synthetic::random_four_regular(10000, rng));
  REQUIRE(g.edge_count() == 40000);
  EdgePattern p = EdgePattern::full(g);
  std::vector<double> zero(g.edge_count(), 0.0);
  BorderedSolver s;
  GradientBundle b = evaluate_gradient(g, p, zero, 0.0, 2, s);
  CHECK(s.iterative());
  CHECK(b.G.size() == 40000);
  CHECK(b.r.size() == 10000);
  CHECK(b.gradient_norm() > 0);
}
