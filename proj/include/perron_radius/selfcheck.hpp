#pragma once

// Property suites run by the `selfcheck` command: finite-difference gradient
// checks, group-inverse identities, pseudoinverse route equivalence and the
// rank-2 structure of the undirected gradient.

#include "perron_radius/graph_model.hpp"
#include "perron_radius/objective.hpp"
#include "perron_radius/spectral_core.hpp"
#include "perron_radius/synthetic.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace perron_radius {

struct SelfCheckOptions {
  std::uint64_t seed = 1;
  int gradient_cases = 10;
  int group_inverse_cases = 50;
  bool inject_gradient_sign_error = false;  // fault injection hook
};

struct SuiteResult {
  std::string name;
  bool passed = true;
  double worst = 0.0;   // largest residual or relative error seen
  double limit = 0.0;   // pass threshold
  int cases = 0;
};

namespace detail {

inline double functional_at(const WeightedGraph& g, std::span<const double> e,
                            double eps, int m, const EigenOptions& eig,
                            const Vector& warm) {
  SparseMatrix a = g.matrix(perturbed_weights(g, e, eps));
  PerronPair pair = perron_pair(a, false, eig, &warm);
  return functional_value(pair.v, top_m_indices(pair.v, m));
}

// Relative error of eps <G, Z> against a central difference of F along Z.
inline double gradient_fd_error(const WeightedGraph& g, double eps, int m,
                                synthetic::Rng& rng, bool flip_sign) {
  EdgePattern p = EdgePattern::full(g);
  EigenOptions eig;
  eig.eig_tol = 1e-15;
  std::vector<double> e = synthetic::random_direction(g, p, rng);
  std::vector<double> z = synthetic::random_direction(g, p, rng);
  BorderedSolver solver;
  GradientBundle b = evaluate_gradient(g, p, e, eps, m, solver, eig);
  if (flip_sign)
    for (double& x : b.G) x = -x;
  // Tilt the direction toward -G so the slope is not accidentally tiny.
  double gn = b.gradient_norm();
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = 0.5 * z[k] - b.G[k] / gn;
  const double h = 1e-6;
  std::vector<double> ep(e), em(e);
  for (std::size_t k = 0; k < e.size(); ++k) {
    ep[k] += h * z[k];
    em[k] -= h * z[k];
  }
  double fd = (functional_at(g, ep, eps, m, eig, b.pair.v) -
               functional_at(g, em, eps, m, eig, b.pair.v)) / (2 * h);
  double analytic = eps * frobenius_inner(b.G, z);
  return std::abs(fd - analytic) / std::abs(fd);
}

// Nonsymmetric 6x6 matrix with a simple zero eigenvalue: B - rho(B) I for
// a positive random B.
inline DenseMatrix random_singular_m(synthetic::Rng& rng, Index n, bool symmetric) {
  DenseMatrix b(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) b(i, j) = synthetic::uniform(rng, 0.1, 1.0);
  if (symmetric) b = symmetrize(b);
  Eigen::EigenSolver<DenseMatrix> es(b);
  double rho = es.eigenvalues().cwiseAbs().maxCoeff();
  return b - rho * DenseMatrix::Identity(n, n);
}

}  // namespace detail

inline SuiteResult check_gradient_suite(bool directed, const SelfCheckOptions& o) {
  SuiteResult r;
  r.name = directed ? "gradient_directed" : "gradient_undirected";
  r.limit = 1e-5;
  synthetic::Rng rng(o.seed * 7919 + (directed ? 1 : 2));
  for (int c = 0; c < o.gradient_cases; ++c) {
    WeightedGraph g = normalize_frobenius(directed ? synthetic::random_directed(8, 0.3, rng)
                                                   : synthetic::random_undirected(8, 0.35, rng));
    double err = detail::gradient_fd_error(g, 0.05, 2 + c % 3, rng,
                                           o.inject_gradient_sign_error);
    r.worst = std::max(r.worst, err);
    ++r.cases;
  }
  r.passed = r.worst <= r.limit;
  return r;
}

inline SuiteResult check_group_inverse_suite(const SelfCheckOptions& o) {
  SuiteResult r;
  r.name = "group_inverse_identities";
  r.limit = 1e-10;
  synthetic::Rng rng(o.seed * 104729 + 3);
  for (int c = 0; c < o.group_inverse_cases; ++c) {
    DenseMatrix m = detail::random_singular_m(rng, 6, false);
    DenseMatrix g = dense_group_inverse(m);
    double res = std::max({(m * g - g * m).norm(), (g * m * g - g).norm(),
                           (m * g * m - m).norm()});
    r.worst = std::max(r.worst, res);
    ++r.cases;
  }
  r.passed = r.worst <= r.limit;
  return r;
}

inline SuiteResult check_pi_formula_suite(const SelfCheckOptions& o) {
  SuiteResult r;
  r.name = "pi_pinv_pi_formula";
  r.limit = 1e-10;
  synthetic::Rng rng(o.seed * 104729 + 3);
  for (int c = 0; c < o.group_inverse_cases; ++c) {
    DenseMatrix m = detail::random_singular_m(rng, 6, false);
    r.worst = std::max(r.worst, (group_inverse_via_pseudoinverse(m) -
                                 dense_group_inverse(m)).norm());
    ++r.cases;
  }
  r.passed = r.worst <= r.limit;
  return r;
}

/// Sparse bordered routes against the dense references.
inline SuiteResult check_bordered_suite(const SelfCheckOptions& o) {
  SuiteResult r;
  r.name = "bordered_solves";
  r.limit = 1e-10;
  synthetic::Rng rng(o.seed * 15485863 + 5);
  LinearOptions tight;
  tight.lin_tol = 1e-14;
  for (int c = 0; c < o.gradient_cases; ++c) {
    for (bool directed : {false, true}) {
      WeightedGraph g = directed ? synthetic::random_directed(12, 0.3, rng)
                                 : synthetic::random_undirected(12, 0.3, rng);
      SparseMatrix a = g.matrix();
      PerronPair pair = perron_pair(a, directed);
      DenseMatrix m = g.dense() - pair.lambda * DenseMatrix::Identity(g.size(), g.size());
      Vector w = Vector::NullaryExpr(g.size(), [&] { return synthetic::uniform(rng, -1, 1); });
      if (directed) {
        Vector ref = dense_group_inverse(m).transpose() * w;
        r.worst = std::max(r.worst, (group_inverse_apply_transpose(pair, a, w) - ref).norm());
      } else {
        Vector ref = dense_pseudoinverse(m) * w;
        r.worst = std::max({r.worst, (pseudoinverse_apply_sym(pair, a, w) - ref).norm(),
                            (pseudoinverse_apply_sym_alt(pair, a, w, tight) - ref).norm()});
      }
      ++r.cases;
    }
  }
  r.passed = r.worst <= r.limit;
  return r;
}

/// sigma_3 / sigma_1 of sym(a v^T) on random undirected graphs.
inline SuiteResult check_rank2_suite(const SelfCheckOptions& o) {
  SuiteResult r;
  r.name = "rank2_structure";
  r.limit = 1e-8;
  synthetic::Rng rng(o.seed * 2750159 + 7);
  for (int c = 0; c < o.gradient_cases; ++c) {
    WeightedGraph g = normalize_frobenius(synthetic::random_undirected(10, 0.4, rng));
    PerronPair pair = perron_pair(g.matrix(), false);
    BorderedSolver solver;
    solver.update(g.matrix(), pair, true);
    Rank2Factors f = rank2_decomposition(pair, top_m_indices(pair.v, 3), solver);
    Eigen::JacobiSVD<DenseMatrix> svd(f.dense());
    const Vector& s = svd.singularValues();
    r.worst = std::max(r.worst, s(2) / s(0));
    ++r.cases;
  }
  r.passed = r.worst <= r.limit;
  return r;
}

inline std::vector<SuiteResult> run_selfcheck(const SelfCheckOptions& o = {}) {
  return {check_gradient_suite(true, o), check_gradient_suite(false, o),
          check_group_inverse_suite(o), check_pi_formula_suite(o),
          check_bordered_suite(o), check_rank2_suite(o)};
}

}  // namespace perron_radius
