#pragma once

// Dispersion functional of the top-m Perron entries and its gradient with
// respect to a pattern-supported perturbation.

#include "perron_radius/graph_model.hpp"
#include "perron_radius/spectral_core.hpp"

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace perron_radius {

/// Top-m entries of a Perron vector, ordered by non-decreasing value
/// (indices.back() is the top-ranked node).
struct TopMSelection {
  std::vector<Index> indices;
  double mean = 0.0;

  int m() const { return static_cast<int>(indices.size()); }
};

/// Nodes sorted by decreasing centrality; ties go to the smaller index.
inline std::vector<Index> rank_nodes(const Vector& v) {
  std::vector<Index> order(static_cast<std::size_t>(v.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return v(a) > v(b); });
  return order;
}

inline TopMSelection top_m_indices(const Vector& v, int m) {
  if (m < 2 || m > v.size())
    throw std::invalid_argument("top_m_indices: need 2 <= m <= n");
  std::vector<Index> order = rank_nodes(v);
  TopMSelection sel;
  sel.indices.assign(order.begin(), order.begin() + m);
  std::reverse(sel.indices.begin(), sel.indices.end());
  double s = 0.0;
  for (Index i : sel.indices) s += v(i);
  sel.mean = s / m;
  return sel;
}

/// Spread max - min of the selected entries.
inline double selection_range(const Vector& v, const TopMSelection& sel) {
  double lo = v(sel.indices.front()), hi = lo;
  for (Index i : sel.indices) {
    lo = std::min(lo, v(i));
    hi = std::max(hi, v(i));
  }
  return hi - lo;
}

/// F = 1/2 sum_k (v_{i_k} - mean)^2 over the selection.
inline double functional_value(const Vector& v, const TopMSelection& sel) {
  double mean = 0.0;
  for (Index i : sel.indices) mean += v(i);
  mean /= sel.m();
  double f = 0.0;
  for (Index i : sel.indices) f += 0.5 * (v(i) - mean) * (v(i) - mean);
  return f;
}

/// Right-hand side u_c = sum_k c_k e_{i_k}, c_k = v_{i_k} - mean.
inline Vector weighted_indicator(const Vector& v, const TopMSelection& sel) {
  Vector u = Vector::Zero(v.size());
  for (Index i : sel.indices) u(i) += v(i) - sel.mean;
  return u;
}

/// Free gradient R = r v^T of F (as dF/dt = eps <R, dE/dt>).
struct FreeGradient {
  Vector r;
  Vector v;

  DenseMatrix dense() const { return r * v.transpose(); }
};

/// Directed graphs: r = (M^#)^T (sum c_k^2 v - sum c_k e_{i_k}).
inline FreeGradient free_gradient_directed(const PerronPair& pair,
                                           const TopMSelection& sel,
                                           BorderedSolver& solver) {
  Vector u = weighted_indicator(pair.v, sel);
  double c2 = u.squaredNorm();
  Vector w = c2 * pair.v - u;
  return {solver.group_inverse_transpose_apply(w), pair.v};
}

/// Symmetric graphs: a = M^+ sum c_k e_{i_k}, so that the free gradient is
/// -sym(a v^T), a matrix of rank at most two.
struct Rank2Factors {
  Vector a;
  Vector v;

  DenseMatrix dense() const {
    return -(a * v.transpose() + v * a.transpose()) / 2.0;
  }
};

inline Rank2Factors rank2_decomposition(const PerronPair& pair,
                                        const TopMSelection& sel,
                                        BorderedSolver& solver) {
  return {solver.pseudoinverse_apply(weighted_indicator(pair.v, sel)), pair.v};
}

/// Per-edge structured gradient P_E(r v^T) (directed) or P_E(sym(r v^T)).
inline std::vector<double> structured_gradient(const WeightedGraph& g,
                                               const EdgePattern& p,
                                               const Vector& r,
                                               const Vector& v) {
  std::vector<double> out(g.edge_count(), 0.0);
  auto edges = g.edges();
  for (std::size_t k : p.positions()) {
    const Edge& e = edges[k];
    out[k] = g.directed() ? r(e.row) * v(e.col)
                          : 0.5 * (r(e.row) * v(e.col) + r(e.col) * v(e.row));
  }
  return out;
}

/// G = -P_E(sum_k c_k sym(a_k v^T)) for undirected graphs.
inline std::vector<double> gradient_undirected(const WeightedGraph& g,
                                               const EdgePattern& p,
                                               const PerronPair& pair,
                                               const TopMSelection& sel,
                                               BorderedSolver& solver) {
  Rank2Factors f = rank2_decomposition(pair, sel, solver);
  return structured_gradient(g, p, -f.a, f.v);
}

/// Everything known about F at one point A + eps E.
struct GradientBundle {
  double F = 0.0;
  double eta = 0.0;  // eps; dF/dt = eta <G, dE/dt>
  std::vector<double> G;
  Vector r;  // free gradient r v^T
  PerronPair pair;
  TopMSelection selection;
  double range = 0.0;

  double gradient_norm() const { return frobenius_norm(G); }
};

/// Weights of A + eps E on the edge list.
inline std::vector<double> perturbed_weights(const WeightedGraph& g,
                                             std::span<const double> e,
                                             double eps) {
  if (e.size() != g.edge_count())
    throw std::invalid_argument("perturbed_weights: size mismatch");
  std::vector<double> w(g.weights().begin(), g.weights().end());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] += eps * e[k];
  return w;
}

/// Perron pair, F and structured gradient at A + eps E. The selection is
/// recomputed from the perturbed vector. `warm` seeds the eigen-iteration.
inline GradientBundle evaluate_gradient(const WeightedGraph& g,
                                        const EdgePattern& p,
                                        std::span<const double> e, double eps,
                                        int m, BorderedSolver& solver,
                                        const EigenOptions& eig = {},
                                        const PerronPair* warm = nullptr) {
  SparseMatrix a = g.matrix(perturbed_weights(g, e, eps));
  GradientBundle b;
  b.eta = eps;
  const bool directed = g.directed();
  b.pair = perron_pair(a, directed, eig, warm ? &warm->v : nullptr,
                       warm && warm->has_left() ? &warm->x : nullptr);
  b.selection = top_m_indices(b.pair.v, m);
  b.F = functional_value(b.pair.v, b.selection);
  b.range = selection_range(b.pair.v, b.selection);
  solver.update(a, b.pair, !directed);
  if (directed) {
    b.r = free_gradient_directed(b.pair, b.selection, solver).r;
  } else {
    b.r = -rank2_decomposition(b.pair, b.selection, solver).a;
  }
  b.G = structured_gradient(g, p, b.r, b.pair.v);
  return b;
}

}  // namespace perron_radius
