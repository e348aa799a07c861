#pragma once

// Random graph generators for self-checks and benchmarks.

#include "perron_radius/graph_model.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace perron_radius::synthetic {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Strongly connected digraph: a directed Hamilton cycle plus random arcs.
inline WeightedGraph random_directed(Index n, double extra_density, Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::set<Edge> edges;
  for (Index k = 0; k < n; ++k) edges.insert({perm[k], perm[(k + 1) % n]});
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (i != j && uniform(rng, 0, 1) < extra_density) edges.insert({i, j});
  std::vector<Edge> list(edges.begin(), edges.end());
  std::vector<double> w(list.size());
  for (double& x : w) x = uniform(rng, 0.5, 1.5);
  return WeightedGraph(n, std::move(list), std::move(w), true);
}

/// Connected undirected graph: a random spanning path plus random edges.
inline WeightedGraph random_undirected(Index n, double extra_density, Rng& rng) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::set<Edge> upper;
  auto add = [&](Index i, Index j) {
    if (i != j) upper.insert({std::min(i, j), std::max(i, j)});
  };
  for (Index k = 0; k + 1 < n; ++k) add(perm[k], perm[k + 1]);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (uniform(rng, 0, 1) < extra_density) add(i, j);
  std::vector<Edge> list;
  std::vector<double> w;
  for (const Edge& e : upper) {
    double x = uniform(rng, 0.5, 1.5);
    list.push_back(e);
    w.push_back(x);
    list.push_back({e.col, e.row});
    w.push_back(x);
  }
  return WeightedGraph(n, std::move(list), std::move(w), false);
}

/// 4-regular undirected graph as the union of two edge-disjoint random
/// Hamilton cycles, weights uniform in [0.5, 1.5]. Requires n >= 7.
inline WeightedGraph random_four_regular(Index n, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::set<Edge> upper;
    bool ok = true;
    for (int c = 0; c < 2 && ok; ++c) {
      std::vector<Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Index k = 0; k < n && ok; ++k) {
        Index i = perm[k], j = perm[(k + 1) % n];
        ok = upper.insert({std::min(i, j), std::max(i, j)}).second;
      }
    }
    if (!ok) continue;
    std::vector<Edge> list;
    std::vector<double> w;
    for (const Edge& e : upper) {
      double x = uniform(rng, 0.5, 1.5);
      list.push_back(e);
      w.push_back(x);
      list.push_back({e.col, e.row});
      w.push_back(x);
    }
    return WeightedGraph(n, std::move(list), std::move(w), false);
  }
  throw std::runtime_error("random_four_regular: no disjoint cycle pair found");
}

/// Undirected cycle with unit weights (all row sums equal).
inline WeightedGraph uniform_cycle(Index n) {
  std::vector<Edge> list;
  for (Index i = 0; i < n; ++i) {
    list.push_back({i, (i + 1) % n});
    list.push_back({(i + 1) % n, i});
  }
  std::vector<double> w(list.size(), 1.0);
  return WeightedGraph(n, std::move(list), std::move(w), false);
}

/// Random unit-norm per-edge direction on the pattern (symmetric if undirected).
inline std::vector<double> random_direction(const WeightedGraph& g,
                                            const EdgePattern& p, Rng& rng) {
  std::vector<double> z(g.edge_count(), 0.0);
  std::normal_distribution<double> normal;
  for (std::size_t k : p.positions()) {
    std::size_t q = g.mirror(k);
    if (q < k) continue;
    z[k] = normal(rng);
    z[q] = z[k];
  }
  double nz = frobenius_norm(z);
  for (double& x : z) x /= nz;
  return z;
}

}  // namespace perron_radius::synthetic
