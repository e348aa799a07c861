#pragma once

// Fixed-eps minimization of the dispersion functional along the
// active-set projected gradient flow, integrated by explicit Euler steps
// with Armijo-type step control.

#include "perron_radius/graph_model.hpp"
#include "perron_radius/log.hpp"
#include "perron_radius/objective.hpp"
#include "perron_radius/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace perron_radius {

/// Raised when no admissible direction or feasible point exists.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unit-norm, pattern-supported perturbation direction (per-edge entries).
struct Perturbation {
  std::vector<double> entries;
  double epsilon = 0.0;
};

struct ActiveSet {
  std::vector<bool> active;  // a + eps e at the delta floor
  std::vector<bool> frozen;  // active and held at zero velocity
  std::size_t count = 0;
};

struct StepController {
  double h = 0.1;
  double theta = 2.0;
  double g = 0.0;  // Armijo slope -dF/dt = -eps <G, Z>
  int accepted = 0;
  int rejected = 0;
};

/// sum b_ij e_ij = 0 along the flow; c is the constraint value on A itself.
struct LinearConstraint {
  std::vector<double> b;  // per edge, zero off the pattern
  double c = 0.0;
};

struct FlowOptions {
  double delta = 1e-8;
  double coalesce_tol = 1e-5;
  double h0 = 0.1;
  double theta = 2.0;
  double h_min = 1e-8;
  double h_max = 1e6;
  int max_inner = 5000;
  double stat_tol = 1e-9;
  double activation_rel_tol = 1e-12;
  // Stop when F fell by less than stagnation_rel * F over this many steps.
  int stagnation_window = 100;
  double stagnation_rel = 1e-6;
  // m = 2: stop once the reference top node is strictly overtaken.
  bool crossing_exit = true;
  EigenOptions eig;
  LinearOptions lin;
};

struct FlowRecord {
  int step = 0;
  double h = 0.0;
  double F = 0.0;
  double z_norm = 0.0;
  std::size_t active = 0;
  int swaps = 0;
  double norm_error = 0.0;    // | ||E|| - 1 |
  double floor_margin = 0.0;  // min over the pattern of (a + eps E) - delta
  bool symmetric = true;
};

enum class FlowStatus { stationary, coalesced, crossed, stalled, stagnated, max_iterations };

inline const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::stationary: return "stationary";
    case FlowStatus::coalesced: return "coalesced";
    case FlowStatus::crossed: return "crossed";
    case FlowStatus::stalled: return "stalled";
    case FlowStatus::stagnated: return "stagnated";
    case FlowStatus::max_iterations: return "max_iterations";
  }
  return "unknown";
}

struct FlowResult {
  Perturbation E;
  double F = 0.0;
  GradientBundle bundle;  // G_star and the Perron data at the minimizer
  FlowStatus status = FlowStatus::stationary;
  double z_norm = 0.0;
  std::size_t active_count = 0;
  int steps = 0;
  int selection_swaps = 0;
  std::vector<FlowRecord> trace;
};

// ---------------------------------------------------------------------------

inline ActiveSet detect_active(const WeightedGraph& g, const EdgePattern& p,
                               std::span<const double> e, double eps,
                               double delta, double rel_tol = 1e-12) {
  ActiveSet act;
  act.active.assign(g.edge_count(), false);
  act.frozen.assign(g.edge_count(), false);
  auto w = g.weights();
  for (std::size_t k : p.positions()) {
    if (w[k] + eps * e[k] <= delta + rel_tol * eps) {
      act.active[k] = true;
      ++act.count;
    }
  }
  return act;
}

/// Z - (<Z, B>/||B||^2) B.
inline std::vector<double> apply_linear_constraint(std::span<const double> z,
                                                   const LinearConstraint& lc) {
  double bb = frobenius_inner(lc.b, lc.b);
  if (!(bb > 0)) throw std::invalid_argument("linear constraint has b = 0");
  double c = frobenius_inner(z, lc.b) / bb;
  std::vector<double> out(z.begin(), z.end());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] -= c * lc.b[k];
  return out;
}

struct Direction {
  std::vector<double> Z;
  double gamma = 0.0;
  std::vector<double> multipliers;  // mu on frozen positions
};

namespace detail {

inline std::vector<double> masked(std::span<const double> x,
                                  const std::vector<bool>& frozen) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (frozen[k]) out[k] = 0.0;
  return out;
}

// Z = -Pact G projected onto the orthogonal complement of Pact E (and of
// Pact B when a linear constraint is present).
inline Direction project_direction(std::span<const double> G,
                                   std::span<const double> E,
                                   const std::vector<bool>& frozen,
                                   const LinearConstraint* lc) {
  Direction d;
  std::vector<double> pg = masked(G, frozen);
  std::vector<double> pe = masked(E, frozen);
  double ee = frobenius_inner(pe, pe);
  if (!(ee > 0))
    throw InfeasibleError("fully active perturbation: no admissible direction");
  d.gamma = frobenius_inner(pg, pe) / ee;
  d.Z.resize(pg.size());
  for (std::size_t k = 0; k < pg.size(); ++k) d.Z[k] = -pg[k] + d.gamma * pe[k];
  if (lc) {
    // Second Gram-Schmidt direction: Pact B orthogonalized against Pact E.
    std::vector<double> pb = masked(lc->b, frozen);
    double be = frobenius_inner(pb, pe) / ee;
    for (std::size_t k = 0; k < pb.size(); ++k) pb[k] -= be * pe[k];
    double bb = frobenius_inner(pb, pb);
    if (bb > 1e-30 * ee) {
      double c = frobenius_inner(d.Z, pb) / bb;
      for (std::size_t k = 0; k < pb.size(); ++k) d.Z[k] -= c * pb[k];
    }
  }
  return d;
}

}  // namespace detail

/**
 * Descent direction of the KKT-projected flow. Active positions whose
 * unconstrained velocity -g + gamma e points below the floor are frozen;
 * frozen positions are released once the sign flips.
 */
inline Direction descent_direction(std::span<const double> G,
                                   std::span<const double> E, ActiveSet& act,
                                   const LinearConstraint* lc = nullptr) {
  const std::size_t n = G.size();
  if (E.size() != n || act.active.size() != n)
    throw std::invalid_argument("descent_direction: size mismatch");
  std::fill(act.frozen.begin(), act.frozen.end(), false);
  Direction d = detail::project_direction(G, E, act.frozen, lc);
  if (act.count == 0) return d;

  for (std::size_t round = 0; round <= n; ++round) {
    bool changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (!act.active[k]) continue;
      double free_velocity = -G[k] + d.gamma * E[k];
      if (!act.frozen[k] && d.Z[k] < 0.0) {
        act.frozen[k] = true;
        changed = true;
      } else if (act.frozen[k] && free_velocity > 0.0) {
        act.frozen[k] = false;
        changed = true;
      }
    }
    if (!changed) break;
    d = detail::project_direction(G, E, act.frozen, lc);
  }
  d.multipliers.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    if (act.frozen[k]) d.multipliers[k] = G[k] - d.gamma * E[k];
  return d;
}

/**
 * Euler step E + h Z followed by the feasibility map: entries below the
 * floor are clipped to it and the remaining entries are rescaled to restore
 * unit norm, repeated until both hold. Returns nullopt if impossible.
 */
inline std::optional<std::vector<double>> project_feasible(
    const WeightedGraph& g, const EdgePattern& p, std::vector<double> e,
    double eps, double delta) {
  auto w = g.weights();
  std::vector<bool> clipped(e.size(), false);
  for (std::size_t k = 0; k < e.size(); ++k)
    if (!p.contains(k)) e[k] = 0.0;
  for (std::size_t round = 0; round <= p.size(); ++round) {
    bool changed = false;
    for (std::size_t k : p.positions()) {
      double floor = (delta - w[k]) / eps;
      if (e[k] < floor) {
        e[k] = floor;
        clipped[k] = true;
        changed = true;
      }
    }
    double fixed = 0.0, free = 0.0;
    for (std::size_t k : p.positions())
      (clipped[k] ? fixed : free) += e[k] * e[k];
    if (fixed > 1.0 || free <= 0.0) return std::nullopt;
    double s = std::sqrt((1.0 - fixed) / free);
    if (!changed && std::abs(s - 1.0) <= 1e-15) break;
    for (std::size_t k : p.positions())
      if (!clipped[k]) e[k] *= s;
    bool violated = false;
    for (std::size_t k : p.positions())
      if (!clipped[k] && e[k] < (delta - w[k]) / eps) violated = true;
    if (!violated) break;
  }
  return e;
}

inline std::optional<Perturbation> euler_step(const WeightedGraph& g,
                                              const EdgePattern& p,
                                              const Perturbation& e,
                                              std::span<const double> z,
                                              double h, double delta) {
  std::vector<double> next(e.entries);
  for (std::size_t k = 0; k < next.size(); ++k) next[k] += h * z[k];
  auto feasible = project_feasible(g, p, std::move(next), e.epsilon, delta);
  if (!feasible) return std::nullopt;
  return Perturbation{std::move(*feasible), e.epsilon};
}

/// Largest entry of v outside `node`, minus v(node).
inline double overtake_margin(const Vector& v, Index node) {
  double best = -1.0;
  for (Index i = 0; i < v.size(); ++i)
    if (i != node) best = std::max(best, v(i));
  return best - v(node);
}

using FlowObserver = std::function<void(const FlowRecord&)>;

/**
 * Minimizes F_eps over eps-feasible perturbations starting from E_init.
 * `reference_top` enables the crossing exit for m = 2.
 */
inline FlowResult minimize_inner(const WeightedGraph& a, double eps,
                                 const Perturbation& e_init, int m,
                                 const FlowOptions& opts,
                                 const EdgePattern& pattern,
                                 const LinearConstraint* lc = nullptr,
                                 std::optional<Index> reference_top = {},
                                 const FlowObserver& observer = {}) {
  if (!(eps > 0)) throw std::invalid_argument("minimize_inner: eps must be > 0");
  BorderedSolver solver(opts.lin);

  std::vector<double> start = e_init.entries;
  if (lc) start = apply_linear_constraint(start, *lc);
  auto feasible = project_feasible(a, pattern, std::move(start), eps, opts.delta);
  if (!feasible) throw InfeasibleError("initial perturbation cannot be made feasible");

  FlowResult res;
  res.E = Perturbation{std::move(*feasible), eps};
  res.bundle = evaluate_gradient(a, pattern, res.E.entries, eps, m, solver, opts.eig);
  res.F = res.bundle.F;

  const bool use_crossing = opts.crossing_exit && m == 2 && reference_top.has_value();
  auto finished = [&](const GradientBundle& b) -> std::optional<FlowStatus> {
    if (b.range <= opts.coalesce_tol) return FlowStatus::coalesced;
    if (use_crossing && overtake_margin(b.pair.v, *reference_top) > 0.0)
      return FlowStatus::crossed;
    return std::nullopt;
  };
  if (auto s = finished(res.bundle)) {
    res.status = *s;
    return res;
  }

  StepController ctl{opts.h0, opts.theta};
  std::vector<double> history{res.F};
  res.status = FlowStatus::max_iterations;
  for (int k = 0; k < opts.max_inner; ++k) {
    ActiveSet act = detect_active(a, pattern, res.E.entries, eps, opts.delta,
                                  opts.activation_rel_tol);
    Direction d = descent_direction(res.bundle.G, res.E.entries, act, lc);
    res.z_norm = frobenius_norm(d.Z);
    res.active_count = act.count;
    if (res.z_norm <= opts.stat_tol) {
      res.status = FlowStatus::stationary;
      break;
    }
    ctl.g = -eps * frobenius_inner(res.bundle.G, d.Z);

    bool reduced = false;
    std::optional<Perturbation> cand;
    GradientBundle cb;
    while (true) {
      if (ctl.h < opts.h_min) break;
      cand = euler_step(a, pattern, res.E, d.Z, ctl.h, opts.delta);
      if (cand) {
        cb = evaluate_gradient(a, pattern, cand->entries, eps, m, solver,
                               opts.eig, &res.bundle.pair);
        if (cb.F < res.F) break;
      }
      ++ctl.rejected;
      ctl.h /= ctl.theta;
      reduced = true;
      cand.reset();
    }
    if (!cand) {
      res.status = FlowStatus::stalled;
      log::debug("inner flow stalled at eps=" + std::to_string(eps));
      break;
    }

    const bool armijo_short = cb.F >= res.F - (ctl.h / ctl.theta) * ctl.g;
    std::vector<Index> before = res.bundle.selection.indices;
    std::vector<Index> after = cb.selection.indices;
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    const int swaps = before != after ? 1 : 0;
    if (swaps) log::debug("selection swap at inner step " + std::to_string(k));
    res.selection_swaps += swaps;
    res.E = std::move(*cand);
    res.F = cb.F;
    res.bundle = std::move(cb);
    ++ctl.accepted;
    ++res.steps;

    FlowRecord rec{k, ctl.h, res.F, res.z_norm, act.count, swaps};
    rec.norm_error = std::abs(frobenius_norm(res.E.entries) - 1.0);
    rec.floor_margin = std::numeric_limits<double>::infinity();
    for (std::size_t q : pattern.positions()) {
      rec.floor_margin = std::min(rec.floor_margin,
                                  a.weights()[q] + eps * res.E.entries[q] - opts.delta);
      if (!a.directed() && res.E.entries[q] != res.E.entries[a.mirror(q)]) rec.symmetric = false;
    }
    res.trace.push_back(rec);
    if (observer) observer(rec);

    if (armijo_short) {
      ctl.h /= ctl.theta;
    } else if (!reduced) {
      ctl.h = std::min(ctl.h * ctl.theta, opts.h_max);
    }
    if (auto s = finished(res.bundle)) {
      res.status = *s;
      break;
    }
    history.push_back(res.F);
    const std::size_t w = static_cast<std::size_t>(opts.stagnation_window);
    if (w > 0 && history.size() > w &&
        history[history.size() - 1 - w] - res.F <= opts.stagnation_rel * res.F) {
      res.status = FlowStatus::stagnated;
      break;
    }
  }
  return res;
}

}  // namespace perron_radius
