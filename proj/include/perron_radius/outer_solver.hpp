#pragma once

// Outer iteration on eps: f(eps) = F_eps(E(eps)) is driven to zero by a
// Newton iteration from the left, safeguarded by bisection.

#include "perron_radius/graph_model.hpp"
#include "perron_radius/inner_flow.hpp"
#include "perron_radius/log.hpp"
#include "perron_radius/objective.hpp"
#include "perron_radius/spectral_core.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace perron_radius {

struct OuterOptions {
  int m = 2;
  double eps0 = 1e-3;
  double eps_tol = 1e-7;
  double eps_max = 1.0;
  int max_outer = 50;
  double growth = 3.0;
  // f' = -||G|| is trusted only when ||Z|| <= this fraction of ||G||.
  double derivative_reliability = 1e-4;
  FlowOptions flow;

  double outer_zero_tol() const {
    return m * flow.coalesce_tol * flow.coalesce_tol / 4.0;
  }
};

/// One evaluation of f.
struct FEvaluation {
  double eps = 0.0;
  double f = 0.0;
  double fprime = 0.0;
  bool reliable = false;
  bool right = false;  // eps at or beyond the radius
  // Right evaluations: norm of the coalescing perturbation found (<= eps).
  double coalesced_eps = 0.0;
  FlowResult flow;
};

enum class StepKind { bootstrap, newton, bisection };

inline const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::bootstrap: return "bootstrap";
    case StepKind::newton: return "newton";
    case StepKind::bisection: return "bisection";
  }
  return "unknown";
}

struct OuterIterate {
  int k = 0;
  StepKind kind = StepKind::bootstrap;
  double eps = 0.0;
  double f = 0.0;
  double fprime = 0.0;
  bool reliable = false;
  bool right = false;
  double coalesced_eps = 0.0;
  FlowStatus status = FlowStatus::stationary;
  int inner_steps = 0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

struct OuterState {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  std::optional<FEvaluation> left;   // f(lo) > 0
  std::optional<FEvaluation> right;  // coalescing perturbation at hi
  std::vector<OuterIterate> log;
};

struct RadiusReport {
  bool found = false;
  double rho_m = 0.0;
  int m = 2;
  double coalesce_tol = 0.0;
  Perturbation E_star;
  std::vector<double> perturbed_weights;
  std::vector<Index> ranking_before;
  std::vector<Index> ranking_after;
  std::vector<Index> coalesced_indices;  // top-m of the perturbed vector
  double common_value = 0.0;
  double coalesced_range = 0.0;
  Vector v_before;
  Vector v_after;
  int outer_iterations = 0;
  int inner_steps_total = 0;
  bool stalled = false;
  double wall_time = 0.0;
  std::vector<OuterIterate> log;
};

/// f'(eps) = -||G_star||.
inline double derivative_f(std::span<const double> g_star) {
  return -frobenius_norm(g_star);
}

using InnerTraceObserver = std::function<void(double eps, const FlowRecord&)>;
using OuterTraceObserver = std::function<void(const OuterIterate&)>;

/**
 * Robustness radius computation for one graph and pattern. The graph must be
 * normalized to unit Frobenius norm and strongly connected.
 */
class RadiusSolver {
 public:
  RadiusSolver(const WeightedGraph& a, EdgePattern pattern, OuterOptions opts,
               std::optional<LinearConstraint> lc = {})
      : a_(a), pattern_(std::move(pattern)), opts_(opts), lc_(std::move(lc)) {
    if (opts_.m < 2 || opts_.m > a_.size())
      throw std::invalid_argument("m must satisfy 2 <= m <= n");
    if (!check_strong_connectivity(a_))
      throw InputError("graph is not strongly connected (irreducibility assumption violated)");
    double norm = frobenius_norm(a_.weights());
    if (std::abs(norm - 1.0) > 1e-10)
      throw std::invalid_argument("graph must be normalized to unit Frobenius norm");
    if (lc_ && lc_->b.size() != a_.edge_count())
      throw std::invalid_argument("linear constraint size mismatch");

    base_pair_ = perron_pair(a_.matrix(), a_.directed(), opts_.flow.eig);
    base_selection_ = top_m_indices(base_pair_.v, opts_.m);
    std::vector<double> zero(a_.edge_count(), 0.0);
    BorderedSolver solver(opts_.flow.lin);
    base_ = evaluate_gradient(a_, pattern_, zero, 0.0, opts_.m, solver, opts_.flow.eig);
  }

  void set_inner_observer(InnerTraceObserver obs) { inner_obs_ = std::move(obs); }
  void set_outer_observer(OuterTraceObserver obs) { outer_obs_ = std::move(obs); }

  const PerronPair& base_pair() const { return base_pair_; }
  const GradientBundle& base_gradient() const { return base_; }
  const OuterOptions& options() const { return opts_; }

  /// Top node of the unperturbed graph.
  Index reference_top() const { return base_selection_.indices.back(); }

  /// E(0) = -G0 / ||G0||.
  Perturbation initial_perturbation(double eps) const {
    double g = base_.gradient_norm();
    if (!(g > 0)) throw std::runtime_error("structured gradient vanishes at E = 0");
    Perturbation e{base_.G, eps};
    for (double& x : e.entries) x = -x / g;
    return e;
  }

  /// f(eps) from a warm start (or from E(0)); the previous minimizer nearest
  /// to eps is used when `warm` is null.
  FEvaluation evaluate_f(double eps, const Perturbation* warm = nullptr) {
    if (!(eps > 0)) throw std::invalid_argument("evaluate_f: eps must be > 0");
    Perturbation start = warm ? *warm : nearest_warm_start(eps);
    start.epsilon = eps;
    FlowObserver obs;
    if (inner_obs_) obs = [&](const FlowRecord& r) { inner_obs_(eps, r); };
    std::optional<Index> ref;
    if (opts_.flow.crossing_exit) ref = reference_top();
    FEvaluation ev;
    ev.eps = eps;
    ev.flow = minimize_inner(a_, eps, start, opts_.m, opts_.flow, pattern_,
                             lc_ ? &*lc_ : nullptr, ref, obs);
    ev.f = ev.flow.F;
    ev.fprime = derivative_f(ev.flow.bundle.G);
    double gnorm = -ev.fprime;
    bool stationary_enough =
        ev.flow.status == FlowStatus::stationary ||
        ((ev.flow.status == FlowStatus::stalled ||
          ev.flow.status == FlowStatus::stagnated) &&
         ev.flow.z_norm <= opts_.derivative_reliability * gnorm);
    ev.reliable = stationary_enough && ev.flow.active_count == 0;
    if (ev.flow.status == FlowStatus::coalesced) {
      ev.right = true;
      ev.coalesced_eps = eps;
    } else if (ev.flow.status == FlowStatus::crossed) {
      ev.right = true;
      bisect_segment(ev);
    }
    solved_.push_back({eps, ev.flow.E});
    return ev;
  }

  /// Newton-bisection on f; returns the report (found = false when no
  /// coalescence occurs up to eps_max).
  RadiusReport solve() {
    auto t0 = std::chrono::steady_clock::now();
    RadiusReport rep;
    rep.m = opts_.m;
    rep.coalesce_tol = opts_.flow.coalesce_tol;
    rep.v_before = base_pair_.v;
    rep.ranking_before = rank_nodes(base_pair_.v);

    if (base_.range <= opts_.flow.coalesce_tol) {
      rep.found = true;
      rep.rho_m = 0.0;
      rep.E_star = Perturbation{std::vector<double>(a_.edge_count(), 0.0), 0.0};
      finalize(rep, t0);
      return rep;
    }

    OuterState st;
    FEvaluation origin;
    origin.eps = 0.0;
    origin.f = base_.F;
    origin.fprime = derivative_f(base_.G);
    origin.reliable = true;
    origin.flow.bundle = base_;
    origin.flow.E = initial_perturbation(0.0);
    st.left = origin;
    lefts_.push_back(origin);

    int k = 0;
    double eps = opts_.eps0;
    while (true) {
      FEvaluation ev = evaluate_f(eps);
      record(st, ev, StepKind::bootstrap, ++k, rep);
      if (ev.right) {
        accept_right(st, std::move(ev));
        break;
      }
      accept_left(st, ev);
      if (eps >= opts_.eps_max || k >= opts_.max_outer) {
        rep.found = false;
        rep.rho_m = std::numeric_limits<double>::infinity();
        rep.E_star = st.left->flow.E;
        rep.log = st.log;
        rep.outer_iterations = k;
        log::info("no coalescence up to eps_max = " + std::to_string(opts_.eps_max));
        finalize(rep, t0);
        return rep;
      }
      eps = std::min(eps * opts_.growth, opts_.eps_max);
    }

    while (st.hi - st.lo > opts_.eps_tol && k < opts_.max_outer) {
      const FEvaluation& lo = *st.left;
      double cand = 0.5 * (st.lo + st.hi);
      StepKind kind = StepKind::bisection;
      if (lo.reliable && lo.fprime < 0 && lo.f > opts_.outer_zero_tol()) {
        double newton = lo.eps - lo.f / lo.fprime;
        if (newton > st.lo && newton < st.hi) {
          cand = newton;
          kind = StepKind::newton;
        }
      }
      if (kind == StepKind::bisection && !lo.reliable)
        log::debug("derivative unreliable at eps=" + std::to_string(lo.eps) + "; bisecting");
      FEvaluation ev = evaluate_f(cand);
      record(st, ev, kind, ++k, rep);
      if (ev.right)
        accept_right(st, std::move(ev));
      else
        accept_left(st, ev);
    }

    const FEvaluation& hi = *st.right;
    rep.found = true;
    rep.rho_m = hi.coalesced_eps;
    rep.E_star = hi.flow.E;
    rep.E_star.epsilon = hi.coalesced_eps;
    rep.outer_iterations = k;
    rep.log = st.log;
    finalize(rep, t0);
    return rep;
  }

 private:
  struct Solved {
    double eps;
    Perturbation E;
  };

  Perturbation nearest_warm_start(double eps) const {
    const Solved* best = nullptr;
    for (const Solved& s : solved_)
      if (!best || std::abs(s.eps - eps) < std::abs(best->eps - eps)) best = &s;
    return best ? best->E : initial_perturbation(eps);
  }

  // Crossed flow: the reference node is overtaken at A + eps E. Bisect on the
  // segment s -> A + s eps E for a point where the top-m range is within
  // tolerance.
  void bisect_segment(FEvaluation& ev) {
    const Index ref = reference_top();
    const auto& e = ev.flow.E.entries;
    auto probe = [&](double s, PerronPair& pair) {
      SparseMatrix m = a_.matrix(perturbed_weights(a_, e, s * ev.eps));
      pair = perron_pair(m, a_.directed(), opts_.flow.eig, &ev.flow.bundle.pair.v);
      return overtake_margin(pair.v, ref);
    };
    double s_lo = 0.0, s_hi = 1.0;
    PerronPair pair;
    PerronPair best = ev.flow.bundle.pair;
    for (int it = 0; it < 200; ++it) {
      double s = 0.5 * (s_lo + s_hi);
      double margin = probe(s, pair);
      if (margin > 0) {
        s_hi = s;
        best = pair;
      } else {
        s_lo = s;
      }
      TopMSelection sel = top_m_indices(best.v, opts_.m);
      if (selection_range(best.v, sel) <= opts_.flow.coalesce_tol) break;
    }
    TopMSelection sel = top_m_indices(best.v, opts_.m);
    ev.coalesced_eps = s_hi * ev.eps;
    ev.f = functional_value(best.v, sel);
    ev.flow.E.epsilon = ev.coalesced_eps;
    ev.flow.bundle.pair = best;
    ev.flow.bundle.selection = sel;
    ev.flow.bundle.F = ev.f;
    ev.flow.bundle.range = selection_range(best.v, sel);
  }

  void record(OuterState& st, const FEvaluation& ev, StepKind kind, int k,
              RadiusReport& rep) {
    OuterIterate it;
    it.k = k;
    it.kind = kind;
    it.eps = ev.eps;
    it.f = ev.f;
    it.fprime = ev.fprime;
    it.reliable = ev.reliable;
    it.right = ev.right;
    it.coalesced_eps = ev.coalesced_eps;
    it.status = ev.flow.status;
    it.inner_steps = ev.flow.steps;
    it.lo = st.lo;
    it.hi = st.hi;
    rep.inner_steps_total += ev.flow.steps;
    if (ev.flow.status == FlowStatus::stalled) rep.stalled = true;
    st.log.push_back(it);
    if (outer_obs_) outer_obs_(it);
    log::info(std::string(to_string(kind)) + " eps=" + std::to_string(ev.eps) +
              " f=" + std::to_string(ev.f) + " status=" + to_string(ev.flow.status));
  }

  void accept_left(OuterState& st, const FEvaluation& ev) {
    lefts_.push_back(ev);
    if (ev.eps > st.lo && ev.eps < st.hi) {
      st.lo = ev.eps;
      st.left = ev;
    }
  }

  void accept_right(OuterState& st, FEvaluation ev) {
    if (ev.coalesced_eps >= st.hi) return;
    st.hi = ev.coalesced_eps;
    st.right = std::move(ev);
    if (st.lo >= st.hi) {
      // The new coalescing perturbation is shorter than a previous left
      // probe; fall back to the largest left evaluation below it.
      const FEvaluation* best = nullptr;
      for (const FEvaluation& l : lefts_)
        if (l.eps < st.hi && (!best || l.eps > best->eps)) best = &l;
      st.left = *best;
      st.lo = best->eps;
    }
  }

  void finalize(RadiusReport& rep,
                std::chrono::steady_clock::time_point t0) const {
    if (rep.found) {
      rep.perturbed_weights = perturbed_weights(a_, rep.E_star.entries, rep.rho_m);
      PerronPair after = perron_pair(a_.matrix(rep.perturbed_weights),
                                     a_.directed(), opts_.flow.eig);
      TopMSelection sel = top_m_indices(after.v, opts_.m);
      rep.v_after = after.v;
      rep.ranking_after = rank_nodes(after.v);
      rep.coalesced_indices = sel.indices;
      rep.common_value = sel.mean;
      rep.coalesced_range = selection_range(after.v, sel);
    }
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  WeightedGraph a_;
  EdgePattern pattern_;
  OuterOptions opts_;
  std::optional<LinearConstraint> lc_;
  PerronPair base_pair_;
  TopMSelection base_selection_;
  GradientBundle base_;
  std::vector<Solved> solved_;
  std::vector<FEvaluation> lefts_;
  InnerTraceObserver inner_obs_;
  OuterTraceObserver outer_obs_;
};

/// Convenience wrapper: radius of a normalized graph over a pattern.
inline RadiusReport newton_bisection(const WeightedGraph& a, const EdgePattern& p,
                                     const OuterOptions& opts,
                                     std::optional<LinearConstraint> lc = {}) {
  RadiusSolver solver(a, p, opts, std::move(lc));
  return solver.solve();
}

}  // namespace perron_radius
