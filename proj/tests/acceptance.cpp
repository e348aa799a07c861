// Acceptance checks: one PASS/FAIL line per criterion after the informational lines.

#include "support.hpp"
#include "perron_radius/selfcheck.hpp"

#include <Eigen/SVD>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

using namespace perron_radius;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::map<int, std::pair<bool, std::string>> verdicts;

void verdict(int id, bool ok, const std::string& what) { verdicts[id] = {ok, what}; }

void info(const std::string& s) { std::printf("info: %s\n", s.c_str()); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Flow invariants over every accepted inner step of every run below.
struct InvariantMonitor {
  std::size_t steps = 0;
  std::size_t violations = 0;
  double worst_norm = 0.0;
  double worst_floor = 0.0;
  bool asymmetric = false;
  std::map<std::string, double> last_f;  // per run key

  void record(const std::string& run, const FlowRecord& r) {
    ++steps;
    auto it = last_f.find(run);
    if (r.step > 0 && it != last_f.end() && !(r.F < it->second)) ++violations;
    last_f[run] = r.F;
    worst_norm = std::max(worst_norm, r.norm_error);
    worst_floor = std::max(worst_floor, -r.floor_margin);
    if (!r.symmetric) asymmetric = true;
  }
  bool ok() const {
    return steps > 0 && violations == 0 && worst_norm <= 1e-12 && worst_floor <= 1e-14 &&
           !asymmetric;
  }
};

InvariantMonitor monitor;

void watch(RadiusSolver& s, const std::string& tag) {
  // Each inner run starts at step 0; key the monotonicity check on (tag, eps).
  s.set_inner_observer([tag](double eps, const FlowRecord& r) {
    monitor.record(tag + fmt("@%.17g", eps), r);
  });
}

bool coalesces(const WeightedGraph& g, const std::vector<double>& w, int m, double tol) {
  PerronPair p = perron_pair(g.matrix(w), g.directed());
  return selection_range(p.v, top_m_indices(p.v, m)) <= tol;
}

void criterion_1() {
  auto t0 = Clock::now();
  WeightedGraph a = fixtures::four_node();
  WeightedGraph at = fixtures::four_node_perturbed();
  PerronPair p = perron_pair(a.matrix(), false);
  PerronPair q = perron_pair(at.matrix(), false);
  double elapsed = seconds_since(t0);
  const double va[] = {0.5665, 0.1570, 0.5844, 0.5594};
  const double vt[] = {0.5774, 0.1602, 0.5772, 0.5548};
  double worst = 0.0;
  for (Index i = 0; i < 4; ++i)
    worst = std::max({worst, std::abs(p.v(i) - va[i]), std::abs(q.v(i) - vt[i])});
  info(fmt("v(A)  = %.6f %.6f %.6f %.6f", p.v(0), p.v(1), p.v(2), p.v(3)));
  info(fmt("v(At) = %.6f %.6f %.6f %.6f", q.v(0), q.v(1), q.v(2), q.v(3)));
  verdict(1, worst <= 5e-5 && elapsed < 0.010,
          fmt("four-node Perron vectors: max dev %.2e (tol 5e-5), %.2f ms (limit 10 ms)", worst,
              elapsed * 1e3));
}

void criterion_2() {
  PerronPair p = perron_pair(fixtures::nine_node().matrix(), false);
  const double expected[] = {.4844, .2712, .2602, .4553, .2154, .2433, .2941, .2082, .4259};
  double worst = 0.0;
  for (Index i = 0; i < 9; ++i) worst = std::max(worst, std::abs(p.v(i) - expected[i]));
  double dl = std::abs(p.lambda - 0.5559);
  info(fmt("lambda = %.8f", p.lambda));
  verdict(2, dl <= 1e-4 && worst <= 5e-5,
          fmt("nine-node eigenpair: |lambda - 0.5559| = %.2e (tol 1e-4), max |v dev| = %.2e "
              "(tol 5e-5)",
              dl, worst));
}

void criterion_3() {
  WeightedGraph g = fixtures::nine_node();
  std::vector<double> zero(g.edge_count(), 0.0);
  BorderedSolver s;
  GradientBundle b = evaluate_gradient(g, EdgePattern::full(g), zero, 0.0, 2, s);
  double norm = b.gradient_norm();
  double unit_dev = 0.0, scaled_dev = 0.0;
  for (const auto& e : fixtures::printed_g0()) {
    double raw = b.G[*g.find(e.i - 1, e.j - 1)];
    unit_dev = std::max(unit_dev, std::abs(raw / norm - e.value));
    scaled_dev = std::max(scaled_dev, std::abs(100.0 * raw - e.value));
  }
  info(fmt("||G0|| = %.6f; max |100 G0 - printed| = %.2e", norm, scaled_dev));
  verdict(3, unit_dev <= 5e-4,
          fmt("unit-norm G0 vs printed entries: max dev %.2e (tol 5e-4)", unit_dev));
}

RadiusReport full_report;

void criterion_4() {
  WeightedGraph g = fixtures::nine_node();
  EdgePattern p = EdgePattern::full(g);
  OuterOptions o;
  auto t0 = Clock::now();
  RadiusSolver s(g, p, o);
  watch(s, "c4");
  full_report = s.solve();
  double elapsed = seconds_since(t0);
  double dev = std::abs(full_report.rho_m - 0.0279064);
  info(fmt("rho_2 = %.8f, outer %d, inner %d", full_report.rho_m, full_report.outer_iterations,
           full_report.inner_steps_total));
  verdict(4,
          full_report.found && dev <= 1e-3 && o.flow.coalesce_tol == 1e-5 && elapsed < 10.0 &&
              coalesces(g, full_report.perturbed_weights, 2, 1e-5),
          fmt("nine-node radius, full pattern: dev %.2e (tol 1e-3), tol 1e-5, %.2f s (limit 10 s)",
              dev, elapsed));
}

void criterion_5() {
  WeightedGraph g = fixtures::nine_node();
  EdgePattern p = fixtures::nine_node_subset(g);
  OuterOptions o;
  auto t0 = Clock::now();
  RadiusSolver s(g, p, o);
  watch(s, "c5");
  RadiusReport r = s.solve();
  double elapsed = seconds_since(t0);
  const double ref = 0.1407018;
  double dev = std::abs(r.rho_m - ref);
  bool on_pattern = true, feasible = true;
  double d2 = 0.0;
  for (std::size_t k = 0; k < g.edge_count(); ++k) {
    double d = r.perturbed_weights[k] - g.weights()[k];
    if (!p.contains(k) && d != 0.0) on_pattern = false;
    if (r.perturbed_weights[k] < o.flow.delta - 1e-14) feasible = false;
    d2 += d * d;
  }
  bool verified = r.found && on_pattern && feasible &&
                  std::abs(std::sqrt(d2) - r.rho_m) <= 1e-10 &&
                  coalesces(g, r.perturbed_weights, 2, 1e-5);
  bool ok = verified && (dev <= 5e-3 || r.rho_m < ref) && elapsed < 30.0;
  info(fmt("rho_2 = %.8f, outer %d, perturbation verified: %s", r.rho_m, r.outer_iterations,
           verified ? "yes" : "no"));
  verdict(5, ok, fmt("nine-node radius, subpattern: dev %.2e (tol 5e-3), %.2f s (limit 30 s)", dev,
                     elapsed));
}

void criterion_6() {
  WeightedGraph g = fixtures::nine_node();
  EdgePattern p = EdgePattern::full(g);
  std::vector<double> zero(g.edge_count(), 0.0);
  BorderedSolver s;
  GradientBundle b = evaluate_gradient(g, p, zero, 0.0, 2, s);
  Perturbation e{b.G, 0.029};
  double n = b.gradient_norm();
  for (double& x : e.entries) x = -x / n;
  FlowOptions o;
  FlowResult r = minimize_inner(g, 0.029, e, 2, o, p, nullptr, Index{0},
                                [](const FlowRecord& rec) { monitor.record("c6", rec); });
  double gap = r.bundle.pair.v(0) - r.bundle.pair.v(3);
  info(fmt("status %s after %d steps, F = %.3e", to_string(r.status), r.steps, r.F));
  verdict(6, std::abs(gap + 0.0011) <= 5e-4,
          fmt("inner flow at eps = 0.029: v1 - v4 = %.5f (target -0.0011, tol 5e-4)", gap));
}

void criterion_7() {
  SelfCheckOptions o;
  SuiteResult d = check_gradient_suite(true, o);
  SuiteResult u = check_gradient_suite(false, o);
  verdict(7, d.passed && u.passed && d.cases == 10 && u.cases == 10,
          fmt("gradient vs finite differences on %d directed + %d undirected 8-node graphs: "
              "worst rel err %.2e (tol 1e-5)",
              d.cases, u.cases, std::max(d.worst, u.worst)));
}

void criterion_8() {
  WeightedGraph g = fixtures::nine_node();
  OuterOptions o;
  o.flow.crossing_exit = false;
  RadiusSolver s(g, EdgePattern::full(g), o);
  watch(s, "c8");
  const double h = 1e-5;
  double worst = 0.0;
  int sampled = 0;
  for (double eps : {0.005, 0.01, 0.015, 0.02, 0.025}) {
    FEvaluation mid = s.evaluate_f(eps);
    Perturbation warm = mid.flow.E;
    double fp = s.evaluate_f(eps + h, &warm).f;
    double fm = s.evaluate_f(eps - h, &warm).f;
    double fd = (fp - fm) / (2 * h);
    double rel = std::abs(mid.fprime - fd) / std::abs(fd);
    info(fmt("eps %.3f: f' = %.6e, fd = %.6e, rel %.2e", eps, mid.fprime, fd, rel));
    worst = std::max(worst, rel);
    ++sampled;
  }
  verdict(8, sampled == 5 && worst <= 1e-3,
          fmt("outer derivative vs finite differences at 5 eps: worst rel err %.2e (tol 1e-3)",
              worst));
}

void criterion_9() {
  SelfCheckOptions o;
  SuiteResult a = check_group_inverse_suite(o);
  SuiteResult b = check_pi_formula_suite(o);
  verdict(9, a.passed && b.passed && a.cases == 50 && b.cases == 50,
          fmt("group inverse on 50 random 6x6 matrices: defining equations %.2e, Pi M+ Pi %.2e "
              "(tol 1e-10)",
              a.worst, b.worst));
}

void criterion_11() {
  WeightedGraph g = fixtures::nine_node();
  PerronPair pair = perron_pair(g.matrix(full_report.perturbed_weights), false);
  BorderedSolver s;
  s.update(g.matrix(full_report.perturbed_weights), pair, true);
  Rank2Factors f = rank2_decomposition(pair, top_m_indices(pair.v, 2), s);
  Eigen::JacobiSVD<DenseMatrix> svd(f.dense());
  const Vector& sv = svd.singularValues();
  double ratio = sv(2) / sv(0);
  verdict(11, full_report.found && ratio <= 1e-6,
          fmt("rank-2 structure at the nine-node minimizer: s3/s1 = %.2e (tol 1e-6)", ratio));
}

void criterion_12() {
  synthetic::Rng rng(2024);
  WeightedGraph g = normalize_frobenius(synthetic::random_four_regular(1000, rng));
  OuterOptions o;
  auto t0 = Clock::now();
  RadiusSolver s(g, EdgePattern::full(g), o);
  watch(s, "c12");
  RadiusReport r = s.solve();
  double elapsed = seconds_since(t0);
  double f_final = std::numeric_limits<double>::infinity();
  if (r.found) {
    PerronPair p = perron_pair(g.matrix(r.perturbed_weights), false);
    f_final = functional_value(p.v, top_m_indices(p.v, 2));
  }
  info(fmt("n = %d, edges = %zu, rho_2 = %.8f, inner %d", int(g.size()), g.edge_count(), r.rho_m,
           r.inner_steps_total));
  verdict(12,
          r.found && f_final <= o.outer_zero_tol() && elapsed < 120.0 &&
              r.outer_iterations <= 50,
          fmt("4-regular n = 1000: f = %.2e (tol %.2e), %d outer iterations (limit 50), %.1f s "
              "(limit 120 s)",
              f_final, o.outer_zero_tol(), r.outer_iterations, elapsed));
}

void criterion_10() {
  verdict(10, monitor.ok(),
          fmt("flow invariants over %zu accepted steps: %zu non-decreasing F, norm err %.2e "
              "(tol 1e-12), floor violation %.2e (tol 1e-14), symmetric %s",
              monitor.steps, monitor.violations, monitor.worst_norm, monitor.worst_floor,
              monitor.asymmetric ? "no" : "yes"));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_11();
  criterion_12();
  criterion_10();
  int failures = 0;
  std::printf("\n");
  for (const auto& [id, v] : verdicts) {
    std::printf("%s %2d %s\n", v.first ? "PASS" : "FAIL", id, v.second.c_str());
    if (!v.first) ++failures;
  }
  std::printf("%d of %zu criteria failed\n", failures, verdicts.size());
  return failures == 0 ? 0 : 1;
}
