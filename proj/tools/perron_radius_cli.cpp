// perron-radius: robustness radius of Perron eigenvector centrality.

#include "perron_radius/perron_radius.hpp"
#include "perron_radius/selfcheck.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace perron_radius;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotFound = 2;

struct RunConfig {
  std::string input;
  std::string format = "auto";
  bool directed = false;
  bool undirected = false;
  int m = 2;
  double delta = 1e-8;
  double coalesce_tol = 1e-5;
  double eps0 = 1e-3;
  double eps_tol = 1e-7;
  double eps_max = 1.0;
  double h0 = 0.1;
  double theta = 2.0;
  int max_inner = 5000;
  double stat_tol = 1e-9;
  std::string subset;
  std::string linear_constraint;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::string grid;
  bool inject_fault = false;
};

void add_graph_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--input", cfg.input, "Graph file (Matrix Market or edge list)")->required();
  cmd->add_option("--format", cfg.format, "mtx | edges | auto (by extension)")
      ->check(CLI::IsMember({"auto", "mtx", "edges"}));
  auto* d = cmd->add_flag("--directed", cfg.directed, "Treat the graph as directed");
  auto* u = cmd->add_flag("--undirected", cfg.undirected, "Treat the graph as undirected");
  d->excludes(u);
}

void add_solver_options(CLI::App* cmd, RunConfig& cfg) {
  auto positive = CLI::PositiveNumber;
  cmd->add_option("--m", cfg.m, "Number of top entries to coalesce")->check(CLI::Range(2, 1 << 30));
  cmd->add_option("--delta", cfg.delta, "Lower bound for perturbed weights")->check(positive);
  cmd->add_option("--coalesce-tol", cfg.coalesce_tol, "Coalescence tolerance")->check(positive);
  cmd->add_option("--eps0", cfg.eps0, "First outer probe")->check(positive);
  cmd->add_option("--eps-tol", cfg.eps_tol, "Outer bracket tolerance")->check(positive);
  cmd->add_option("--eps-max", cfg.eps_max, "Largest perturbation size tried")->check(positive);
  cmd->add_option("--h0", cfg.h0, "Initial inner step size")->check(positive);
  cmd->add_option("--theta", cfg.theta, "Step size factor (> 1)")->check(CLI::Range(1.0 + 1e-12, 1e6));
  cmd->add_option("--max-inner", cfg.max_inner, "Inner step limit per eps")->check(positive);
  cmd->add_option("--stat-tol", cfg.stat_tol, "Inner stationarity tolerance")->check(positive);
  cmd->add_option("--subset", cfg.subset, "File of perturbable edges (i j per line)");
  cmd->add_option("--linear-constraint", cfg.linear_constraint,
                  "File with lines 'i j b_ij' and one 'c <value>'");
  cmd->add_option("--seed", cfg.seed, "Seed for randomized checks");
}

GraphFormat resolve_format(const RunConfig& cfg) {
  if (cfg.format == "mtx") return GraphFormat::matrix_market;
  if (cfg.format == "edges") return GraphFormat::edge_list;
  std::string ext = fs::path(cfg.input).extension().string();
  return ext == ".mtx" ? GraphFormat::matrix_market : GraphFormat::edge_list;
}

// Explicit flag wins; otherwise a symmetric Matrix Market header means
// undirected and everything else directed.
bool resolve_directed(const RunConfig& cfg, GraphFormat format) {
  if (cfg.directed) return true;
  if (cfg.undirected) return false;
  if (format == GraphFormat::matrix_market) {
    std::ifstream in(cfg.input);
    std::string header;
    std::getline(in, header);
    for (char& c : header) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (header.find("symmetric") != std::string::npos) return false;
  }
  return true;
}

WeightedGraph load_input(const RunConfig& cfg) {
  GraphFormat format = resolve_format(cfg);
  WeightedGraph g = load_graph(cfg.input, format, resolve_directed(cfg, format));
  if (!check_strong_connectivity(g))
    throw InputError(std::string("input graph is not ") +
                     (g.directed() ? "strongly connected" : "connected") +
                     "; the irreducibility assumption (strong connectivity) does not hold");
  return g;
}

EdgePattern load_pattern(const RunConfig& cfg, const WeightedGraph& g) {
  if (cfg.subset.empty()) return EdgePattern::full(g);
  std::ifstream in(cfg.subset);
  if (!in) throw InputError("cannot open subset file '" + cfg.subset + "'");
  return EdgePattern::restrict_to(g, read_pair_list(in));
}

std::optional<LinearConstraint> load_constraint(const RunConfig& cfg, const WeightedGraph& g,
                                                const EdgePattern& p) {
  if (cfg.linear_constraint.empty()) return std::nullopt;
  std::ifstream in(cfg.linear_constraint);
  if (!in) throw InputError("cannot open constraint file '" + cfg.linear_constraint + "'");
  LinearConstraint lc;
  lc.b.assign(g.edge_count(), 0.0);
  std::vector<bool> seen(g.edge_count(), false);
  bool have_c = false;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first) || first[0] == '#' || first[0] == '%') continue;
    if (first == "c") {
      if (!(ss >> lc.c)) throw InputError("bad constraint line: '" + line + "'");
      have_c = true;
      continue;
    }
    long i = 0, j = 0;
    double b = 0.0;
    std::istringstream full(line);
    if (!(full >> i >> j >> b)) throw InputError("bad constraint line: '" + line + "'");
    auto pos = g.find(i - 1, j - 1);
    if (!pos || !p.contains(*pos))
      throw InputError("constraint coefficient on (" + std::to_string(i) + ", " +
                       std::to_string(j) + ") is outside the perturbable pattern");
    lc.b[*pos] = b;
    seen[*pos] = true;
    if (!g.directed() && !seen[g.mirror(*pos)]) lc.b[g.mirror(*pos)] = b;
  }
  if (!have_c) throw InputError("constraint file lacks a 'c <value>' line");
  return lc;
}

OuterOptions outer_options(const RunConfig& cfg) {
  OuterOptions o;
  o.m = cfg.m;
  o.eps0 = cfg.eps0;
  o.eps_tol = cfg.eps_tol;
  o.eps_max = cfg.eps_max;
  o.flow.delta = cfg.delta;
  o.flow.coalesce_tol = cfg.coalesce_tol;
  o.flow.h0 = cfg.h0;
  o.flow.theta = cfg.theta;
  o.flow.max_inner = cfg.max_inner;
  o.flow.stat_tol = cfg.stat_tol;
  return o;
}

json one_based(const std::vector<Index>& idx) {
  json out = json::array();
  for (Index i : idx) out.push_back(i + 1);
  return out;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json report_json(const RunConfig& cfg, const WeightedGraph& raw, const WeightedGraph& g,
                 const EdgePattern& p, const RadiusReport& r) {
  json j;
  j["found"] = r.found;
  j["status"] = r.found ? "coalesced" : "radius > eps_max";
  j["rho_m"] = r.found ? json(r.rho_m) : json(nullptr);
  j["m"] = r.m;
  j["coalesce_tol"] = r.coalesce_tol;
  j["eps_max"] = cfg.eps_max;
  j["input"] = cfg.input;
  j["subset"] = cfg.subset.empty() ? json(nullptr) : json(cfg.subset);
  j["directed"] = g.directed();
  j["n"] = g.size();
  j["normalization_beta"] = g.normalization()->beta;
  j["original_frobenius_norm"] = frobenius_norm(raw.weights());
  j["coalesced_indices"] = one_based(r.coalesced_indices);
  j["common_value"] = r.common_value;
  j["coalesced_range"] = r.coalesced_range;
  j["ranking_before"] = one_based(r.ranking_before);
  j["ranking_after"] = one_based(r.ranking_after);
  j["v_before"] = vector_json(r.v_before);
  j["v_after"] = vector_json(r.v_after);
  j["outer_iterations"] = r.outer_iterations;
  j["inner_steps_total"] = r.inner_steps_total;
  j["stalled"] = r.stalled;
  j["wall_time_seconds"] = r.wall_time;
  json pert = json::array();
  if (r.found)
    for (std::size_t k : p.positions())
      pert.push_back({{"i", g.edges()[k].row + 1}, {"j", g.edges()[k].col + 1},
                      {"e", r.E_star.entries[k]}});
  j["perturbation"] = pert;
  json log = json::array();
  for (const OuterIterate& it : r.log)
    log.push_back({{"k", it.k}, {"kind", to_string(it.kind)}, {"eps", it.eps}, {"f", it.f},
                   {"fprime", it.fprime}, {"right", it.right}, {"status", to_string(it.status)},
                   {"inner_steps", it.inner_steps}});
  j["outer_log"] = log;
  return j;
}

int cmd_radius(const RunConfig& cfg) {
  WeightedGraph raw = load_input(cfg);
  WeightedGraph g = normalize_frobenius(raw);
  EdgePattern p = load_pattern(cfg, g);
  auto lc = load_constraint(cfg, g, p);

  fs::create_directories(cfg.out_dir);
  std::ofstream trace(fs::path(cfg.out_dir) / "trace.ndjson");
  if (!trace) throw InputError("cannot write to '" + cfg.out_dir + "'");

  RadiusSolver solver(g, p, outer_options(cfg), lc);
  solver.set_inner_observer([&](double eps, const FlowRecord& r) {
    trace << json{{"type", "inner"}, {"eps", eps}, {"step", r.step}, {"h", r.h}, {"F", r.F},
                  {"z_norm", r.z_norm}, {"active", r.active}, {"swaps", r.swaps}}.dump()
          << '\n';
  });
  solver.set_outer_observer([&](const OuterIterate& it) {
    trace << json{{"type", "outer"}, {"k", it.k}, {"kind", to_string(it.kind)},
                  {"eps", it.eps}, {"f", it.f}, {"fprime", it.fprime},
                  {"reliable", it.reliable}, {"right", it.right},
                  {"coalesced_eps", it.coalesced_eps}, {"status", to_string(it.status)},
                  {"inner_steps", it.inner_steps}}.dump()
          << '\n';
  });
  RadiusReport r = solver.solve();

  std::ofstream(fs::path(cfg.out_dir) / "report.json") << report_json(cfg, raw, g, p, r).dump(2)
                                                       << '\n';
  if (!r.found) {
    std::cout << "radius > eps_max (" << cfg.eps_max << ")\n";
    return kExitNotFound;
  }
  save_graph((fs::path(cfg.out_dir) / "perturbed.mtx").string(),
             g.with_weights(r.perturbed_weights, g.normalization()));
  std::cout << std::setprecision(10) << "rho_m = " << r.rho_m << "\n"
            << "coalesced nodes:";
  for (Index i : r.coalesced_indices) std::cout << ' ' << i + 1;
  std::cout << "\nouter iterations: " << r.outer_iterations
            << ", inner steps: " << r.inner_steps_total << "\n";
  return kExitOk;
}

int cmd_rank(const RunConfig& cfg) {
  WeightedGraph g = normalize_frobenius(load_input(cfg));
  PerronPair pair = perron_pair(g.matrix(), false);
  std::vector<Index> order = rank_nodes(pair.v);
  std::cout << "node centrality rank\n" << std::setprecision(17);
  for (std::size_t k = 0; k < order.size(); ++k)
    std::cout << order[k] + 1 << ' ' << pair.v(order[k]) << ' ' << k + 1 << '\n';
  return kExitOk;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    double a = 0, b = 0, step = 0;
    char c1 = 0, c2 = 0;
    std::istringstream ss(text);
    if (!(ss >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0) || b < a)
      throw InputError("grid must be 'start:stop:step' or a comma-separated list");
    for (long k = 0; a + k * step <= b * (1 + 1e-12); ++k) out.push_back(a + k * step);
  } else {
    std::istringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  }
  for (double e : out)
    if (!(e > 0)) throw InputError("grid values must be positive");
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_curve(const RunConfig& cfg) {
  WeightedGraph g = normalize_frobenius(load_input(cfg));
  EdgePattern p = load_pattern(cfg, g);
  auto lc = load_constraint(cfg, g, p);
  OuterOptions o = outer_options(cfg);
  o.flow.crossing_exit = false;
  RadiusSolver solver(g, p, o, lc);
  std::cout << "eps,f,fprime\n" << std::setprecision(17);
  for (double eps : parse_grid(cfg.grid)) {
    FEvaluation ev = solver.evaluate_f(eps);
    std::cout << eps << ',' << ev.f << ',' << ev.fprime << '\n';
  }
  return kExitOk;
}

int cmd_selfcheck(const RunConfig& cfg) {
  SelfCheckOptions o;
  o.seed = cfg.seed;
  o.inject_gradient_sign_error = cfg.inject_fault;
  bool ok = true;
  for (const SuiteResult& r : run_selfcheck(o)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " cases=" << r.cases
              << std::scientific << std::setprecision(3) << " worst=" << r.worst
              << " limit=" << r.limit << std::defaultfloat << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robustness radius of Perron eigenvector centrality"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* radius = app.add_subcommand("radius", "Compute the robustness radius");
  add_graph_options(radius, cfg);
  add_solver_options(radius, cfg);
  radius->add_option("--out-dir", cfg.out_dir, "Directory for report.json, perturbed.mtx, trace.ndjson");

  auto* rank = app.add_subcommand("rank", "Print Perron centralities and ranking");
  add_graph_options(rank, cfg);

  auto* curve = app.add_subcommand("curve", "Sample f(eps) and f'(eps) as CSV");
  add_graph_options(curve, cfg);
  add_solver_options(curve, cfg);
  curve->add_option("--grid", cfg.grid, "start:stop:step or comma-separated eps values")->required();

  auto* selfcheck = app.add_subcommand("selfcheck", "Run the built-in property suites");
  selfcheck->add_option("--seed", cfg.seed, "Seed for the random instances");
  selfcheck->add_flag("--inject-fault", cfg.inject_fault, "Flip the gradient sign (tests the checks)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }
  try {
    if (radius->parsed()) return cmd_radius(cfg);
    if (rank->parsed()) return cmd_rank(cfg);
    if (curve->parsed()) return cmd_curve(cfg);
    if (selfcheck->parsed()) return cmd_selfcheck(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
