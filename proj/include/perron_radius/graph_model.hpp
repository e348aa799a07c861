#pragma once

// Sparse weighted graphs with an explicit edge pattern.
//
// Edges are kept in a canonical row-major sorted coordinate list. Every
// per-edge quantity in the library (weights, perturbation entries, gradient
// entries) is a plain vector aligned with that list, so pattern projections
// reduce to index filters.

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace perron_radius {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using RowSparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Raised for malformed or unsupported input data.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Edge {
  Index row = 0;
  Index col = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct NormalizationRecord {
  double beta = 1.0;
  double original_frobenius_norm = 1.0;
};

/**
 * Weighted adjacency matrix of a graph. Entry (i, j) is the weight of the
 * edge from node j to node i. Immutable after construction.
 *
 * Undirected graphs store both (i, j) and (j, i); mirror(p) gives the
 * position of the transposed entry.
 */
class WeightedGraph {
 public:
  WeightedGraph() = default;

  WeightedGraph(Index n, std::vector<Edge> edges, std::vector<double> weights,
                bool directed,
                std::optional<NormalizationRecord> normalization = {})
      : n_(n), directed_(directed), normalization_(normalization) {
    if (n <= 0) throw InputError("graph must have at least one node");
    if (edges.size() != weights.size())
      throw InputError("edge and weight counts differ");
    if (edges.empty()) throw InputError("no edges");

    std::vector<std::size_t> order(edges.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return edges[a] < edges[b]; });
    edges_.reserve(edges.size());
    weights_.reserve(edges.size());
    for (std::size_t k : order) {
      const Edge& e = edges[k];
      if (e.row < 0 || e.row >= n || e.col < 0 || e.col >= n)
        throw InputError("edge index out of range");
      if (!edges_.empty() && edges_.back() == e)
        throw InputError("duplicate edge (" + std::to_string(e.row + 1) + ", " +
                         std::to_string(e.col + 1) + ")");
      if (!(weights[k] > 0.0) || !std::isfinite(weights[k]))
        throw InputError("nonpositive weight on edge (" +
                         std::to_string(e.row + 1) + ", " +
                         std::to_string(e.col + 1) + ")");
      edges_.push_back(e);
      weights_.push_back(weights[k]);
    }

    row_start_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (const Edge& e : edges_) ++row_start_[static_cast<std::size_t>(e.row) + 1];
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_); ++i)
      row_start_[i + 1] += row_start_[i];

    if (!directed_) {
      mirror_.resize(edges_.size());
      for (std::size_t p = 0; p < edges_.size(); ++p) {
        auto q = find(edges_[p].col, edges_[p].row);
        if (!q) throw InputError("undirected graph is missing a mirror edge");
        if (weights_[*q] != weights_[p])
          throw InputError("asymmetric weight under undirected flag on edge (" +
                           std::to_string(edges_[p].row + 1) + ", " +
                           std::to_string(edges_[p].col + 1) + ")");
        mirror_[p] = *q;
      }
    }
  }

  Index size() const { return n_; }
  std::size_t edge_count() const { return edges_.size(); }
  bool directed() const { return directed_; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const double> weights() const { return weights_; }
  const std::optional<NormalizationRecord>& normalization() const {
    return normalization_;
  }

  /// Position of the transposed entry; identity for directed graphs.
  std::size_t mirror(std::size_t p) const { return directed_ ? p : mirror_[p]; }

  std::optional<std::size_t> find(Index i, Index j) const {
    if (i < 0 || i >= n_) return std::nullopt;
    auto first = edges_.begin() + static_cast<std::ptrdiff_t>(row_start_[i]);
    auto last = edges_.begin() + static_cast<std::ptrdiff_t>(row_start_[i + 1]);
    auto it = std::lower_bound(first, last, Edge{i, j});
    if (it == last || *it != Edge{i, j}) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
  }

  /// Sparse matrix with the graph pattern and the given per-edge values.
  SparseMatrix matrix(std::span<const double> values) const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(edges_.size());
    for (std::size_t p = 0; p < edges_.size(); ++p)
      trip.emplace_back(edges_[p].row, edges_[p].col, values[p]);
    SparseMatrix m(n_, n_);
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  }
  SparseMatrix matrix() const { return matrix(weights_); }

  DenseMatrix dense(std::span<const double> values) const {
    DenseMatrix m = DenseMatrix::Zero(n_, n_);
    for (std::size_t p = 0; p < edges_.size(); ++p)
      m(edges_[p].row, edges_[p].col) = values[p];
    return m;
  }
  DenseMatrix dense() const { return dense(weights_); }

  /// Same pattern, new weights (validated again).
  WeightedGraph with_weights(std::vector<double> weights,
                             std::optional<NormalizationRecord> rec = {}) const {
    return WeightedGraph(n_, edges_, std::move(weights), directed_, rec);
  }

 private:
  Index n_ = 0;
  bool directed_ = true;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
  std::vector<std::size_t> row_start_;
  std::vector<std::size_t> mirror_;
  std::optional<NormalizationRecord> normalization_;
};

/**
 * A subset of the edge positions of a graph (the perturbable edges). For an
 * undirected graph the subset is closed under mirroring.
 */
class EdgePattern {
 public:
  static EdgePattern full(const WeightedGraph& g) {
    EdgePattern p;
    p.mask_.assign(g.edge_count(), true);
    p.positions_.resize(g.edge_count());
    for (std::size_t k = 0; k < g.edge_count(); ++k) p.positions_[k] = k;
    p.subset_ = false;
    return p;
  }

  /// Restriction to the listed (0-based) pairs; each must be an edge of g.
  static EdgePattern restrict_to(const WeightedGraph& g,
                                 std::span<const Edge> pairs) {
    EdgePattern p;
    p.mask_.assign(g.edge_count(), false);
    for (const Edge& e : pairs) {
      auto pos = g.find(e.row, e.col);
      if (!pos)
        throw InputError("subset edge (" + std::to_string(e.row + 1) + ", " +
                         std::to_string(e.col + 1) + ") is not an edge of the graph");
      if (p.mask_[*pos])
        throw InputError("duplicate subset edge (" + std::to_string(e.row + 1) +
                         ", " + std::to_string(e.col + 1) + ")");
      p.mask_[*pos] = true;
    }
    if (!g.directed())
      for (std::size_t k = 0; k < p.mask_.size(); ++k)
        if (p.mask_[k]) p.mask_[g.mirror(k)] = true;
    for (std::size_t k = 0; k < p.mask_.size(); ++k)
      if (p.mask_[k]) p.positions_.push_back(k);
    if (p.positions_.empty()) throw InputError("empty edge subset");
    p.subset_ = p.positions_.size() < g.edge_count();
    return p;
  }

  bool contains(std::size_t position) const { return mask_[position]; }
  std::span<const std::size_t> positions() const { return positions_; }
  std::size_t size() const { return positions_.size(); }
  std::size_t parent_edge_count() const { return mask_.size(); }
  bool is_subset() const { return subset_; }

  std::vector<Edge> pairs(const WeightedGraph& g) const {
    std::vector<Edge> out;
    out.reserve(positions_.size());
    for (std::size_t k : positions_) out.push_back(g.edges()[k]);
    return out;
  }

 private:
  std::vector<bool> mask_;
  std::vector<std::size_t> positions_;
  bool subset_ = false;
};

// ---------------------------------------------------------------------------
// Matrix helpers on dense matrices.

template <typename DX, typename DY>
double frobenius_inner(const Eigen::MatrixBase<DX>& x,
                       const Eigen::MatrixBase<DY>& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw std::invalid_argument("frobenius_inner: shape mismatch");
  return x.cwiseProduct(y).sum();
}

inline double frobenius_inner(std::span<const double> x,
                              std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("frobenius_inner: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

inline double frobenius_norm(std::span<const double> x) {
  return std::sqrt(frobenius_inner(x, x));
}

template <typename D>
DenseMatrix symmetrize(const Eigen::MatrixBase<D>& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("symmetrize: matrix is not square");
  return (m + m.transpose()) / 2.0;
}

template <typename D>
DenseMatrix skew(const Eigen::MatrixBase<D>& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("skew: matrix is not square");
  return (m - m.transpose()) / 2.0;
}

/// Orthogonal projection onto matrices supported on the pattern.
template <typename D>
DenseMatrix project_pattern(const Eigen::MatrixBase<D>& m,
                            const WeightedGraph& g, const EdgePattern& p) {
  if (m.rows() != g.size() || m.cols() != g.size() ||
      p.parent_edge_count() != g.edge_count())
    throw std::invalid_argument("project_pattern: dimension mismatch");
  DenseMatrix out = DenseMatrix::Zero(m.rows(), m.cols());
  for (std::size_t k : p.positions()) {
    const Edge& e = g.edges()[k];
    out(e.row, e.col) = m(e.row, e.col);
  }
  return out;
}

/// Pattern entries of a dense matrix as a per-edge vector (zero off p).
template <typename D>
std::vector<double> gather_pattern(const Eigen::MatrixBase<D>& m,
                                   const WeightedGraph& g,
                                   const EdgePattern& p) {
  if (m.rows() != g.size() || m.cols() != g.size())
    throw std::invalid_argument("gather_pattern: dimension mismatch");
  std::vector<double> out(g.edge_count(), 0.0);
  for (std::size_t k : p.positions()) {
    const Edge& e = g.edges()[k];
    out[k] = m(e.row, e.col);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Graph algorithms.

/// True iff the directed pattern forms a single strongly connected component.
inline bool check_strong_connectivity(const WeightedGraph& g) {
  const auto n = static_cast<std::size_t>(g.size());
  std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
  for (const Edge& e : g.edges()) {
    // weight a_ij is an arc j -> i
    fwd[static_cast<std::size_t>(e.col)].push_back(static_cast<std::size_t>(e.row));
    bwd[static_cast<std::size_t>(e.row)].push_back(static_cast<std::size_t>(e.col));
  }
  auto reaches_all = [n](const std::vector<std::vector<std::size_t>>& adj) {
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!q.empty()) {
      std::size_t u = q.front();
      q.pop();
      for (std::size_t w : adj[u])
        if (!seen[w]) {
          seen[w] = true;
          ++count;
          q.push(w);
        }
    }
    return count == n;
  };
  return reaches_all(fwd) && reaches_all(bwd);
}

/// Scales the weights to unit Frobenius norm and records the factor.
inline WeightedGraph normalize_frobenius(const WeightedGraph& g) {
  double norm = frobenius_norm(g.weights());
  if (!(norm > 0.0)) throw InputError("all-zero weights");
  double beta = 1.0 / norm;
  std::vector<double> w(g.weights().begin(), g.weights().end());
  for (double& x : w) x *= beta;
  // Original norm relative to the raw input, if g itself was normalized.
  NormalizationRecord rec{beta, norm};
  if (g.normalization()) {
    rec.beta = beta * g.normalization()->beta;
    rec.original_frobenius_norm = 1.0 / rec.beta;
  }
  return g.with_weights(std::move(w), rec);
}

// ---------------------------------------------------------------------------
// File I/O. Indices are 1-based on disk.

enum class GraphFormat { matrix_market, edge_list };

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct RawEntry {
  Index i;
  Index j;
  double w;
};

// Builds a graph from raw 0-based entries. For undirected graphs a single
// listing of an off-diagonal pair is mirrored; a double listing must agree.
inline WeightedGraph assemble(Index n, const std::vector<RawEntry>& raw,
                              bool directed) {
  std::vector<Edge> edges;
  std::vector<double> weights;
  if (directed) {
    for (const auto& r : raw) {
      edges.push_back({r.i, r.j});
      weights.push_back(r.w);
    }
    return WeightedGraph(n, std::move(edges), std::move(weights), true);
  }
  std::vector<std::pair<Edge, double>> all;
  for (const auto& r : raw) all.push_back({{r.i, r.j}, r.w});
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t k = 1; k < all.size(); ++k)
    if (all[k].first == all[k - 1].first)
      throw InputError("duplicate edge (" + std::to_string(all[k].first.row + 1) +
                       ", " + std::to_string(all[k].first.col + 1) + ")");
  auto lookup = [&](Edge e) -> const double* {
    auto it = std::lower_bound(
        all.begin(), all.end(), e,
        [](const auto& a, const Edge& key) { return a.first < key; });
    if (it == all.end() || it->first != e) return nullptr;
    return &it->second;
  };
  for (const auto& [e, w] : all) {
    edges.push_back(e);
    weights.push_back(w);
    if (e.row == e.col) continue;
    const double* other = lookup({e.col, e.row});
    if (!other) {
      edges.push_back({e.col, e.row});
      weights.push_back(w);
    } else if (*other != w) {
      throw InputError("asymmetric weight under undirected flag on edge (" +
                       std::to_string(e.row + 1) + ", " +
                       std::to_string(e.col + 1) + ")");
    }
  }
  return WeightedGraph(n, std::move(edges), std::move(weights), false);
}

inline Index parse_index(const std::string& tok, Index n) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &used);
  } catch (const std::exception&) {
    throw InputError("cannot parse node index '" + tok + "'");
  }
  if (used != tok.size()) throw InputError("cannot parse node index '" + tok + "'");
  if (v < 1 || (n > 0 && v > n))
    throw InputError("node index " + tok + " out of range");
  return static_cast<Index>(v - 1);
}

inline double parse_weight(const std::string& tok) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw InputError("cannot parse weight '" + tok + "'");
  }
  if (used != tok.size()) throw InputError("cannot parse weight '" + tok + "'");
  if (!(v > 0.0)) throw InputError("nonpositive weight " + tok);
  return v;
}

}  // namespace detail

inline WeightedGraph read_matrix_market(std::istream& in, bool directed) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty Matrix Market file");
  std::istringstream hs(detail::lower(line));
  std::string banner, object, format, field, symmetry;
  hs >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix" || format != "coordinate")
    throw InputError("expected a Matrix Market coordinate header");
  if (field != "real" && field != "integer" && field != "double")
    throw InputError("unsupported Matrix Market field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw InputError("unsupported Matrix Market symmetry '" + symmetry + "'");

  long long rows = -1, cols = -1, nnz = -1;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '%') continue;
    std::istringstream ss(t);
    if (!(ss >> rows >> cols >> nnz)) throw InputError("bad Matrix Market size line");
    break;
  }
  if (rows <= 0 || rows != cols) throw InputError("matrix must be square");
  const Index n = static_cast<Index>(rows);

  std::vector<detail::RawEntry> raw;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '%') continue;
    std::istringstream ss(t);
    std::string si, sj, sw, extra;
    if (!(ss >> si >> sj >> sw) || (ss >> extra))
      throw InputError("bad Matrix Market entry line: '" + t + "'");
    Index i = detail::parse_index(si, n), j = detail::parse_index(sj, n);
    double w = detail::parse_weight(sw);
    raw.push_back({i, j, w});
    if (symmetry == "symmetric" && i != j) raw.push_back({j, i, w});
  }
  if (raw.empty()) throw InputError("no edges");
  if (symmetry == "symmetric") {
    // Both triangles already present; mirrored listing must not be repeated.
    std::vector<Edge> e;
    std::vector<double> w;
    for (const auto& r : raw) {
      e.push_back({r.i, r.j});
      w.push_back(r.w);
    }
    return WeightedGraph(n, std::move(e), std::move(w), directed);
  }
  return detail::assemble(n, raw, directed);
}

inline WeightedGraph read_edge_list(std::istream& in, bool directed) {
  std::vector<detail::RawEntry> raw;
  Index n = 0;
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == '%') continue;
    std::istringstream ss(t);
    std::string si, sj, sw, extra;
    if (!(ss >> si >> sj >> sw) || (ss >> extra))
      throw InputError("bad edge-list line: '" + t + "'");
    Index i = detail::parse_index(si, 0), j = detail::parse_index(sj, 0);
    raw.push_back({i, j, detail::parse_weight(sw)});
    n = std::max({n, i + 1, j + 1});
  }
  if (raw.empty()) throw InputError("no edges");
  return detail::assemble(n, raw, directed);
}

inline WeightedGraph load_graph(const std::string& path, GraphFormat format,
                                bool directed) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return format == GraphFormat::matrix_market ? read_matrix_market(in, directed)
                                              : read_edge_list(in, directed);
}

/// Writes general (directed) or lower-triangle symmetric (undirected) files.
inline void write_matrix_market(std::ostream& out, const WeightedGraph& g) {
  out << "%%MatrixMarket matrix coordinate real "
      << (g.directed() ? "general" : "symmetric") << '\n';
  std::size_t count = 0;
  for (const Edge& e : g.edges())
    if (g.directed() || e.row >= e.col) ++count;
  out << g.size() << ' ' << g.size() << ' ' << count << '\n';
  out << std::setprecision(17);
  for (std::size_t p = 0; p < g.edge_count(); ++p) {
    const Edge& e = g.edges()[p];
    if (!g.directed() && e.row < e.col) continue;
    out << e.row + 1 << ' ' << e.col + 1 << ' ' << g.weights()[p] << '\n';
  }
}

inline void write_edge_list(std::ostream& out, const WeightedGraph& g) {
  out << std::setprecision(17);
  for (std::size_t p = 0; p < g.edge_count(); ++p) {
    const Edge& e = g.edges()[p];
    out << e.row + 1 << ' ' << e.col + 1 << ' ' << g.weights()[p] << '\n';
  }
}

inline void save_graph(const std::string& path, const WeightedGraph& g,
                       GraphFormat format = GraphFormat::matrix_market) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  if (format == GraphFormat::matrix_market)
    write_matrix_market(out, g);
  else
    write_edge_list(out, g);
}

/// Reads `i j` pairs (1-based), e.g. a perturbable-edge subset file.
inline std::vector<Edge> read_pair_list(std::istream& in) {
  std::vector<Edge> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = detail::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == '%') continue;
    std::istringstream ss(t);
    std::string si, sj, extra;
    if (!(ss >> si >> sj) || (ss >> extra))
      throw InputError("bad pair line: '" + t + "'");
    out.push_back({detail::parse_index(si, 0), detail::parse_index(sj, 0)});
  }
  return out;
}

}  // namespace perron_radius
