#pragma once

// Perron eigenpairs and products with the pseudoinverse / group inverse of
// M = A - lambda I, computed through bordered linear systems.

#include "perron_radius/graph_model.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace perron_radius {

/// Raised when an iterative method fails to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computed Perron vector has a vanishing entry.
class ReducibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EigenOptions {
  double eig_tol = 1e-12;  // relative residual ||Mv - lambda v|| / lambda
  int max_sweeps = 100000;
  int probe_interval = 50;          // sweeps between convergence-rate probes
  double slow_rate = 0.999;         // switch to inverse iteration above this
  int max_power_sweeps = 5000;      // ... or after this many sweeps
  double positivity_floor = 1e-15;  // relative to max entry
};

struct PerronPair {
  double lambda = 0.0;
  Vector v;  // right eigenvector, positive, unit 2-norm
  Vector x;  // left eigenvector (directed only), positive, unit 2-norm
  double residual = 0.0;

  bool has_left() const { return x.size() > 0; }
};

namespace detail {

inline double eigen_residual(const SparseMatrix& m, const Vector& v,
                             double& lambda) {
  Vector mv = m * v;
  lambda = v.dot(mv);
  return (mv - lambda * v).norm();
}

inline void fix_sign(Vector& v) {
  if (v.sum() < 0) v = -v;
}

// Shifted inverse iteration with shift just above the Collatz-Wielandt upper
// bound, so that sigma I - M is a nonsingular M-matrix with positive inverse.
inline Vector inverse_iteration(const SparseMatrix& m, Vector v,
                                const EigenOptions& opts, double& lambda,
                                double& residual) {
  const Index n = m.rows();
  SparseMatrix id(n, n);
  id.setIdentity();
  Eigen::SparseLU<SparseMatrix> lu;
  for (int it = 0; it < 60; ++it) {
    v = v.cwiseMax(1e-300);
    Vector mv = m * v;
    double upper = (mv.array() / v.array()).maxCoeff();
    double sigma = upper * (1.0 + 1e-10) + 1e-300;
    SparseMatrix shifted = sigma * id - m;
    if (it == 0) lu.analyzePattern(shifted);
    lu.factorize(shifted);
    if (lu.info() != Eigen::Success)
      throw ConvergenceError("inverse iteration: factorization failed");
    v = lu.solve(v);
    fix_sign(v);
    v.normalize();
    residual = eigen_residual(m, v, lambda);
    if (residual <= opts.eig_tol * std::abs(lambda)) return v;
  }
  throw ConvergenceError("inverse iteration did not converge");
}

// Power iteration on M + alpha I (the shift breaks ties with -rho for
// periodic patterns); falls back to inverse iteration when slow.
inline Vector dominant_vector(const SparseMatrix& m, const Vector* start,
                              const EigenOptions& opts, double& lambda,
                              double& residual) {
  const Index n = m.rows();
  Vector v = (start && start->size() == n) ? Vector(start->cwiseAbs())
                                           : Vector(Vector::Ones(n));
  if (!(v.norm() > 0)) v = Vector::Ones(n);
  v.normalize();

  double alpha = 0.0;
  {
    double rq = v.dot(m * v);
    alpha = 0.1 * std::max(rq, 1e-300);
  }
  double probe_residual = -1.0;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    Vector mv = m * v;
    lambda = v.dot(mv);
    residual = (mv - lambda * v).norm();
    if (residual <= opts.eig_tol * std::abs(lambda)) return v;

    if (sweep % opts.probe_interval == 0) {
      if (probe_residual > 0 && sweep > 0) {
        double rate = std::pow(residual / probe_residual,
                               1.0 / static_cast<double>(opts.probe_interval));
        if (rate > opts.slow_rate)
          return inverse_iteration(m, v, opts, lambda, residual);
      }
      probe_residual = residual;
    }
    if (sweep >= opts.max_power_sweeps)
      return inverse_iteration(m, v, opts, lambda, residual);

    v = mv + alpha * v;
    fix_sign(v);
    v.normalize();
  }
  throw ConvergenceError("power iteration did not converge");
}

inline void check_positive(const Vector& v, const EigenOptions& opts,
                           const char* which) {
  double floor = opts.positivity_floor * v.maxCoeff();
  if (!(v.minCoeff() > floor))
    throw ReducibilityError(std::string("Perron ") + which +
                            " eigenvector has a vanishing entry; the matrix "
                            "appears reducible");
}

}  // namespace detail

/**
 * Perron eigenpair of a nonnegative irreducible sparse matrix. The left
 * eigenvector is computed only when `with_left` is set (directed graphs).
 * Optional start vectors warm-start the iterations.
 */
inline PerronPair perron_pair(const SparseMatrix& m, bool with_left,
                              const EigenOptions& opts = {},
                              const Vector* v_start = nullptr,
                              const Vector* x_start = nullptr) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("perron_pair: matrix is not square");
  PerronPair pair;
  pair.v = detail::dominant_vector(m, v_start, opts, pair.lambda, pair.residual);
  detail::check_positive(pair.v, opts, "right");
  if (with_left) {
    SparseMatrix mt = m.transpose();
    double lambda_left = 0.0, res_left = 0.0;
    pair.x = detail::dominant_vector(mt, x_start, opts, lambda_left, res_left);
    detail::check_positive(pair.x, opts, "left");
    pair.residual = std::max(pair.residual, res_left);
  }
  return pair;
}

// ---------------------------------------------------------------------------

enum class SolveMode { automatic, direct, iterative };

struct LinearOptions {
  SolveMode mode = SolveMode::automatic;
  Index direct_max_n = 2000;
  double lin_tol = 1e-11;
  int max_iterations = 20000;
  double refresh_threshold = 0.01;  // Frobenius change forcing a refactorization
};

/**
 * Solver session for bordered systems built around M = A_eps - lambda I.
 *
 * Symmetric case:  [ M  v ; v^T 0 ] [a; mu] = [b; 0]   gives a = M^+ b.
 * Directed case:   [ M^T x ; v^T 0 ] [y; mu] = [c; 0]  with c = Pi^T w gives
 *                  (M^#)^T w = Pi^T y, Pi = I - kappa v x^T, kappa = 1/(x^T v).
 *
 * One instance must not be used by two threads at once.
 */
class BorderedSolver {
 public:
  explicit BorderedSolver(LinearOptions opts = {}) : opts_(opts) {}

  /// Binds the solver to a matrix (A + eps E) and its Perron pair.
  void update(const SparseMatrix& a_eps, const PerronPair& pair, bool symmetric) {
    const Index n = a_eps.rows();
    if (!symmetric && !pair.has_left())
      throw std::invalid_argument("BorderedSolver: directed case needs the left eigenvector");
    if (!symmetric) {
      double xv = pair.x.dot(pair.v);
      if (!(xv > 1e-14))
        throw ConvergenceError("x^T v vanishes; the Perron eigenvalue is not simple");
      kappa_ = 1.0 / xv;
    }
    SparseMatrix id(n, n);
    id.setIdentity();
    bool same_shape = (n == n_) && (symmetric == symmetric_) &&
                      a_eps.nonZeros() == base_nnz_;
    m_ = a_eps - pair.lambda * id;
    m_.makeCompressed();
    v_ = pair.v;
    x_ = pair.x;
    symmetric_ = symmetric;
    n_ = n;
    base_nnz_ = a_eps.nonZeros();
    iterative_ = opts_.mode == SolveMode::iterative ||
                 (opts_.mode == SolveMode::automatic && n > opts_.direct_max_n);

    if (!iterative_ || !symmetric_) {
      bordered_ = build_bordered();
      if (!iterative_) {
        if (!same_shape || !analyzed_) {
          lu_.analyzePattern(bordered_);
          analyzed_ = true;
          refactor();
        } else if ((bordered_ - factored_).norm() > opts_.refresh_threshold) {
          refactor();
        }
      }
    }
    if (iterative_ && symmetric_) refresh_preconditioner(same_shape);
  }

  bool iterative() const { return iterative_; }
  bool symmetric() const { return symmetric_; }
  int last_iterations() const { return last_iterations_; }
  const SparseMatrix& shifted_matrix() const { return m_; }

  /// a = M^+ b for symmetric M (bordered system, or the negative definite
  /// route in iterative mode).
  Vector pseudoinverse_apply(const Vector& b) {
    require(symmetric_, "pseudoinverse_apply requires a symmetric matrix");
    if (iterative_) return pseudoinverse_apply_alt(b);
    Vector rhs(n_ + 1);
    rhs << b, 0.0;
    Vector sol = direct_solve(rhs);
    last_multiplier_ = sol(n_);
    return sol.head(n_);
  }

  /// a = M^+ b through two solves with N = M - v v^T (negative definite):
  /// a = N^{-1} b - mu N^{-1} v,  mu = v^T N^{-1} b / v^T N^{-1} v.
  Vector pseudoinverse_apply_alt(const Vector& b) {
    require(symmetric_, "pseudoinverse_apply_alt requires a symmetric matrix");
    if (precond_.size() != n_) refresh_preconditioner(false);
    Vector nb = solve_negative_definite(b);
    Vector nv = solve_negative_definite(v_);
    double s = v_.dot(nv);
    last_multiplier_ = v_.dot(nb) / s;
    return nb - last_multiplier_ * nv;
  }

  /// (M^#)^T w for the group inverse of M = A_eps - lambda I.
  Vector group_inverse_transpose_apply(const Vector& w) {
    if (symmetric_) return pseudoinverse_apply(w);
    Vector c = apply_pi_transpose(w);
    Vector rhs(n_ + 1);
    rhs << c, 0.0;
    Vector sol;
    if (iterative_) {
      Eigen::GMRES<SparseMatrix, Eigen::DiagonalPreconditioner<double>> gmres;
      gmres.setTolerance(opts_.lin_tol);
      gmres.setMaxIterations(opts_.max_iterations);
      gmres.set_restart(200);
      gmres.compute(bordered_);
      sol = gmres.solve(rhs);
      last_iterations_ = static_cast<int>(gmres.iterations());
      if (gmres.info() != Eigen::Success)
        throw ConvergenceError("GMRES did not converge on the bordered system");
    } else {
      sol = direct_solve(rhs);
    }
    last_multiplier_ = sol(n_);
    return apply_pi_transpose(sol.head(n_));
  }

  /// Multiplier mu of the most recent solve.
  double last_multiplier() const { return last_multiplier_; }

 private:
  static void require(bool ok, const char* msg) {
    if (!ok) throw std::logic_error(msg);
  }

  Vector apply_pi_transpose(const Vector& w) const {
    // Pi^T = I - kappa x v^T
    return w - (kappa_ * v_.dot(w)) * x_;
  }

  void refactor() {
    lu_.factorize(bordered_);
    if (lu_.info() != Eigen::Success)
      throw ConvergenceError("bordered system factorization failed");
    factored_ = bordered_;
  }

  // Solves with the current bordered matrix using the latest factorization,
  // refined iteratively when that factorization belongs to an earlier
  // matrix; refactors if the refinement does not converge.
  Vector direct_solve(const Vector& rhs) {
    Vector x = lu_.solve(rhs);
    last_iterations_ = 0;
    const double target = 1e-2 * opts_.lin_tol * std::max(rhs.norm(), 1e-300);
    for (int it = 0; it < 30; ++it) {
      Vector r = rhs - bordered_ * x;
      if (r.norm() <= target) return x;
      x += lu_.solve(r);
      last_iterations_ = it + 1;
    }
    refactor();
    last_iterations_ = 0;
    return lu_.solve(rhs);
  }

  SparseMatrix build_bordered() const {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m_.nonZeros() + 2 * n_));
    for (Index k = 0; k < m_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m_, k); it; ++it) {
        if (symmetric_)
          trip.emplace_back(it.row(), it.col(), it.value());
        else
          trip.emplace_back(it.col(), it.row(), it.value());
      }
    const Vector& column = symmetric_ ? v_ : x_;
    for (Index i = 0; i < n_; ++i) {
      trip.emplace_back(i, n_, column(i));
      trip.emplace_back(n_, i, v_(i));
    }
    trip.emplace_back(n_, n_, 0.0);
    SparseMatrix k(n_ + 1, n_ + 1);
    k.setFromTriplets(trip.begin(), trip.end());
    k.makeCompressed();
    return k;
  }

  void refresh_preconditioner(bool same_shape) {
    if (same_shape && precond_.size() == n_ && precond_base_.rows() == n_) {
      double change = (m_ - precond_base_).norm();
      if (change <= opts_.refresh_threshold) return;
    }
    // Jacobi preconditioner for -N = -(M - v v^T).
    precond_ = (-m_.diagonal() + v_.cwiseProduct(v_)).cwiseMax(1e-300);
    precond_ = precond_.cwiseInverse();
    precond_base_ = m_;
  }

  // Solves N z = b with N = M - v v^T by preconditioned CG on -N.
  Vector solve_negative_definite(const Vector& b) {
    auto apply = [&](const Vector& z) -> Vector {
      return -(m_ * z) + v_ * v_.dot(z);
    };
    Vector rhs = -b;
    Vector z = Vector::Zero(n_);
    Vector r = rhs;
    double rhs_norm = rhs.norm();
    if (rhs_norm == 0.0) return z;
    Vector pz = precond_.cwiseProduct(r);
    Vector p = pz;
    double rz = r.dot(pz);
    for (int it = 0; it < opts_.max_iterations; ++it) {
      Vector ap = apply(p);
      double alpha = rz / p.dot(ap);
      z += alpha * p;
      r -= alpha * ap;
      if (r.norm() <= opts_.lin_tol * rhs_norm) {
        last_iterations_ = it + 1;
        return z;
      }
      pz = precond_.cwiseProduct(r);
      double rz_next = r.dot(pz);
      p = pz + (rz_next / rz) * p;
      rz = rz_next;
    }
    throw ConvergenceError("conjugate gradient did not converge");
  }

  LinearOptions opts_;
  SparseMatrix m_;
  SparseMatrix bordered_;
  SparseMatrix factored_;
  SparseMatrix precond_base_;
  Vector v_, x_, precond_;
  Eigen::SparseLU<SparseMatrix> lu_;
  double kappa_ = 1.0;
  double last_multiplier_ = 0.0;
  Index n_ = -1;
  Index base_nnz_ = -1;
  int last_iterations_ = 0;
  bool symmetric_ = true;
  bool iterative_ = false;
  bool analyzed_ = false;
};

/// (m - lambda I)^+ b through the bordered system; m symmetric.
inline Vector pseudoinverse_apply_sym(const PerronPair& pair,
                                      const SparseMatrix& m, const Vector& b,
                                      LinearOptions opts = {}) {
  BorderedSolver solver(opts);
  solver.update(m, pair, true);
  return solver.pseudoinverse_apply(b);
}

/// Same product through the negative definite route and two CG solves.
inline Vector pseudoinverse_apply_sym_alt(const PerronPair& pair,
                                          const SparseMatrix& m,
                                          const Vector& b,
                                          LinearOptions opts = {}) {
  BorderedSolver solver(opts);
  solver.update(m, pair, true);
  return solver.pseudoinverse_apply_alt(b);
}

/// ((m - lambda I)^#)^T w; m need not be symmetric.
inline Vector group_inverse_apply_transpose(const PerronPair& pair,
                                            const SparseMatrix& m,
                                            const Vector& w,
                                            LinearOptions opts = {}) {
  BorderedSolver solver(opts);
  solver.update(m, pair, !pair.has_left());
  return solver.group_inverse_transpose_apply(w);
}

// ---------------------------------------------------------------------------
// Dense references, used to validate the sparse routes.

inline DenseMatrix dense_pseudoinverse(const DenseMatrix& m, double rcond = 1e-12) {
  Eigen::JacobiSVD<DenseMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  double cut = rcond * (s.size() ? s(0) : 0.0);
  Vector inv = Vector::Zero(s.size());
  for (Index k = 0; k < s.size(); ++k)
    if (s(k) > cut) inv(k) = 1.0 / s(k);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

struct NullVectors {
  Vector right;  // y: M y = 0
  Vector left;   // x: x^T M = 0, oriented so that x^T y > 0
};

/// Unit null vectors of a matrix with a simple zero eigenvalue.
inline NullVectors dense_null_vectors(const DenseMatrix& m, double tol = 1e-8) {
  if (m.rows() != m.cols() || m.rows() < 2)
    throw std::invalid_argument("dense_null_vectors: need a square matrix");
  Eigen::JacobiSVD<DenseMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const Index n = m.rows();
  if (s(n - 1) > tol * s(0) || s(n - 2) <= tol * s(0))
    throw std::invalid_argument("zero eigenvalue is not simple");
  NullVectors nv{svd.matrixV().col(n - 1), svd.matrixU().col(n - 1)};
  double xy = nv.left.dot(nv.right);
  if (std::abs(xy) <= tol)
    throw std::invalid_argument("zero eigenvalue is not simple (x^T y = 0)");
  if (xy < 0) nv.left = -nv.left;
  return nv;
}

/// Group inverse from the spectral projector P0 = y x^T / (x^T y):
/// M^# = (M + P0)^{-1} - P0.
inline DenseMatrix dense_group_inverse(const DenseMatrix& m) {
  NullVectors nv = dense_null_vectors(m);
  DenseMatrix p0 = nv.right * nv.left.transpose() / nv.left.dot(nv.right);
  return (m + p0).partialPivLu().inverse() - p0;
}

/// Group inverse as Pi M^+ Pi with Pi = I - kappa y x^T.
inline DenseMatrix group_inverse_via_pseudoinverse(const DenseMatrix& m) {
  NullVectors nv = dense_null_vectors(m);
  const Index n = m.rows();
  DenseMatrix pi = DenseMatrix::Identity(n, n) -
                   nv.right * nv.left.transpose() / nv.left.dot(nv.right);
  return pi * dense_pseudoinverse(m) * pi;
}

}  // namespace perron_radius
