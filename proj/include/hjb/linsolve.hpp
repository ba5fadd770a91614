#pragma once

#include <chrono>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "hjb/sparse.hpp"

namespace hjb {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The iteration hit maxiter before reaching the tolerance.
class NonConvergence : public SolverError {
 public:
  using SolverError::SolverError;
};

/// CG met a direction with p^T A p <= 0; the matrix is not positive definite.
class IndefiniteMatrix : public SolverError {
 public:
  using SolverError::SolverError;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  double seconds = 0.0;
};

struct SolveOptions {
  double tol = 1e-11;
  int max_iter = 0;  // 0 selects 20 * n
};

/// Jacobi-preconditioned conjugate gradients for an SPD matrix. `x` holds
/// the initial guess on entry and the solution on exit. Stops when
/// ||b - A x|| <= tol ||b||, checked on the recomputed true residual.
inline SolveReport solve_spd(const CsrMatrix& A, std::span<const double> b, std::span<double> x,
                             const SolveOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  const int n = A.rows;
  if (static_cast<int>(b.size()) != n || static_cast<int>(x.size()) != n)
    throw std::invalid_argument("solve_spd: size mismatch");
  const int max_iter = opt.max_iter > 0 ? opt.max_iter : 20 * n;
  SolveReport rep;
  auto finish = [&] {
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
  };
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return finish();
  }
  std::vector<double> inv_diag = A.diagonal();
  for (double& d : inv_diag) {
    if (!(d > 0.0)) throw IndefiniteMatrix("solve_spd: nonpositive diagonal entry");
    d = 1.0 / d;
  }
  std::vector<double> r(n), z(n), p(n), Ap(n);
  auto true_residual = [&] {
    A.multiply(x, Ap);
    for (int i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    return norm2(r);
  };
  double rnorm = true_residual();
  // Restart on the true residual if the recursive one drifted below tolerance.
  while (rnorm > opt.tol * bnorm) {
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = hjb::dot(r, z);
    while (rep.iterations < max_iter) {
      A.multiply(p, Ap);
      const double pAp = hjb::dot(p, Ap);
      if (!(pAp > 0.0))
        throw IndefiniteMatrix("solve_spd: negative curvature at iteration " + std::to_string(rep.iterations));
      const double step = rz / pAp;
      for (int i = 0; i < n; ++i) {
        x[i] += step * p[i];
        r[i] -= step * Ap[i];
      }
      ++rep.iterations;
      if (norm2(r) <= opt.tol * bnorm) break;
      for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = hjb::dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rnorm = true_residual();
    if (rep.iterations >= max_iter && rnorm > opt.tol * bnorm) {
      rep.relative_residual = rnorm / bnorm;
      throw NonConvergence("solve_spd: no convergence in " + std::to_string(max_iter) +
                           " iterations, relative residual " + std::to_string(rep.relative_residual));
    }
  }
  rep.relative_residual = rnorm / bnorm;
  return finish();
}

inline Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& A) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(A.nnz());
  for (int i = 0; i < A.rows; ++i)
    for (int k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) t.emplace_back(i, A.col_idx[k], A.values[k]);
  Eigen::SparseMatrix<double> m(A.rows, A.cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Sparse Cholesky solve; throws IndefiniteMatrix when the factorization fails.
inline SolveReport solve_cholesky(const CsrMatrix& A, std::span<const double> b, std::span<double> x) {
  const auto start = std::chrono::steady_clock::now();
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt(to_eigen(A));
  if (llt.info() != Eigen::Success) throw IndefiniteMatrix("solve_cholesky: factorization failed");
  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  const Eigen::VectorXd sol = llt.solve(rhs);
  std::copy(sol.data(), sol.data() + sol.size(), x.begin());
  SolveReport rep;
  const std::vector<double> ax = A.multiply(x);
  double rn = 0.0;
  for (std::size_t i = 0; i < ax.size(); ++i) rn += (b[i] - ax[i]) * (b[i] - ax[i]);
  const double bn = norm2(b);
  rep.relative_residual = bn > 0.0 ? std::sqrt(rn) / bn : 0.0;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// Smallest Ritz value of A after `steps` Lanczos iterations (full
/// reorthogonalization) from a seeded random start vector.
inline double smallest_ritz_value(const CsrMatrix& A, int steps = 50, unsigned seed = 1) {
  const int n = A.rows;
  steps = std::min(steps, n);
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<std::vector<double>> basis;
  std::vector<double> v(n);
  for (double& x : v) x = gauss(rng);
  double nv = norm2(v);
  for (double& x : v) x /= nv;
  std::vector<double> alpha, beta;
  std::vector<double> w(n);
  for (int k = 0; k < steps; ++k) {
    basis.push_back(v);
    A.multiply(v, w);
    const double a = hjb::dot(v, w);
    alpha.push_back(a);
    for (const auto& q : basis) {
      const double proj = hjb::dot(q, w);
      for (int i = 0; i < n; ++i) w[i] -= proj * q[i];
    }
    const double bnext = norm2(w);
    if (k + 1 == steps || bnext < 1e-14) break;
    beta.push_back(bnext);
    for (int i = 0; i < n; ++i) v[i] = w[i] / bnext;
  }
  const int m = static_cast<int>(alpha.size());
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) T(i, i) = alpha[i];
  for (int i = 0; i + 1 < m; ++i) T(i, i + 1) = T(i + 1, i) = beta[i];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace hjb
