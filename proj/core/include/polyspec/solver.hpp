#pragma once

#include "polyspec/assembly.hpp"

#include <Eigen/Dense>

#include <functional>
#include <memory>

namespace polyspec::solver {

// Block-diagonal preconditioner for the interior part of the normal system:
// one weighted discrete H^2 Gram per element block (sector blocks carry the
// same sigma_j^{-2 lambda} weight as their PDE residual term). Factorizations
// are shared between blocks with equal (degree, weight).
struct Preconditioner {
  const assembly::NormalSystem* sys = nullptr;
  std::vector<std::shared_ptr<Eigen::LLT<Eigen::MatrixXd>>> block;  // per layout block id
  // z = P^{-1} r on interior dof vectors (length total - p).
  Eigen::VectorXd apply(const Eigen::VectorXd& r) const;
  // z = L^{-1} r and z = L^{-T} r for the block Cholesky factors.
  Eigen::VectorXd forward(const Eigen::VectorXd& r) const;
  Eigen::VectorXd backward(const Eigen::VectorXd& r) const;
};

Preconditioner build_preconditioner(const assembly::NormalSystem& sys);

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  // final relative residual |b - A x| / |b|
};

using LinOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Preconditioned conjugate gradients with relative-residual stopping
// |b - A x| / |b| <= tol; x0 (optional) is the initial guess. Stops early on
// loss of positivity (non-SPD operator) with the best iterate so far.
PcgResult pcgm(const LinOp& apply_op, const LinOp& apply_prec_inv, const Eigen::VectorXd& b,
               double tol, int max_iter, const Eigen::VectorXd* x0 = nullptr);

// A_II x = b on the subspace with the vertex slots frozen to zero.
PcgResult solve_inner(const assembly::NormalSystem& sys, const Preconditioner& pre,
                      const Eigen::VectorXd& b, double tol, int max_iter,
                      const Eigen::VectorXd* x0 = nullptr);

// Dense p x p Schur complement S = A_BB - A_BI A_II^{-1} A_IB, built column by
// column with inner PCG solves at tolerance tol_schur, then symmetrized.
Eigen::MatrixXd build_schur(const assembly::NormalSystem& sys, const Preconditioner& pre,
                            double tol_schur, int max_iter);

struct SolveResult {
  Eigen::VectorXd U;        // full dof vector
  double functional = 0.0;  // value of the least-squares functional at U
  int iters_inner = 0;      // first-phase interior solve
  int iters_back = 0;       // back-substitution solve
  double residual = 0.0;    // |A U - h| / |h| on the full normal system
  bool converged = false;
};

// Three-phase solve of the normal equations A U = h: interior solve with the
// vertex slots frozen, dense Schur solve for the vertex slots, interior
// back-substitution. Schur columns run at tolerance tol * 1e-2. An optional
// initial guess warm-starts both interior phases.
SolveResult solve(const assembly::NormalSystem& sys, const Preconditioner& pre, double tol,
                  int max_iter, const Eigen::VectorXd* U0 = nullptr);

// Condition number estimate of the preconditioned interior operator
// L^{-1} A_II L^{-T} via Lanczos with full reorthogonalization; restarts with
// the next deterministic seed on breakdown.
double estimate_condition(const assembly::NormalSystem& sys, const Preconditioner& pre,
                          int steps = 150);

}  // namespace polyspec::solver
