#include "polyspec/solver.hpp"

#include "polyspec/threading.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace polyspec::solver {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// A_II x with the vertex slots frozen to zero; x lives on the interior dofs.
VectorXd apply_interior(const assembly::NormalSystem& sys, const VectorXd& x) {
  const int p = sys.layout.p;
  VectorXd U = assembly::merge_dofs(sys, x, VectorXd::Zero(p));
  return assembly::apply_A(sys, U).tail(sys.layout.total - p);
}

}  // namespace

VectorXd Preconditioner::apply(const VectorXd& r) const {
  VectorXd z(r.size());
  const auto& lo = sys->layout;
  for (size_t b = 0; b < block.size(); ++b) {
    const int at = lo.block_offset[b] - lo.p;
    z.segment(at, lo.block_size[b]) = block[b]->solve(r.segment(at, lo.block_size[b]));
  }
  return z;
}

VectorXd Preconditioner::forward(const VectorXd& r) const {
  VectorXd z(r.size());
  const auto& lo = sys->layout;
  for (size_t b = 0; b < block.size(); ++b) {
    const int at = lo.block_offset[b] - lo.p;
    z.segment(at, lo.block_size[b]) =
        block[b]->matrixL().solve(r.segment(at, lo.block_size[b]));
  }
  return z;
}

VectorXd Preconditioner::backward(const VectorXd& r) const {
  VectorXd z(r.size());
  const auto& lo = sys->layout;
  for (size_t b = 0; b < block.size(); ++b) {
    const int at = lo.block_offset[b] - lo.p;
    z.segment(at, lo.block_size[b]) =
        block[b]->matrixU().solve(r.segment(at, lo.block_size[b]));
  }
  return z;
}

Preconditioner build_preconditioner(const assembly::NormalSystem& sys) {
  Preconditioner pre;
  pre.sys = &sys;
  pre.block.resize(sys.layout.block_offset.size());
  std::map<std::pair<int, double>, std::shared_ptr<Eigen::LLT<MatrixXd>>> cache;
  auto factor = [&](int degree, double weight) {
    auto& slot = cache[{degree, weight}];
    if (!slot) {
      slot = std::make_shared<Eigen::LLT<MatrixXd>>(weight * basis::h2_gram_2d(degree));
      if (slot->info() != Eigen::Success)
        throw std::runtime_error("preconditioner block factorization failed");
    }
    return slot;
  };
  const auto& m = *sys.mesh;
  for (size_t s = 0; s < m.sectors.size(); ++s) {
    const int b = sys.layout.sector_block[s];
    if (b < 0) continue;
    const auto& e = m.sectors[s];
    const double w = std::pow(m.corner[e.k].sigma[e.j], -2.0 * m.corner[e.k].lambda);
    pre.block[b] = factor(e.degree, w);
  }
  for (size_t l = 0; l < m.interiors.size(); ++l)
    pre.block[sys.layout.interior_block[l]] = factor(m.interiors[l].degree, 1.0);
  return pre;
}

PcgResult pcgm(const LinOp& apply_op, const LinOp& apply_prec_inv, const VectorXd& b, double tol,
               int max_iter, const VectorXd* x0) {
  PcgResult out;
  const double bnorm = b.norm();
  if (x0)
    out.x = *x0;
  else
    out.x = VectorXd::Zero(b.size());
  if (bnorm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }
  VectorXd r = x0 ? VectorXd(b - apply_op(out.x)) : b;
  out.residual = r.norm() / bnorm;
  if (out.residual <= tol) {
    out.converged = true;
    return out;
  }
  VectorXd z = apply_prec_inv(r);
  VectorXd d = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    VectorXd q = apply_op(d);
    const double dq = d.dot(q);
    if (dq <= 0.0) return out;  // non-SPD direction, keep the best iterate
    const double alpha = rz / dq;
    out.x += alpha * d;
    r -= alpha * q;
    out.iterations = it + 1;
    out.residual = r.norm() / bnorm;
    if (out.residual <= tol) {
      out.converged = true;
      return out;
    }
    z = apply_prec_inv(r);
    const double rz_next = r.dot(z);
    d = z + (rz_next / rz) * d;
    rz = rz_next;
  }
  return out;
}

PcgResult solve_inner(const assembly::NormalSystem& sys, const Preconditioner& pre,
                      const VectorXd& b, double tol, int max_iter, const VectorXd* x0) {
  return pcgm([&](const VectorXd& x) { return apply_interior(sys, x); },
              [&](const VectorXd& r) { return pre.apply(r); }, b, tol, max_iter, x0);
}

MatrixXd build_schur(const assembly::NormalSystem& sys, const Preconditioner& pre,
                     double tol_schur, int max_iter) {
  const int p = sys.layout.p;
  const int ni = sys.layout.total - p;
  MatrixXd S(p, p);
  threading::parallel_for(p, [&](int k) {
    VectorXd eB = VectorXd::Zero(p);
    eB(k) = 1.0;
    VectorXd w = assembly::apply_A(sys, assembly::merge_dofs(sys, VectorXd::Zero(ni), eB));
    const VectorXd col_BB = w.head(p);
    const VectorXd col_IB = w.tail(ni);
    auto inner = solve_inner(sys, pre, col_IB, tol_schur, max_iter);
    VectorXd Ay = assembly::apply_A(sys, assembly::merge_dofs(sys, inner.x, VectorXd::Zero(p)));
    S.col(k) = col_BB - Ay.head(p);
  });
  return 0.5 * (S + S.transpose());
}

SolveResult solve(const assembly::NormalSystem& sys, const Preconditioner& pre, double tol,
                  int max_iter, const VectorXd* U0) {
  SolveResult out;
  const int p = sys.layout.p;
  const int ni = sys.layout.total - p;
  VectorXd h = assembly::rhs(sys);
  const VectorXd hB = h.head(p);
  const VectorXd hI = h.tail(ni);

  VectorXd guessI, guessB;
  if (U0) {
    assembly::split_dofs(sys, *U0, guessI, guessB);
    const double hn = h.norm();
    const double res0 = hn > 0 ? (assembly::apply_A(sys, *U0) - h).norm() / hn : 0.0;
    if (res0 <= tol) {  // the guess already solves the normal equations
      out.U = *U0;
      out.functional = assembly::evaluate_functional(sys, out.U);
      out.residual = res0;
      out.converged = true;
      return out;
    }
  }

  auto phase1 = solve_inner(sys, pre, hI, tol, max_iter, U0 ? &guessI : nullptr);
  out.iters_inner = phase1.iterations;

  MatrixXd S = build_schur(sys, pre, tol * 1e-2, max_iter);
  VectorXd Az = assembly::apply_A(sys, assembly::merge_dofs(sys, phase1.x, VectorXd::Zero(p)));
  VectorXd g = hB - Az.head(p);
  VectorXd b = S.ldlt().solve(g);

  VectorXd AIb =
      assembly::apply_A(sys, assembly::merge_dofs(sys, VectorXd::Zero(ni), b)).tail(ni);
  auto phase3 = solve_inner(sys, pre, hI - AIb, tol, max_iter, U0 ? &guessI : nullptr);
  out.iters_back = phase3.iterations;
  out.converged = phase1.converged && phase3.converged;

  out.U = assembly::merge_dofs(sys, phase3.x, b);
  out.functional = assembly::evaluate_functional(sys, out.U);
  const double hn = h.norm();
  out.residual = hn > 0 ? (assembly::apply_A(sys, out.U) - h).norm() / hn : 0.0;
  return out;
}

double estimate_condition(const assembly::NormalSystem& sys, const Preconditioner& pre,
                          int steps) {
  const int n = sys.layout.total - sys.layout.p;
  steps = std::min(steps, n);
  for (unsigned seed = 12345;; ++seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> N(0.0, 1.0);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = N(rng);
    v.normalize();

    std::vector<VectorXd> V;
    V.reserve(steps);
    VectorXd alpha(steps), beta(steps);
    VectorXd v_prev = VectorXd::Zero(n);
    double b_prev = 0.0;
    int m = 0;
    bool breakdown = false;
    for (int j = 0; j < steps; ++j) {
      V.push_back(v);
      VectorXd w = pre.forward(apply_interior(sys, pre.backward(v)));
      alpha(j) = v.dot(w);
      w -= alpha(j) * v + b_prev * v_prev;
      for (const auto& q : V) w -= q.dot(w) * q;  // full reorthogonalization
      for (const auto& q : V) w -= q.dot(w) * q;
      m = j + 1;
      const double bn = w.norm();
      if (bn < 1e-14) {
        breakdown = j + 1 < steps && j < 2;
        break;
      }
      beta(j) = bn;
      b_prev = bn;
      v_prev = v;
      v = w / bn;
    }
    if (breakdown && seed < 12345 + 8) continue;  // restart with the next seed
    MatrixXd T = MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      T(j, j) = alpha(j);
      if (j + 1 < m) T(j, j + 1) = T(j + 1, j) = beta(j);
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(T);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
  }
}

}  // namespace polyspec::solver
