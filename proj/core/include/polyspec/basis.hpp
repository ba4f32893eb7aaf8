#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace polyspec::basis {

// Gauss-Lobatto-Legendre quadrature rule on [-1,1].
struct GllRule {
  int n = 0;
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Cached rule with n nodes (n >= 2). Thread-safe lookup.
const GllRule& gll_rule(int n);

// Spectral differentiation matrix on the n-node GLL grid: (D f)_i = p'(x_i)
// for the degree n-1 interpolant p of the nodal values f. Cached, thread-safe.
const Eigen::MatrixXd& diff_matrix(int n);

// Lagrange evaluation matrix from the n-node GLL grid to arbitrary points:
// E(i, j) = l_j(pts[i]).
Eigen::MatrixXd interp_matrix(int n, const std::vector<double>& pts);

// Values of a bivariate polynomial of degree d per direction on the
// (d+1) x (d+1) tensor GLL grid of the master square S = (-1,1)^2.
// v(i, j) is the value at (xi_i, eta_j).
struct NodalTensor {
  int d = 0;
  Eigen::MatrixXd v;

  NodalTensor() = default;
  explicit NodalTensor(int degree) : d(degree), v(Eigen::MatrixXd::Zero(degree + 1, degree + 1)) {}
};

double eval_nodal(const NodalTensor& t, double xi, double eta);
// d/dxi and d/deta of the interpolant.
Eigen::Vector2d eval_nodal_grad(const NodalTensor& t, double xi, double eta);

// Discrete H^2 Gram of the nodal basis of degree d on [-1,1] (1-D) or S (2-D),
// using GLL quadrature with d+3 points and differentiation matrices for the
// derivative factors (orders 0..2 summed; the 2-D form includes the mixed term).
const Eigen::MatrixXd& h2_gram_1d(int d);
const Eigen::MatrixXd& h2_gram_2d(int d);

// H^2-orthogonal projection onto polynomials of degree <= d. The input is
// sampled on the quadrature grid (d+3 GLL points per direction), interpolated,
// and projected in the discrete H^2 inner product; polynomial inputs of degree
// <= d are reproduced.
Eigen::VectorXd h2_project_1d(const std::function<double(double)>& f, int d);
NodalTensor h2_project_2d(const std::function<double(double, double)>& f, int d);

}  // namespace polyspec::basis
