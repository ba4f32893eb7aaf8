#pragma once

#include "polyspec/expression.hpp"

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace polyspec::probdef {

enum class BcKind { Dirichlet, Neumann };

struct EdgeBC {
  BcKind kind = BcKind::Dirichlet;
  Expression data;  // g on the edge
};

struct MeshParams {
  int M = 2;               // number of geometric layers per corner sector
  double rho = 0.0;        // sector radius (0: pick from geometry at load time)
  std::vector<double> mu;  // per-vertex geometric ratio in (0,1)
  double max_angle = 0.0;  // angular width bound (0: default)
};

struct SolverParams {
  int W = 0;  // polynomial degree (0: default W = M)
  double tol = 1e-10;
  int maxit = 5000;
  bool variable_degree = false;  // W_j ~ ceil(W j / M) instead of uniform W
};

struct ExactSolution {
  enum class Kind { None, Expr, Builtin };
  Kind kind = Kind::None;
  Expression expr;
  std::string builtin;
  // Resolved evaluator (set for Builtin by the harness, for Expr at load).
  std::function<double(double, double)> fn;
};

struct EllipticProblem {
  // Counter-clockwise vertex list A_0..A_{p-1}; edge i joins A_{i-1} and A_i
  // (indices mod p), so the edge leaving vertex k is edge (k+1) mod p and the
  // edge arriving at vertex k is edge k.
  std::vector<Eigen::Vector2d> vertices;
  std::vector<EdgeBC> edges;

  // L u = -div(A grad u) + b . grad u + c u with A = [[a11,a12],[a12,a22]].
  Expression a11, a12, a22, b1, b2, c;
  Expression f;

  ExactSolution exact;
  MeshParams mesh;
  SolverParams solver;
  std::vector<double> beta;  // per-vertex weight exponent in (0,1)

  // Optional user-supplied interior quadrilaterals (corner lists, CCW).
  std::vector<std::array<Eigen::Vector2d, 4>> interior_quads;

  int p() const { return static_cast<int>(vertices.size()); }
  // Interior angle at vertex k, measured CCW from the outgoing edge.
  double interior_angle(int k) const;
  double lambda(int k) const { return 1.0 - beta[k]; }
  double min_vertex_distance() const;
};

// Parses and validates a problem file (JSON, see README for the schema);
// throws std::runtime_error naming the offending field.
EllipticProblem load_problem(const std::string& path);
EllipticProblem load_problem_text(const std::string& json_text);

// Fills defaults (W, rho, mu, max_angle, beta) and checks polygon validity.
// Called by load_problem; exposed for programmatically built problems.
void finalize_problem(EllipticProblem& p);

// Minimum over an n x n bounding-box grid (restricted to the polygon) of the
// smaller eigenvalue of the coefficient matrix; throws if not positive.
double validate_ellipticity(const EllipticProblem& p, int n_samples);

bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& q);

}  // namespace polyspec::probdef
