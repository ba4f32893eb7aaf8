#pragma once

#include "polyspec/solver.hpp"

#include <optional>
#include <string>
#include <vector>

namespace polyspec::harness {

// Named builtin problems with exact solutions: "lshape_singular",
// "square_smooth", "square_mixed_varcoef".
std::vector<std::string> builtin_names();
probdef::EllipticProblem builtin_problem(const std::string& name);

// Fills problem.exact.fn for builtin references; no-op for the other kinds.
void resolve_exact(probdef::EllipticProblem& p);

struct ErrorNorms {
  double broken = 0.0;  // weighted broken H^2 norm against the exact solution
  double l2 = 0.0;      // broken physical-frame L^2 norm
};

ErrorNorms compute_error(const assembly::NormalSystem& sys, const Eigen::VectorXd& U,
                         const std::function<double(double, double)>& exact);

// Solution with per-element corner corrections applied so that coincident
// element corners share one value (and averaged first derivatives); tensors
// are re-sampled at degree >= 3 to hold the cubic Hermite correction.
struct CorrectedSolution {
  std::vector<basis::NodalTensor> sector;    // indexed like mesh.sectors; layer 1 empty
  std::vector<basis::NodalTensor> interior;  // indexed like mesh.interiors
  Eigen::VectorXd vertex;                    // the p constants, unchanged
};

CorrectedSolution vertex_conforming_correction(const assembly::NormalSystem& sys,
                                               const Eigen::VectorXd& U);

struct ConvergenceRecord {
  int W = 0, M = 0, dofs = 0;
  double err_broken = 0.0, err_l2 = 0.0, functional = 0.0;
  int iters_htilde = 0, iters_back = 0;
  double kappa = 0.0, seconds = 0.0;
  bool ok = true;
};

struct RunResult {
  ConvergenceRecord record;
  Eigen::VectorXd U;
};

// Builds, solves, and (when an exact solution is present) measures one
// configuration; with_kappa adds the Lanczos condition estimate.
RunResult run_once(probdef::EllipticProblem p, bool with_kappa = false);

struct ConvergenceSweep {
  std::vector<ConvergenceRecord> records;
  double slope = 0.0;  // least-squares slope of ln(err_broken) vs W
  double r2 = 0.0;
};

// Sweeps W over the list with M = W (or fixed M when given), fitting the
// exponential decay rate. Failed runs are recorded with ok = false.
ConvergenceSweep run_convergence(const probdef::EllipticProblem& base,
                                 const std::vector<int>& W_list, bool with_kappa = false,
                                 std::optional<int> fixed_M = std::nullopt);

void write_convergence_csv(const std::vector<ConvergenceRecord>& records,
                           const std::string& path);
// DOF vector with layout metadata and a problem hash; reload is bit-exact.
void write_solution_json(const probdef::EllipticProblem& p, const assembly::NormalSystem& sys,
                         const Eigen::VectorXd& U, const std::string& path);
Eigen::VectorXd read_solution_json(const std::string& path);
// Element outlines as 16-sample polylines.
void write_mesh_json(const geometry::GeometricMesh& m, const std::string& path);

// Canonical content hash of a problem definition.
std::string problem_hash(const probdef::EllipticProblem& p);

}  // namespace polyspec::harness
