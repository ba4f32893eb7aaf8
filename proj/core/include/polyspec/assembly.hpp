#pragma once

#include "polyspec/fracnorm.hpp"
#include "polyspec/operators.hpp"

#include <Eigen/Dense>

#include <vector>

namespace polyspec::assembly {

// DOF vector layout: p vertex slots (the sector constants h_k, the U_B part)
// first, then one nodal block per sector element with j >= 2 in lexicographic
// (k,i,j) order, then one block per interior element.
struct DofLayout {
  int p = 0;
  int total = 0;
  std::vector<int> block_offset, block_size;  // per block id
  std::vector<int> sector_block;    // per sector element index; -1 for layer 1
  std::vector<int> interior_block;  // per interior element index
};

enum class TermKind {
  PdeSector,
  PdeInterior,
  JumpValue,
  JumpDeriv1,
  JumpDeriv2,
  DirichletSectorValue,
  DirichletSectorDeriv,
  NeumannSector,
  DirichletInteriorValue,
  DirichletInteriorDeriv,
  NeumannInterior,
  DirichletVertex,
};

// One summand w * (B v - d)^T G (B v - d) of the least-squares functional.
// The local dof vector is [block_a; block_b; vertex slot], with absent parts
// skipped; Ba/Bb/vcoef are the corresponding column groups of B.
struct ResidualTerm {
  TermKind kind = TermKind::PdeSector;
  int edge_id = -1;  // owning mesh edge for edge terms
  double weight = 1.0;
  int block_a = -1, block_b = -1, vslot = -1;
  Eigen::MatrixXd Ba, Bb;
  Eigen::VectorXd vcoef;
  Eigen::VectorXd data;
  Eigen::MatrixXd G;      // dense Gram for edge terms
  Eigen::VectorXd Gdiag;  // diagonal Gram for PDE quadrature terms
  // precomputed normal-equation blocks on the local dof vector
  Eigen::MatrixXd Aloc;
  Eigen::VectorXd hloc;
};

// Data projections: per-element forcing (H2 projection of the frame forcing,
// degree 2 W_j), per-boundary-edge data polynomials (degree 2 W_j nodal values
// on the edge parameter), and vertex Dirichlet values a_k.
struct ProjectedData {
  std::vector<basis::NodalTensor> F_sector;    // indexed like mesh.sectors (j=1 empty)
  std::vector<basis::NodalTensor> F_interior;  // indexed like mesh.interiors
  std::vector<Eigen::VectorXd> edge_data;      // indexed by edge id (boundary edges only)
  std::vector<double> a_vertex;                // NaN where no Dirichlet edge meets the vertex
};

struct NormalSystem {
  const probdef::EllipticProblem* problem = nullptr;
  const geometry::GeometricMesh* mesh = nullptr;
  DofLayout layout;
  std::vector<ResidualTerm> terms;
  double constant = 0.0;  // sum of w d^T G d
  std::vector<ops::SectorOperator> sector_ops;      // empty entries for layer 1
  std::vector<ops::InteriorOperator> interior_ops;
};

DofLayout build_layout(const geometry::GeometricMesh& m);

ProjectedData project_data(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m);

NormalSystem build_functional(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m);

// y = A U with A = sum of w B^T G B, accumulated in term order.
Eigen::VectorXd apply_A(const NormalSystem& sys, const Eigen::VectorXd& U);

// h = sum of w B^T G d.
Eigen::VectorXd rhs(const NormalSystem& sys);

// Termwise value of the least-squares functional at U (direct path; equals
// U^T A U - 2 h^T U + constant).
double evaluate_functional(const NormalSystem& sys, const Eigen::VectorXd& U);

void split_dofs(const NormalSystem& sys, const Eigen::VectorXd& U, Eigen::VectorXd& UI,
                Eigen::VectorXd& UB);
Eigen::VectorXd merge_dofs(const NormalSystem& sys, const Eigen::VectorXd& UI,
                           const Eigen::VectorXd& UB);

// Verifies that every finite-measure mesh edge carries terms; throws on an
// orphan edge.
void audit_coverage(const NormalSystem& sys);

}  // namespace polyspec::assembly
