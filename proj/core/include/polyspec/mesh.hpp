#pragma once

#include "polyspec/problem.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace polyspec::geometry {

enum class EdgeKind {
  SectorInternal,      // edge between two elements of the same corner sector
  SectorArcInterface,  // outermost sector arc (r = rho) against an interior quad chord
  InteriorInternal,    // shared side of two interior quads
  BoundaryDirichlet,
  BoundaryNeumann,
  Layer1Interface,     // arc nu = ln sigma_2 between the constant layer and layer 2
};

enum class EdgeFrame { SectorNuPhi, InteriorPullback };

// Sector element (k,i,j): vertex k, angular slot i in 1..I_k, layer j in 1..M.
// Master square (xi,eta) maps affinely onto (nu,phi) = ([nu_lo,nu_hi] x
// [phi_lo,phi_hi]); layer 1 (nu_lo = -inf) carries the single constant h_k and
// owns no tensor.
struct SectorElement {
  int k = 0, i = 0, j = 0;
  double nu_lo = 0.0, nu_hi = 0.0;
  double phi_lo = 0.0, phi_hi = 0.0;  // local angle, 0 at the outgoing edge
  int degree = 0;                     // W_j (0 for layer 1)
};

struct InteriorElement {
  int l = 0;
  std::array<Eigen::Vector2d, 4> corners;  // CCW; corner c sits at master corner c
  int degree = 0;                          // W
};

// One side of a mesh edge. Sector sides: 0 phi=phi_lo, 1 phi=phi_hi,
// 2 nu=nu_lo, 3 nu=nu_hi. Interior sides: side s joins corners s and s+1.
// The edge parameter t runs along side 0's natural direction; `reversed` marks
// a side whose own natural direction opposes it.
struct EdgeSide {
  bool is_sector = false;
  int elem = -1;  // index into sectors or interiors
  int side = 0;
  bool reversed = false;
};

struct MeshEdge {
  int id = -1;
  EdgeKind kind = EdgeKind::InteriorInternal;
  EdgeFrame frame = EdgeFrame::InteriorPullback;
  std::vector<EdgeSide> sides;  // 1 or 2 entries
  bool finite_measure = true;
  double dist = 0.0;    // d(A_k, gamma_s) for sector-region edges
  double weight = 1.0;  // dist^(-2 lambda_k) for sector-region edges, else 1
  double length = 0.0;  // measure of the edge in its norm frame
  int bc_edge = -1;     // polygon edge index for boundary edges
  int vertex_k = -1;    // owning corner for sector-region edges
};

struct VertexSector {
  double omega = 0.0;   // interior angle
  double theta0 = 0.0;  // global angle of the outgoing polygon edge
  int I = 1;            // angular subdivisions
  double mu = 0.5, lambda = 0.5, rho = 0.0;
  std::vector<double> sigma;  // sigma[j], j = 1..M+1; sigma[1] = 0, sigma[M+1] = rho
};

struct GeometricMesh {
  const probdef::EllipticProblem* problem = nullptr;
  int M = 0, W = 0;
  std::vector<VertexSector> corner;        // per polygon vertex
  std::vector<SectorElement> sectors;      // lexicographic in (k,i,j)
  std::vector<InteriorElement> interiors;
  std::vector<MeshEdge> edges;

  std::vector<int> sector_offset;  // per vertex k: index of (k,1,1)
  int sector_index(int k, int i, int j) const { return sector_offset[k] + (i - 1) * M + (j - 1); }
};

GeometricMesh build_geometric_mesh(const probdef::EllipticProblem& p);

// x = A_k + e^nu (cos, sin)(theta0_k + phi).
Eigen::Vector2d sector_map(const GeometricMesh& m, int k, double nu, double phi);
// Jacobian of the (nu,phi) -> (tau,theta) reparametrization; constant for
// straight edges, and 1 under the identity angular rescale used here.
double sector_jacobian(const GeometricMesh& m, int k, double nu, double phi);

Eigen::Vector2d interior_map(const GeometricMesh& m, int l, double xi, double eta);

struct InteriorMetric {
  double xi_x1 = 0, xi_x2 = 0, eta_x1 = 0, eta_x2 = 0;
  double det = 0;  // determinant of the forward Jacobian d(x1,x2)/d(xi,eta)
};
InteriorMetric interior_metric(const GeometricMesh& m, int l, double xi, double eta);

// Newton inversion of the bilinear map; throws on non-convergence.
Eigen::Vector2d interior_map_inverse(const GeometricMesh& m, int l, const Eigen::Vector2d& x);

// Master coordinates of the point at edge parameter t on the given side.
// For sector-arc-interface edges the physical point is taken on the arc and the
// interior side is found by inverting its bilinear map.
Eigen::Vector2d edge_point_on_side(const GeometricMesh& m, const MeshEdge& e, int side_idx, double t);
// Physical image of edge parameter t (side 0 convention).
Eigen::Vector2d edge_point_physical(const GeometricMesh& m, const MeshEdge& e, double t);

double distance_weight(const GeometricMesh& m, const MeshEdge& e);

// Element areas (physical frame), for the tiling invariant.
double sector_element_area(const GeometricMesh& m, int index);
double interior_element_area(const GeometricMesh& m, int index);
double polygon_area(const std::vector<Eigen::Vector2d>& v);

}  // namespace polyspec::geometry
