#pragma once

#include "polyspec/basis.hpp"
#include "polyspec/mesh.hpp"

#include <Eigen/Dense>

#include <vector>

namespace polyspec::ops {

// Pointwise coefficients of r^2 L at a sector point, expressed in the
// log-polar frame (tau, theta) attached to vertex k (theta local, 0 on the
// outgoing edge): At = O^T A O with O the rotation by the global angle,
// bt = e^tau O^T b, ct = e^{2 tau} c.
struct TildeCoeffs {
  Eigen::Matrix2d At;
  Eigen::Vector2d bt;
  double ct = 0.0;
};
TildeCoeffs transform_to_sector(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m,
                                int k, double tau, double theta);

// Six-coefficient non-divergence form on an element grid of the given degree:
//   res = A u_xx + 2 B u_xy + C u_yy + D u_x + E u_y + F u
// with derivatives taken in the element's norm frame.
struct CoeffSet {
  int degree = 0;
  basis::NodalTensor A, B, C, D, E, F;
};

// Coefficients of sqrt(J) r^2 L in (nu, phi) for sector element (k,i,j), j>=2.
// The first-order terms fold in the derivatives of the hatted second-order
// coefficients (non-divergence expansion of the divergence-form operator).
struct SectorOperator {
  int k = 0, i = 0, j = 0, degree = 0;
  double half_nu = 0.0, half_phi = 0.0;  // d nu/d xi, d phi/d eta of the master map
  CoeffSet c;
  basis::NodalTensor at11, at12, at22;  // hatted At entries, for conormal traces
};

// Coefficients of sqrt(J) L pulled back to the master square of interior
// quad l, plus the hatted metric fields used by the pullback and the traces.
struct InteriorOperator {
  int l = 0, degree = 0;
  CoeffSet c;
  basis::NodalTensor xi_x1, xi_x2, eta_x1, eta_x2;
  basis::NodalTensor a11, a12, a22;  // physical A sampled on the element grid
};

SectorOperator sector_operator(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m,
                               int k, int i, int j);
InteriorOperator interior_operator(const probdef::EllipticProblem& p,
                                   const geometry::GeometricMesh& m, int l);

// Residual field on the nq x nq tensor GLL quadrature grid. sx, sy scale
// master-square derivatives into the norm frame (sector: 2/dnu, 2/dphi;
// interior: 1, 1 since the frame is the master square itself).
Eigen::MatrixXd apply_operator(const CoeffSet& c, double sx, double sy, const basis::NodalTensor& u,
                               int nq);
inline Eigen::MatrixXd apply_operator(const SectorOperator& s, const basis::NodalTensor& u,
                                      int nq) {
  return apply_operator(s.c, 1.0 / s.half_nu, 1.0 / s.half_phi, u, nq);
}
inline Eigen::MatrixXd apply_operator(const InteriorOperator& o, const basis::NodalTensor& u,
                                      int nq) {
  return apply_operator(o.c, 1.0, 1.0, u, nq);
}

// Conormal trace (du/dn)_At on a sector element side (mesh side encoding:
// 0 phi=lo, 1 phi=hi, 2 nu=lo, 3 nu=hi; outward normals), at edge parameters
// ts following the side's natural direction.
Eigen::VectorXd conormal_sector(const SectorOperator& s, int side, const basis::NodalTensor& u,
                                const std::vector<double>& ts);

enum class TraceKind { Tangential, Conormal };

// Tangential or A-conormal trace on a boundary side of an interior quad,
// using the hatted metrics; side s joins corners s and s+1 and ts runs from
// corner s to corner s+1.
Eigen::VectorXd boundary_interior(const InteriorOperator& o, const geometry::GeometricMesh& m,
                                  int side, const basis::NodalTensor& u,
                                  const std::vector<double>& ts, TraceKind which);

}  // namespace polyspec::ops
