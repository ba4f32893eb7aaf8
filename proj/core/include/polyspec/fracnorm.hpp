#pragma once

#include "polyspec/basis.hpp"
#include "polyspec/mesh.hpp"

#include <Eigen/Dense>

#include <vector>

namespace polyspec::fracnorm {

// L2 Gram of the degree-d nodal edge basis, including the affine length
// factor: q^T G q = integral of the trace squared over an edge of length len.
Eigen::MatrixXd edge_l2_gram(int d, double len);

// Sobolev-Slobodeckij half-norm Gram on the reference interval:
// q^T G q = double integral over (-1,1)^2 of (v(x)-v(y))^2 / (x-y)^2.
// Scale-invariant under affine reparametrization, so no length factor.
// Cached by degree, thread-safe.
const Eigen::MatrixXd& h_half_gram(int d);

// Trace quantity measured along an edge. DNu/DPhi are sector-frame
// derivatives, DX1/DX2 physical derivatives through the hatted metrics of the
// interior element.
enum class JumpQuantity { Value, DNu, DPhi, DX1, DX2 };

// Trace of the given quantity of u on one side of an edge, at edge parameters
// ts (common edge parametrization; arc interfaces invert the bilinear map).
Eigen::VectorXd trace_values(const geometry::GeometricMesh& m, const geometry::MeshEdge& e,
                             int side_idx, const basis::NodalTensor& u, JumpQuantity q,
                             const std::vector<double>& ts);

// Difference of the two side traces sampled at the d+1 GLL nodes of the edge.
Eigen::VectorXd jump_vector(const geometry::GeometricMesh& m, const geometry::MeshEdge& e,
                            const basis::NodalTensor& u_left, const basis::NodalTensor& u_right,
                            JumpQuantity q, int d);

}  // namespace polyspec::fracnorm
