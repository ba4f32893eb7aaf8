#include "polyspec/fracnorm.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace polyspec::fracnorm {

using basis::NodalTensor;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Eigen::MatrixXd edge_l2_gram(int d, double len) {
  static std::mutex mu;
  static std::map<int, MatrixXd> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(d);
    if (it != cache.end()) return (0.5 * len) * it->second;
  }
  const auto& q = basis::gll_rule(d + 2);
  const MatrixXd E = basis::interp_matrix(d + 1, q.nodes);
  VectorXd w = Eigen::Map<const VectorXd>(q.weights.data(), q.n);
  MatrixXd G = E.transpose() * w.asDiagonal() * E;
  G = 0.5 * (G + G.transpose()).eval();
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(d, G);
  return (0.5 * len) * G;
}

const Eigen::MatrixXd& h_half_gram(int d) {
  static std::mutex mu;
  static std::map<int, MatrixXd> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;

  // Difference quotients of the Lagrange basis are polynomials of degree d-1
  // per variable, so the (d+2)-point tensor rule integrates the Gram exactly.
  const auto& q = basis::gll_rule(d + 2);
  const int nq = q.n, nb = d + 1;
  const MatrixXd E = basis::interp_matrix(nb, q.nodes);
  const MatrixXd Ed = E * basis::diff_matrix(nb);  // Ed(a, i) = l_i'(q_a)

  std::vector<MatrixXd> K(nb, MatrixXd(nq, nq));
  for (int i = 0; i < nb; ++i)
    for (int a = 0; a < nq; ++a)
      for (int b = 0; b < nq; ++b)
        K[i](a, b) = (a == b) ? Ed(a, i) : (E(a, i) - E(b, i)) / (q.nodes[a] - q.nodes[b]);

  MatrixXd G = MatrixXd::Zero(nb, nb);
  for (int i = 0; i < nb; ++i)
    for (int j = i; j < nb; ++j) {
      double s = 0.0;
      for (int a = 0; a < nq; ++a)
        for (int b = 0; b < nq; ++b) s += q.weights[a] * q.weights[b] * K[i](a, b) * K[j](a, b);
      G(i, j) = G(j, i) = s;
    }
  return cache.emplace(d, std::move(G)).first->second;
}

namespace {

// Hatted metric fields of an interior element (interpolants of the true
// metric at the element grid), evaluated at a master point.
struct HattedMetric {
  NodalTensor xi_x1, xi_x2, eta_x1, eta_x2;
};

HattedMetric hatted_metric(const geometry::GeometricMesh& m, int l) {
  const int d = m.interiors[l].degree;
  HattedMetric h{NodalTensor(d), NodalTensor(d), NodalTensor(d), NodalTensor(d)};
  const auto& rule = basis::gll_rule(d + 1);
  for (int a = 0; a <= d; ++a)
    for (int b = 0; b <= d; ++b) {
      const auto mt = geometry::interior_metric(m, l, rule.nodes[a], rule.nodes[b]);
      h.xi_x1.v(a, b) = mt.xi_x1;
      h.xi_x2.v(a, b) = mt.xi_x2;
      h.eta_x1.v(a, b) = mt.eta_x1;
      h.eta_x2.v(a, b) = mt.eta_x2;
    }
  return h;
}

}  // namespace

Eigen::VectorXd trace_values(const geometry::GeometricMesh& m, const geometry::MeshEdge& e,
                             int side_idx, const basis::NodalTensor& u, JumpQuantity q,
                             const std::vector<double>& ts) {
  const geometry::EdgeSide& side = e.sides[side_idx];
  VectorXd out(ts.size());

  if (side.is_sector) {
    const geometry::SectorElement& el = m.sectors[side.elem];
    const double hnu = 0.5 * (el.nu_hi - el.nu_lo), hphi = 0.5 * (el.phi_hi - el.phi_lo);
    for (size_t idx = 0; idx < ts.size(); ++idx) {
      const Eigen::Vector2d mp = geometry::edge_point_on_side(m, e, side_idx, ts[idx]);
      switch (q) {
        case JumpQuantity::Value: out(idx) = basis::eval_nodal(u, mp.x(), mp.y()); break;
        case JumpQuantity::DNu: out(idx) = basis::eval_nodal_grad(u, mp.x(), mp.y()).x() / hnu; break;
        case JumpQuantity::DPhi:
          out(idx) = basis::eval_nodal_grad(u, mp.x(), mp.y()).y() / hphi;
          break;
        default: throw std::invalid_argument("trace_values: physical derivative on a sector side");
      }
    }
    return out;
  }

  const bool sector_frame = (e.frame == geometry::EdgeFrame::SectorNuPhi);
  const bool need_grad = (q != JumpQuantity::Value);
  HattedMetric hm;
  if (need_grad) hm = hatted_metric(m, side.elem);
  // Sector-frame angle parametrization of an arc interface (side 0 is the
  // sector side and fixes the natural direction).
  double phi_lo = 0.0, dphi = 0.0, theta0 = 0.0, lr = 0.0;
  if (sector_frame) {
    const geometry::SectorElement& sec = m.sectors[e.sides[0].elem];
    phi_lo = sec.phi_lo;
    dphi = sec.phi_hi - sec.phi_lo;
    theta0 = m.corner[e.vertex_k].theta0;
    lr = e.dist;  // arc radius
  }

  for (size_t idx = 0; idx < ts.size(); ++idx) {
    const Eigen::Vector2d mp = geometry::edge_point_on_side(m, e, side_idx, ts[idx]);
    if (q == JumpQuantity::Value) {
      out(idx) = basis::eval_nodal(u, mp.x(), mp.y());
      continue;
    }
    const Eigen::Vector2d g = basis::eval_nodal_grad(u, mp.x(), mp.y());
    const double ux1 = basis::eval_nodal(hm.xi_x1, mp.x(), mp.y()) * g.x() +
                       basis::eval_nodal(hm.eta_x1, mp.x(), mp.y()) * g.y();
    const double ux2 = basis::eval_nodal(hm.xi_x2, mp.x(), mp.y()) * g.x() +
                       basis::eval_nodal(hm.eta_x2, mp.x(), mp.y()) * g.y();
    switch (q) {
      case JumpQuantity::DX1: out(idx) = ux1; break;
      case JumpQuantity::DX2: out(idx) = ux2; break;
      case JumpQuantity::DNu:
      case JumpQuantity::DPhi: {
        if (!sector_frame)
          throw std::invalid_argument("trace_values: sector-frame derivative on an interior edge");
        const double phi = phi_lo + 0.5 * (ts[idx] + 1.0) * dphi;
        const double tg = theta0 + phi;
        if (q == JumpQuantity::DNu)
          out(idx) = lr * (std::cos(tg) * ux1 + std::sin(tg) * ux2);
        else
          out(idx) = lr * (-std::sin(tg) * ux1 + std::cos(tg) * ux2);
        break;
      }
      default: break;
    }
  }
  return out;
}

Eigen::VectorXd jump_vector(const geometry::GeometricMesh& m, const geometry::MeshEdge& e,
                            const basis::NodalTensor& u_left, const basis::NodalTensor& u_right,
                            JumpQuantity q, int d) {
  if (e.sides.size() != 2) throw std::invalid_argument("jump_vector: edge is one-sided");
  if (!e.finite_measure) throw std::invalid_argument("jump_vector: infinite-measure edge");
  const auto& rule = basis::gll_rule(d + 1);
  return trace_values(m, e, 0, u_left, q, rule.nodes) -
         trace_values(m, e, 1, u_right, q, rule.nodes);
}

}  // namespace polyspec::fracnorm
