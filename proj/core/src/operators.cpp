#include "polyspec/operators.hpp"

#include <cmath>
#include <stdexcept>

namespace polyspec::ops {

using basis::NodalTensor;
using Eigen::MatrixXd;
using Eigen::Vector2d;

TildeCoeffs transform_to_sector(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m,
                                int k, double tau, double theta) {
  const double tg = m.corner[k].theta0 + theta;
  const double ct = std::cos(tg), st = std::sin(tg);
  Eigen::Matrix2d O;
  O << ct, -st, st, ct;
  const Vector2d x = geometry::sector_map(m, k, tau, theta);
  Eigen::Matrix2d A;
  A << p.a11.eval(x.x(), x.y()), p.a12.eval(x.x(), x.y()), p.a12.eval(x.x(), x.y()),
      p.a22.eval(x.x(), x.y());
  const Vector2d b(p.b1.eval(x.x(), x.y()), p.b2.eval(x.x(), x.y()));
  const double r = std::exp(tau);
  TildeCoeffs out;
  out.At = O.transpose() * A * O;
  out.bt = r * (O.transpose() * b);
  out.ct = r * r * p.c.eval(x.x(), x.y());
  return out;
}

SectorOperator sector_operator(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m,
                               int k, int i, int j) {
  if (j < 2) throw std::invalid_argument("sector_operator: layer 1 carries no operator");
  const geometry::SectorElement& e = m.sectors[m.sector_index(k, i, j)];
  const int d = e.degree;
  SectorOperator s;
  s.k = k;
  s.i = i;
  s.j = j;
  s.degree = d;
  s.half_nu = 0.5 * (e.nu_hi - e.nu_lo);
  s.half_phi = 0.5 * (e.phi_hi - e.phi_lo);

  const auto& rule = basis::gll_rule(d + 1);
  NodalTensor bt1(d), bt2(d), ctt(d), sj(d);
  s.at11 = NodalTensor(d);
  s.at12 = NodalTensor(d);
  s.at22 = NodalTensor(d);
  for (int a = 0; a <= d; ++a)
    for (int b = 0; b <= d; ++b) {
      const double nu = 0.5 * (e.nu_lo + e.nu_hi) + s.half_nu * rule.nodes[a];
      const double phi = 0.5 * (e.phi_lo + e.phi_hi) + s.half_phi * rule.nodes[b];
      const TildeCoeffs tc = transform_to_sector(p, m, k, nu, phi);
      s.at11.v(a, b) = tc.At(0, 0);
      s.at12.v(a, b) = tc.At(0, 1);
      s.at22.v(a, b) = tc.At(1, 1);
      bt1.v(a, b) = tc.bt.x();
      bt2.v(a, b) = tc.bt.y();
      ctt.v(a, b) = tc.ct;
      sj.v(a, b) = std::sqrt(geometry::sector_jacobian(m, k, nu, phi));
    }

  // Frame derivatives of the hatted second-order coefficients.
  const MatrixXd& Dm = basis::diff_matrix(d + 1);
  const MatrixXd a11_nu = (Dm * s.at11.v) / s.half_nu;
  const MatrixXd a12_nu = (Dm * s.at12.v) / s.half_nu;
  const MatrixXd a12_phi = (s.at12.v * Dm.transpose()) / s.half_phi;
  const MatrixXd a22_phi = (s.at22.v * Dm.transpose()) / s.half_phi;

  CoeffSet& c = s.c;
  c.degree = d;
  c.A = NodalTensor(d);
  c.B = NodalTensor(d);
  c.C = NodalTensor(d);
  c.D = NodalTensor(d);
  c.E = NodalTensor(d);
  c.F = NodalTensor(d);
  c.A.v = -s.at11.v;
  c.B.v = -s.at12.v;
  c.C.v = -s.at22.v;
  c.D.v = bt1.v - a11_nu - a12_phi;
  c.E.v = bt2.v - a12_nu - a22_phi;
  c.F.v = ctt.v;
  for (MatrixXd* f : {&c.A.v, &c.B.v, &c.C.v, &c.D.v, &c.E.v, &c.F.v})
    *f = f->cwiseProduct(sj.v);
  return s;
}

InteriorOperator interior_operator(const probdef::EllipticProblem& p,
                                   const geometry::GeometricMesh& m, int l) {
  const geometry::InteriorElement& e = m.interiors[l];
  const int d = e.degree;
  InteriorOperator o;
  o.l = l;
  o.degree = d;
  o.xi_x1 = NodalTensor(d);
  o.xi_x2 = NodalTensor(d);
  o.eta_x1 = NodalTensor(d);
  o.eta_x2 = NodalTensor(d);
  o.a11 = NodalTensor(d);
  o.a12 = NodalTensor(d);
  o.a22 = NodalTensor(d);
  NodalTensor b1(d), b2(d), cc(d), sj(d);

  const auto& rule = basis::gll_rule(d + 1);
  for (int a = 0; a <= d; ++a)
    for (int b = 0; b <= d; ++b) {
      const auto mt = geometry::interior_metric(m, l, rule.nodes[a], rule.nodes[b]);
      o.xi_x1.v(a, b) = mt.xi_x1;
      o.xi_x2.v(a, b) = mt.xi_x2;
      o.eta_x1.v(a, b) = mt.eta_x1;
      o.eta_x2.v(a, b) = mt.eta_x2;
      sj.v(a, b) = std::sqrt(mt.det);
      const Vector2d x = geometry::interior_map(m, l, rule.nodes[a], rule.nodes[b]);
      o.a11.v(a, b) = p.a11.eval(x.x(), x.y());
      o.a12.v(a, b) = p.a12.eval(x.x(), x.y());
      o.a22.v(a, b) = p.a22.eval(x.x(), x.y());
      b1.v(a, b) = p.b1.eval(x.x(), x.y());
      b2.v(a, b) = p.b2.eval(x.x(), x.y());
      cc.v(a, b) = p.c.eval(x.x(), x.y());
    }

  const MatrixXd& Dm = basis::diff_matrix(d + 1);
  auto dxi = [&](const MatrixXd& f) { return MatrixXd(Dm * f); };
  auto deta = [&](const MatrixXd& f) { return MatrixXd(f * Dm.transpose()); };
  // Physical-frame derivative of a hatted field g: dx_i g = xi_xi g_xi + eta_xi g_eta.
  auto dx1 = [&](const MatrixXd& f) {
    return MatrixXd(o.xi_x1.v.cwiseProduct(dxi(f)) + o.eta_x1.v.cwiseProduct(deta(f)));
  };
  auto dx2 = [&](const MatrixXd& f) {
    return MatrixXd(o.xi_x2.v.cwiseProduct(dxi(f)) + o.eta_x2.v.cwiseProduct(deta(f)));
  };

  const MatrixXd &xx1 = o.xi_x1.v, &xx2 = o.xi_x2.v, &yx1 = o.eta_x1.v, &yx2 = o.eta_x2.v;
  // Second-order pullback coefficients of sum a_ij u_xi_xj.
  const MatrixXd A2 = o.a11.v.cwiseProduct(xx1.cwiseProduct(xx1)) +
                      2.0 * o.a12.v.cwiseProduct(xx1.cwiseProduct(xx2)) +
                      o.a22.v.cwiseProduct(xx2.cwiseProduct(xx2));
  const MatrixXd C2 = o.a11.v.cwiseProduct(yx1.cwiseProduct(yx1)) +
                      2.0 * o.a12.v.cwiseProduct(yx1.cwiseProduct(yx2)) +
                      o.a22.v.cwiseProduct(yx2.cwiseProduct(yx2));
  const MatrixXd B2 = o.a11.v.cwiseProduct(xx1.cwiseProduct(yx1)) +
                      o.a12.v.cwiseProduct(xx1.cwiseProduct(yx2) + xx2.cwiseProduct(yx1)) +
                      o.a22.v.cwiseProduct(xx2.cwiseProduct(yx2));
  // First-order terms produced by differentiating the hatted metrics.
  const MatrixXd S1 = o.a11.v.cwiseProduct(dx1(xx1)) + o.a22.v.cwiseProduct(dx2(xx2)) +
                      o.a12.v.cwiseProduct(dx1(xx2) + dx2(xx1));
  const MatrixXd S2 = o.a11.v.cwiseProduct(dx1(yx1)) + o.a22.v.cwiseProduct(dx2(yx2)) +
                      o.a12.v.cwiseProduct(dx1(yx2) + dx2(yx1));
  // Non-divergence expansion of -div(A grad): derivative-of-coefficient terms.
  const MatrixXd P1 = dx1(o.a11.v) + dx2(o.a12.v);
  const MatrixXd P2 = dx1(o.a12.v) + dx2(o.a22.v);

  CoeffSet& c = o.c;
  c.degree = d;
  c.A = NodalTensor(d);
  c.B = NodalTensor(d);
  c.C = NodalTensor(d);
  c.D = NodalTensor(d);
  c.E = NodalTensor(d);
  c.F = NodalTensor(d);
  c.A.v = -A2;
  c.B.v = -B2;
  c.C.v = -C2;
  c.D.v = -S1 + (b1.v - P1).cwiseProduct(xx1) + (b2.v - P2).cwiseProduct(xx2);
  c.E.v = -S2 + (b1.v - P1).cwiseProduct(yx1) + (b2.v - P2).cwiseProduct(yx2);
  c.F.v = cc.v;
  for (MatrixXd* f : {&c.A.v, &c.B.v, &c.C.v, &c.D.v, &c.E.v, &c.F.v})
    *f = f->cwiseProduct(sj.v);
  return o;
}

Eigen::MatrixXd apply_operator(const CoeffSet& c, double sx, double sy, const basis::NodalTensor& u,
                               int nq) {
  if (u.d != c.degree) throw std::invalid_argument("apply_operator: degree mismatch");
  const int d = c.degree;
  const MatrixXd& Dm = basis::diff_matrix(d + 1);
  const MatrixXd uxi = Dm * u.v;
  const MatrixXd ueta = u.v * Dm.transpose();
  const MatrixXd uxx = (sx * sx) * (Dm * uxi);
  const MatrixXd uxy = (sx * sy) * (uxi * Dm.transpose());
  const MatrixXd uyy = (sy * sy) * (ueta * Dm.transpose());

  const auto& q = basis::gll_rule(nq);
  const MatrixXd P = basis::interp_matrix(d + 1, q.nodes);
  auto lift = [&](const MatrixXd& f) { return MatrixXd(P * f * P.transpose()); };
  return lift(c.A.v).cwiseProduct(lift(uxx)) + 2.0 * lift(c.B.v).cwiseProduct(lift(uxy)) +
         lift(c.C.v).cwiseProduct(lift(uyy)) + (sx)*lift(c.D.v).cwiseProduct(lift(uxi)) +
         (sy)*lift(c.E.v).cwiseProduct(lift(ueta)) + lift(c.F.v).cwiseProduct(lift(u.v));
}

namespace {

// Master-square point of edge parameter t on a side, mesh side conventions.
void sector_side_point(int side, double t, double& xi, double& eta, Vector2d& n) {
  switch (side) {
    case 0: xi = t; eta = -1.0; n = {0.0, -1.0}; break;
    case 1: xi = t; eta = 1.0; n = {0.0, 1.0}; break;
    case 2: xi = -1.0; eta = t; n = {-1.0, 0.0}; break;
    default: xi = 1.0; eta = t; n = {1.0, 0.0}; break;
  }
}

void interior_side_point(int side, double t, double& xi, double& eta) {
  switch (side) {
    case 0: xi = t; eta = -1.0; break;
    case 1: xi = 1.0; eta = t; break;
    case 2: xi = -t; eta = 1.0; break;
    default: xi = -1.0; eta = -t; break;
  }
}

}  // namespace

Eigen::VectorXd conormal_sector(const SectorOperator& s, int side, const basis::NodalTensor& u,
                                const std::vector<double>& ts) {
  Eigen::VectorXd out(ts.size());
  for (size_t idx = 0; idx < ts.size(); ++idx) {
    double xi, eta;
    Vector2d n;
    sector_side_point(side, ts[idx], xi, eta, n);
    const Vector2d g = basis::eval_nodal_grad(u, xi, eta);
    const double unu = g.x() / s.half_nu;
    const double uphi = g.y() / s.half_phi;
    const double a11 = basis::eval_nodal(s.at11, xi, eta);
    const double a12 = basis::eval_nodal(s.at12, xi, eta);
    const double a22 = basis::eval_nodal(s.at22, xi, eta);
    out(idx) = n.x() * (a11 * unu + a12 * uphi) + n.y() * (a12 * unu + a22 * uphi);
  }
  return out;
}

Eigen::VectorXd boundary_interior(const InteriorOperator& o, const geometry::GeometricMesh& m,
                                  int side, const basis::NodalTensor& u,
                                  const std::vector<double>& ts, TraceKind which) {
  const auto& e = m.interiors[o.l];
  const Vector2d tv = (e.corners[(side + 1) % 4] - e.corners[side]).normalized();
  const Vector2d n(tv.y(), -tv.x());  // outward for a CCW quad
  Eigen::VectorXd out(ts.size());
  for (size_t idx = 0; idx < ts.size(); ++idx) {
    double xi, eta;
    interior_side_point(side, ts[idx], xi, eta);
    const Vector2d g = basis::eval_nodal_grad(u, xi, eta);
    const Vector2d grad(basis::eval_nodal(o.xi_x1, xi, eta) * g.x() +
                            basis::eval_nodal(o.eta_x1, xi, eta) * g.y(),
                        basis::eval_nodal(o.xi_x2, xi, eta) * g.x() +
                            basis::eval_nodal(o.eta_x2, xi, eta) * g.y());
    if (which == TraceKind::Tangential) {
      out(idx) = tv.dot(grad);
    } else {
      const double a11 = basis::eval_nodal(o.a11, xi, eta);
      const double a12 = basis::eval_nodal(o.a12, xi, eta);
      const double a22 = basis::eval_nodal(o.a22, xi, eta);
      const Vector2d Ag(a11 * grad.x() + a12 * grad.y(), a12 * grad.x() + a22 * grad.y());
      out(idx) = n.dot(Ag);
    }
  }
  return out;
}

}  // namespace polyspec::ops
