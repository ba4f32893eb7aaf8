#include "polyspec/assembly.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace polyspec::assembly {

using basis::NodalTensor;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using fracnorm::JumpQuantity;
using geometry::EdgeKind;

namespace {

VectorXd flat(const MatrixXd& M) { return Eigen::Map<const VectorXd>(M.data(), M.size()); }

// Trace matrix of a quantity on one side of an edge: column c is the trace of
// the c-th nodal basis tensor (column-major local dof order).
MatrixXd trace_matrix(const geometry::GeometricMesh& m, const geometry::MeshEdge& e, int side_idx,
                      JumpQuantity q, const std::vector<double>& ts) {
  const geometry::EdgeSide& s = e.sides[side_idx];
  const int d = s.is_sector ? m.sectors[s.elem].degree : m.interiors[s.elem].degree;
  const int n = (d + 1) * (d + 1);
  MatrixXd B(ts.size(), n);
  NodalTensor unit(d);
  for (int c = 0; c < n; ++c) {
    unit.v(c % (d + 1), c / (d + 1)) = 1.0;
    B.col(c) = fracnorm::trace_values(m, e, side_idx, unit, q, ts);
    unit.v(c % (d + 1), c / (d + 1)) = 0.0;
  }
  return B;
}

MatrixXd conormal_matrix_sector(const ops::SectorOperator& so, int side,
                                const std::vector<double>& ts) {
  const int d = so.degree, n = (d + 1) * (d + 1);
  MatrixXd B(ts.size(), n);
  NodalTensor unit(d);
  for (int c = 0; c < n; ++c) {
    unit.v(c % (d + 1), c / (d + 1)) = 1.0;
    B.col(c) = ops::conormal_sector(so, side, unit, ts);
    unit.v(c % (d + 1), c / (d + 1)) = 0.0;
  }
  return B;
}

MatrixXd trace_matrix_interior(const ops::InteriorOperator& io, const geometry::GeometricMesh& m,
                               int side, const std::vector<double>& ts, ops::TraceKind which) {
  const int d = io.degree, n = (d + 1) * (d + 1);
  MatrixXd B(ts.size(), n);
  NodalTensor unit(d);
  for (int c = 0; c < n; ++c) {
    unit.v(c % (d + 1), c / (d + 1)) = 1.0;
    B.col(c) = ops::boundary_interior(io, m, side, unit, ts, which);
    unit.v(c % (d + 1), c / (d + 1)) = 0.0;
  }
  return B;
}

// 1-D H^{1/2} surrogate Gram at the given degree and edge length.
MatrixXd h_half_full(int d, double len) {
  return fracnorm::edge_l2_gram(d, len) + fracnorm::h_half_gram(d);
}

void finish_term(ResidualTerm& t, double& constant) {
  const int na = t.block_a >= 0 ? static_cast<int>(t.Ba.cols()) : 0;
  const int nb = t.block_b >= 0 ? static_cast<int>(t.Bb.cols()) : 0;
  const int nv = t.vslot >= 0 ? 1 : 0;
  const int rows = t.data.size();
  MatrixXd C(rows, na + nb + nv);
  if (na) C.leftCols(na) = t.Ba;
  if (nb) C.middleCols(na, nb) = t.Bb;
  if (nv) C.col(na + nb) = t.vcoef;
  if (t.Gdiag.size() > 0) {
    const MatrixXd GC = t.Gdiag.asDiagonal() * C;
    t.Aloc = t.weight * C.transpose() * GC;
    t.hloc = t.weight * GC.transpose() * t.data;
    constant += t.weight * t.data.dot(t.Gdiag.asDiagonal() * t.data);
  } else {
    const MatrixXd GC = t.G * C;
    t.Aloc = t.weight * C.transpose() * GC;
    t.hloc = t.weight * GC.transpose() * t.data;
    constant += t.weight * t.data.dot(t.G * t.data);
  }
  t.Aloc = 0.5 * (t.Aloc + t.Aloc.transpose().eval());
}

std::vector<std::pair<int, int>> term_blocks(const NormalSystem& sys, const ResidualTerm& t) {
  // (dof offset, size) groups of the local dof vector, in order.
  std::vector<std::pair<int, int>> g;
  if (t.block_a >= 0) g.push_back({sys.layout.block_offset[t.block_a], sys.layout.block_size[t.block_a]});
  if (t.block_b >= 0) g.push_back({sys.layout.block_offset[t.block_b], sys.layout.block_size[t.block_b]});
  if (t.vslot >= 0) g.push_back({t.vslot, 1});
  return g;
}

}  // namespace

DofLayout build_layout(const geometry::GeometricMesh& m) {
  DofLayout lo;
  lo.p = m.problem->p();
  lo.total = lo.p;
  lo.sector_block.assign(m.sectors.size(), -1);
  lo.interior_block.assign(m.interiors.size(), -1);
  for (size_t s = 0; s < m.sectors.size(); ++s) {
    if (m.sectors[s].j < 2) continue;
    const int n = (m.sectors[s].degree + 1) * (m.sectors[s].degree + 1);
    lo.sector_block[s] = static_cast<int>(lo.block_offset.size());
    lo.block_offset.push_back(lo.total);
    lo.block_size.push_back(n);
    lo.total += n;
  }
  for (size_t l = 0; l < m.interiors.size(); ++l) {
    const int n = (m.interiors[l].degree + 1) * (m.interiors[l].degree + 1);
    lo.interior_block[l] = static_cast<int>(lo.block_offset.size());
    lo.block_offset.push_back(lo.total);
    lo.block_size.push_back(n);
    lo.total += n;
  }
  return lo;
}

ProjectedData project_data(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m) {
  ProjectedData pd;
  pd.F_sector.resize(m.sectors.size());
  pd.F_interior.resize(m.interiors.size());
  pd.edge_data.resize(m.edges.size());
  pd.a_vertex.assign(p.p(), std::numeric_limits<double>::quiet_NaN());

  for (size_t s = 0; s < m.sectors.size(); ++s) {
    const auto& e = m.sectors[s];
    if (e.j < 2) continue;
    const double hnu = 0.5 * (e.nu_hi - e.nu_lo), hphi = 0.5 * (e.phi_hi - e.phi_lo);
    auto F = [&](double xi, double eta) {
      const double nu = 0.5 * (e.nu_lo + e.nu_hi) + hnu * xi;
      const double phi = 0.5 * (e.phi_lo + e.phi_hi) + hphi * eta;
      const Eigen::Vector2d x = geometry::sector_map(m, e.k, nu, phi);
      return std::exp(2.0 * nu) * p.f.eval(x.x(), x.y()) *
             std::sqrt(geometry::sector_jacobian(m, e.k, nu, phi));
    };
    pd.F_sector[s] = basis::h2_project_2d(F, 2 * e.degree);
  }
  for (size_t l = 0; l < m.interiors.size(); ++l) {
    const auto& e = m.interiors[l];
    auto F = [&](double xi, double eta) {
      const Eigen::Vector2d x = geometry::interior_map(m, e.l, xi, eta);
      return p.f.eval(x.x(), x.y()) * std::sqrt(geometry::interior_metric(m, e.l, xi, eta).det);
    };
    pd.F_interior[l] = basis::h2_project_2d(F, 2 * e.degree);
  }

  for (int k = 0; k < p.p(); ++k) {
    for (int eidx : {k, (k + 1) % p.p()}) {
      if (p.edges[eidx].kind == probdef::BcKind::Dirichlet) {
        pd.a_vertex[k] = p.edges[eidx].data.eval(p.vertices[k].x(), p.vertices[k].y());
        break;
      }
    }
  }

  for (const auto& e : m.edges) {
    const bool dirichlet = e.kind == EdgeKind::BoundaryDirichlet;
    const bool neumann = e.kind == EdgeKind::BoundaryNeumann;
    if (!dirichlet && !neumann) continue;
    if (!e.finite_measure) continue;
    const auto& g = p.edges[e.bc_edge].data;
    if (e.frame == geometry::EdgeFrame::SectorNuPhi) {
      const auto& sec = m.sectors[e.sides[0].elem];
      auto fn = [&](double t) {
        const Eigen::Vector2d mp = geometry::edge_point_on_side(m, e, 0, t);
        const double nu = 0.5 * (sec.nu_lo + sec.nu_hi) + 0.5 * (sec.nu_hi - sec.nu_lo) * mp.x();
        const Eigen::Vector2d x = geometry::edge_point_physical(m, e, t);
        const double gv = g.eval(x.x(), x.y());
        // Neumann data acquires the conormal scale factor r = e^nu
        return neumann ? std::exp(nu) * gv : gv;
      };
      pd.edge_data[e.id] = basis::h2_project_1d(fn, 2 * sec.degree);
    } else {
      const int W = m.interiors[e.sides[0].elem].degree;
      auto fn = [&](double t) {
        const Eigen::Vector2d x = geometry::edge_point_physical(m, e, t);
        return g.eval(x.x(), x.y());
      };
      pd.edge_data[e.id] = basis::h2_project_1d(fn, 2 * W);
    }
  }
  return pd;
}

NormalSystem build_functional(const probdef::EllipticProblem& p, const geometry::GeometricMesh& m) {
  NormalSystem sys;
  sys.problem = &p;
  sys.mesh = &m;
  sys.layout = build_layout(m);
  ProjectedData pd = project_data(p, m);

  sys.sector_ops.resize(m.sectors.size());
  for (size_t s = 0; s < m.sectors.size(); ++s)
    if (m.sectors[s].j >= 2)
      sys.sector_ops[s] = ops::sector_operator(p, m, m.sectors[s].k, m.sectors[s].i, m.sectors[s].j);
  sys.interior_ops.resize(m.interiors.size());
  for (size_t l = 0; l < m.interiors.size(); ++l)
    sys.interior_ops[l] = ops::interior_operator(p, m, static_cast<int>(l));

  // PDE terms, sector elements first.
  for (size_t s = 0; s < m.sectors.size(); ++s) {
    const auto& e = m.sectors[s];
    if (e.j < 2) continue;
    const int d = e.degree, n = (d + 1) * (d + 1), nq = 2 * d + 3;
    ResidualTerm t;
    t.kind = TermKind::PdeSector;
    const auto& c = m.corner[e.k];
    t.weight = std::pow(c.sigma[e.j], -2.0 * c.lambda);
    t.block_a = sys.layout.sector_block[s];
    t.Ba.resize(nq * nq, n);
    NodalTensor unit(d);
    for (int cidx = 0; cidx < n; ++cidx) {
      unit.v(cidx % (d + 1), cidx / (d + 1)) = 1.0;
      t.Ba.col(cidx) = flat(ops::apply_operator(sys.sector_ops[s], unit, nq));
      unit.v(cidx % (d + 1), cidx / (d + 1)) = 0.0;
    }
    const auto& q = basis::gll_rule(nq);
    const MatrixXd P = basis::interp_matrix(2 * d + 1, q.nodes);
    t.data = flat(P * pd.F_sector[s].v * P.transpose());
    const double hnu = 0.5 * (e.nu_hi - e.nu_lo), hphi = 0.5 * (e.phi_hi - e.phi_lo);
    MatrixXd Wq(nq, nq);
    for (int a = 0; a < nq; ++a)
      for (int b = 0; b < nq; ++b) Wq(a, b) = q.weights[a] * q.weights[b] * hnu * hphi;
    t.Gdiag = flat(Wq);
    finish_term(t, sys.constant);
    sys.terms.push_back(std::move(t));
  }
  for (size_t l = 0; l < m.interiors.size(); ++l) {
    const auto& e = m.interiors[l];
    const int d = e.degree, n = (d + 1) * (d + 1), nq = 2 * d + 3;
    ResidualTerm t;
    t.kind = TermKind::PdeInterior;
    t.block_a = sys.layout.interior_block[l];
    t.Ba.resize(nq * nq, n);
    NodalTensor unit(d);
    for (int cidx = 0; cidx < n; ++cidx) {
      unit.v(cidx % (d + 1), cidx / (d + 1)) = 1.0;
      t.Ba.col(cidx) = flat(ops::apply_operator(sys.interior_ops[l], unit, nq));
      unit.v(cidx % (d + 1), cidx / (d + 1)) = 0.0;
    }
    const auto& q = basis::gll_rule(nq);
    const MatrixXd P = basis::interp_matrix(2 * d + 1, q.nodes);
    t.data = flat(P * pd.F_interior[l].v * P.transpose());
    MatrixXd Wq(nq, nq);
    for (int a = 0; a < nq; ++a)
      for (int b = 0; b < nq; ++b) Wq(a, b) = q.weights[a] * q.weights[b];
    t.Gdiag = flat(Wq);
    finish_term(t, sys.constant);
    sys.terms.push_back(std::move(t));
  }

  // Edge terms, in edge id order.
  for (const auto& e : m.edges) {
    if (!e.finite_measure) continue;
    const bool sector_frame = (e.frame == geometry::EdgeFrame::SectorNuPhi);

    if (e.sides.size() == 2) {
      // jump triple: value in L2, the two frame derivatives in H^{1/2}
      const bool layer1 = (e.kind == EdgeKind::Layer1Interface);
      const geometry::EdgeSide& s0 = e.sides[0];
      const geometry::EdgeSide& s1 = e.sides[1];
      auto deg_of = [&](const geometry::EdgeSide& s) {
        return s.is_sector ? m.sectors[s.elem].degree : m.interiors[s.elem].degree;
      };
      const int de = layer1 ? deg_of(s1) : std::max(deg_of(s0), deg_of(s1));
      const auto& ts = basis::gll_rule(de + 1).nodes;
      const JumpQuantity q1 = sector_frame ? JumpQuantity::DNu : JumpQuantity::DX1;
      const JumpQuantity q2 = sector_frame ? JumpQuantity::DPhi : JumpQuantity::DX2;
      const TermKind kinds[3] = {TermKind::JumpValue, TermKind::JumpDeriv1, TermKind::JumpDeriv2};
      const JumpQuantity quants[3] = {JumpQuantity::Value, q1, q2};
      for (int which = 0; which < 3; ++which) {
        ResidualTerm t;
        t.kind = kinds[which];
        t.edge_id = e.id;
        t.weight = e.weight;
        if (layer1) {
          // layer-1 side is the constant h_k: value trace h_k, derivatives 0
          t.block_a = sys.layout.sector_block[s1.elem];
          t.Ba = -trace_matrix(m, e, 1, quants[which], ts);
          if (which == 0) {
            t.vslot = e.vertex_k;
            t.vcoef = VectorXd::Ones(de + 1);
          }
        } else {
          t.block_a = s0.is_sector ? sys.layout.sector_block[s0.elem]
                                   : sys.layout.interior_block[s0.elem];
          t.block_b = s1.is_sector ? sys.layout.sector_block[s1.elem]
                                   : sys.layout.interior_block[s1.elem];
          t.Ba = trace_matrix(m, e, 0, quants[which], ts);
          t.Bb = -trace_matrix(m, e, 1, quants[which], ts);
        }
        t.data = VectorXd::Zero(de + 1);
        t.G = (which == 0) ? fracnorm::edge_l2_gram(de, e.length) : h_half_full(de, e.length);
        finish_term(t, sys.constant);
        sys.terms.push_back(std::move(t));
      }
      continue;
    }

    const bool dirichlet = (e.kind == EdgeKind::BoundaryDirichlet);
    const bool neumann = (e.kind == EdgeKind::BoundaryNeumann);
    if (!dirichlet && !neumann) continue;

    if (sector_frame) {
      const geometry::EdgeSide& s0 = e.sides[0];
      const auto& sec = m.sectors[s0.elem];
      const int de = 2 * sec.degree;
      const auto& ts = basis::gll_rule(de + 1).nodes;
      const VectorXd& lhat = pd.edge_data[e.id];  // values on the same (de+1) grid
      const double hnu = 0.5 * (sec.nu_hi - sec.nu_lo);
      if (dirichlet) {
        const double ak = pd.a_vertex[e.vertex_k];
        ResidualTerm tv;
        tv.kind = TermKind::DirichletSectorValue;
        tv.edge_id = e.id;
        tv.weight = e.weight;
        tv.block_a = sys.layout.sector_block[s0.elem];
        tv.Ba = trace_matrix(m, e, 0, JumpQuantity::Value, ts);
        tv.vslot = e.vertex_k;
        tv.vcoef = -VectorXd::Ones(de + 1);
        tv.data = lhat.array() - ak;
        tv.G = fracnorm::edge_l2_gram(de, e.length);
        finish_term(tv, sys.constant);
        sys.terms.push_back(std::move(tv));

        ResidualTerm td;
        td.kind = TermKind::DirichletSectorDeriv;
        td.edge_id = e.id;
        td.weight = e.weight;
        td.block_a = sys.layout.sector_block[s0.elem];
        td.Ba = trace_matrix(m, e, 0, JumpQuantity::DNu, ts);
        td.data = (basis::diff_matrix(de + 1) * lhat) / hnu;
        td.G = h_half_full(de, e.length);
        finish_term(td, sys.constant);
        sys.terms.push_back(std::move(td));
      } else {
        ResidualTerm tn;
        tn.kind = TermKind::NeumannSector;
        tn.edge_id = e.id;
        tn.weight = e.weight;
        tn.block_a = sys.layout.sector_block[s0.elem];
        tn.Ba = conormal_matrix_sector(sys.sector_ops[s0.elem], s0.side, ts);
        tn.data = lhat;
        tn.G = h_half_full(de, e.length);
        finish_term(tn, sys.constant);
        sys.terms.push_back(std::move(tn));
      }
    } else {
      const geometry::EdgeSide& s0 = e.sides[0];
      const int de = 2 * m.interiors[s0.elem].degree;
      const auto& ts = basis::gll_rule(de + 1).nodes;
      const VectorXd& ohat = pd.edge_data[e.id];
      if (dirichlet) {
        ResidualTerm tv;
        tv.kind = TermKind::DirichletInteriorValue;
        tv.edge_id = e.id;
        tv.block_a = sys.layout.interior_block[s0.elem];
        tv.Ba = trace_matrix(m, e, 0, JumpQuantity::Value, ts);
        tv.data = ohat;
        tv.G = fracnorm::edge_l2_gram(de, e.length);
        finish_term(tv, sys.constant);
        sys.terms.push_back(std::move(tv));

        ResidualTerm td;
        td.kind = TermKind::DirichletInteriorDeriv;
        td.edge_id = e.id;
        td.block_a = sys.layout.interior_block[s0.elem];
        td.Ba = trace_matrix_interior(sys.interior_ops[s0.elem], m, s0.side, ts,
                                      ops::TraceKind::Tangential);
        td.data = (basis::diff_matrix(de + 1) * ohat) * (2.0 / e.length);
        td.G = h_half_full(de, e.length);
        finish_term(td, sys.constant);
        sys.terms.push_back(std::move(td));
      } else {
        ResidualTerm tn;
        tn.kind = TermKind::NeumannInterior;
        tn.edge_id = e.id;
        tn.block_a = sys.layout.interior_block[s0.elem];
        tn.Ba = trace_matrix_interior(sys.interior_ops[s0.elem], m, s0.side, ts,
                                      ops::TraceKind::Conormal);
        tn.data = ohat;
        tn.G = h_half_full(de, e.length);
        finish_term(tn, sys.constant);
        sys.terms.push_back(std::move(tn));
      }
    }
  }

  // Vertex Dirichlet penalties, one per Dirichlet edge endpoint.
  const int np = p.p();
  for (int eidx = 0; eidx < np; ++eidx) {
    if (p.edges[eidx].kind != probdef::BcKind::Dirichlet) continue;
    for (int k : {(eidx + np - 1) % np, eidx}) {
      ResidualTerm t;
      t.kind = TermKind::DirichletVertex;
      t.vslot = k;
      t.vcoef = VectorXd::Ones(1);
      t.data = VectorXd::Constant(1, pd.a_vertex[k]);
      t.G = MatrixXd::Identity(1, 1);
      finish_term(t, sys.constant);
      sys.terms.push_back(std::move(t));
    }
  }

  return sys;
}

Eigen::VectorXd apply_A(const NormalSystem& sys, const Eigen::VectorXd& U) {
  if (U.size() != sys.layout.total) throw std::invalid_argument("apply_A: size mismatch");
  VectorXd y = VectorXd::Zero(sys.layout.total);
  for (const auto& t : sys.terms) {
    const auto groups = term_blocks(sys, t);
    int nloc = 0;
    for (const auto& g : groups) nloc += g.second;
    VectorXd x(nloc);
    int at = 0;
    for (const auto& g : groups) {
      x.segment(at, g.second) = U.segment(g.first, g.second);
      at += g.second;
    }
    const VectorXd yl = t.Aloc * x;
    at = 0;
    for (const auto& g : groups) {
      y.segment(g.first, g.second) += yl.segment(at, g.second);
      at += g.second;
    }
  }
  return y;
}

Eigen::VectorXd rhs(const NormalSystem& sys) {
  VectorXd h = VectorXd::Zero(sys.layout.total);
  for (const auto& t : sys.terms) {
    const auto groups = term_blocks(sys, t);
    int at = 0;
    for (const auto& g : groups) {
      h.segment(g.first, g.second) += t.hloc.segment(at, g.second);
      at += g.second;
    }
  }
  return h;
}

double evaluate_functional(const NormalSystem& sys, const Eigen::VectorXd& U) {
  if (U.size() != sys.layout.total) throw std::invalid_argument("evaluate_functional: size mismatch");
  double F = 0.0;
  for (const auto& t : sys.terms) {
    VectorXd r = -t.data;
    int at = 0;
    if (t.block_a >= 0) {
      r += t.Ba * U.segment(sys.layout.block_offset[t.block_a], sys.layout.block_size[t.block_a]);
    }
    if (t.block_b >= 0) {
      r += t.Bb * U.segment(sys.layout.block_offset[t.block_b], sys.layout.block_size[t.block_b]);
    }
    if (t.vslot >= 0) r += t.vcoef * U(t.vslot);
    (void)at;
    if (t.Gdiag.size() > 0)
      F += t.weight * r.dot(t.Gdiag.asDiagonal() * r);
    else
      F += t.weight * r.dot(t.G * r);
  }
  return F;
}

void split_dofs(const NormalSystem& sys, const Eigen::VectorXd& U, Eigen::VectorXd& UI,
                Eigen::VectorXd& UB) {
  UB = U.head(sys.layout.p);
  UI = U.tail(sys.layout.total - sys.layout.p);
}

Eigen::VectorXd merge_dofs(const NormalSystem& sys, const Eigen::VectorXd& UI,
                           const Eigen::VectorXd& UB) {
  VectorXd U(sys.layout.total);
  U.head(sys.layout.p) = UB;
  U.tail(sys.layout.total - sys.layout.p) = UI;
  return U;
}

void audit_coverage(const NormalSystem& sys) {
  std::set<int> covered;
  for (const auto& t : sys.terms)
    if (t.edge_id >= 0) covered.insert(t.edge_id);
  for (const auto& e : sys.mesh->edges) {
    if (!e.finite_measure) {
      if (covered.count(e.id))
        throw std::runtime_error("audit: infinite-measure edge carries terms");
      continue;
    }
    if (!covered.count(e.id))
      throw std::runtime_error("audit: finite-measure edge " + std::to_string(e.id) +
                               " has no terms");
  }
}

}  // namespace polyspec::assembly
