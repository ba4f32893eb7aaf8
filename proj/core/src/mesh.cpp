#include "polyspec/mesh.hpp"

#include "polyspec/basis.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace polyspec::geometry {

using probdef::EllipticProblem;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Similarity {
  Eigen::Vector2d origin{0, 0};
  Eigen::Matrix2d rot = Eigen::Matrix2d::Identity();
  double scale = 1.0;
  Eigen::Vector2d operator()(const Eigen::Vector2d& p) const { return origin + scale * (rot * p); }
};

// Canonical interior-mesh template: unit blocks whose corners are either plain
// or chopped by the two chords of a quarter-circle wedge of radius rho_c.
struct Block {
  Eigen::Vector2d origin;  // block is origin + [0,1]^2
  std::array<bool, 4> chopped{};
};

void append_corner_quads(std::vector<std::array<Eigen::Vector2d, 4>>& quads, const Block& blk,
                         int corner, bool chopped, double rho, double s) {
  // Corner-local frame: corner at origin, block edges along +x and +y;
  // rotations keep orientation so quads stay CCW.
  auto place = [&](double u, double v) -> Eigen::Vector2d {
    switch (corner) {
      case 0: return blk.origin + Eigen::Vector2d(u, v);
      case 1: return blk.origin + Eigen::Vector2d(1.0 - v, u);
      case 2: return blk.origin + Eigen::Vector2d(1.0 - u, 1.0 - v);
      default: return blk.origin + Eigen::Vector2d(v, 1.0 - u);
    }
  };
  if (!chopped) {
    quads.push_back({place(0, 0), place(s, 0), place(s, s), place(0, s)});
    return;
  }
  const double r2 = rho / std::sqrt(2.0);
  quads.push_back({place(rho, 0), place(s, 0), place(s, s), place(r2, r2)});
  quads.push_back({place(r2, r2), place(s, s), place(0, s), place(0, rho)});
}

// Chop chords sit at the equal-area radius: a straight fan of two chords per
// quarter wedge at radius r*sqrt((pi/4)/sin(pi/4)) has exactly the area of the
// quarter disc of radius r, so sector wedges plus interior quads tile the
// polygon area identically.
double equal_area_radius(double r, double dphi) { return r * std::sqrt(dphi / std::sin(dphi)); }

std::vector<std::array<Eigen::Vector2d, 4>> block_template(const std::vector<Block>& blocks,
                                                           double rho_in) {
  const double rho_c = equal_area_radius(rho_in, kPi / 4);
  const double s = std::clamp(1.6 * rho_in, 0.3, 0.45);
  if (s <= rho_c)
    throw std::runtime_error("mesh template: rho too large for the builtin interior template");
  std::vector<std::array<Eigen::Vector2d, 4>> quads;
  for (const Block& b : blocks) {
    for (int c = 0; c < 4; ++c) append_corner_quads(quads, b, c, b.chopped[c], rho_c, s);
    const double t = 1.0 - s;
    const Eigen::Vector2d o = b.origin;
    auto at = [&](double u, double v) -> Eigen::Vector2d { return o + Eigen::Vector2d(u, v); };
    quads.push_back({at(s, 0), at(t, 0), at(t, s), at(s, s)});      // bottom
    quads.push_back({at(t, s), at(1, s), at(1, t), at(t, t)});      // right
    quads.push_back({at(s, t), at(t, t), at(t, 1), at(s, 1)});      // top
    quads.push_back({at(0, s), at(s, s), at(s, t), at(0, t)});      // left
    quads.push_back({at(s, s), at(t, s), at(t, t), at(s, t)});      // center
  }
  return quads;
}

bool near(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double tol) {
  return (a - b).norm() <= tol;
}

// Detects the unit-square and L-shape template domains up to similarity and
// returns canonical-frame blocks plus the canonical->physical transform.
bool detect_template(const EllipticProblem& p, Similarity& sim, std::vector<Block>& blocks) {
  const int n = p.p();
  if (n == 4) {
    const double L = (p.vertices[1] - p.vertices[0]).norm();
    for (int i = 0; i < 4; ++i) {
      if (std::abs((p.vertices[(i + 1) % 4] - p.vertices[i]).norm() - L) > 1e-9 * L) return false;
      if (std::abs(p.interior_angle(i) - kPi / 2) > 1e-9) return false;
    }
    sim.origin = p.vertices[0];
    sim.scale = L;
    const Eigen::Vector2d d = (p.vertices[1] - p.vertices[0]) / L;
    sim.rot << d.x(), -d.y(), d.y(), d.x();
    Block b;
    b.origin = Eigen::Vector2d(0, 0);
    b.chopped = {true, true, true, true};
    blocks = {b};
    return true;
  }
  if (n == 6) {
    int reentrant = -1;
    for (int i = 0; i < 6; ++i) {
      const double a = p.interior_angle(i);
      if (std::abs(a - 1.5 * kPi) < 1e-9) {
        if (reentrant >= 0) return false;
        reentrant = i;
      } else if (std::abs(a - 0.5 * kPi) > 1e-9) {
        return false;
      }
    }
    if (reentrant < 0) return false;
    const int r = reentrant;
    const double a = (p.vertices[(r + 1) % 6] - p.vertices[r]).norm();
    sim.origin = p.vertices[r];
    sim.scale = a;
    const Eigen::Vector2d d = (p.vertices[(r + 1) % 6] - p.vertices[r]) / a;
    sim.rot << d.x(), -d.y(), d.y(), d.x();
    const Eigen::Vector2d canon[6] = {{0, 0}, {1, 0}, {1, 1}, {-1, 1}, {-1, -1}, {0, -1}};
    for (int i = 0; i < 6; ++i)
      if (!near(sim(canon[i]), p.vertices[(r + i) % 6], 1e-9 * a)) return false;
    Block q3, q2, q1;
    q3.origin = Eigen::Vector2d(0, 0);
    q3.chopped = {true, true, true, false};
    q2.origin = Eigen::Vector2d(-1, 0);
    q2.chopped = {false, true, false, true};  // corners (-1,0),(0,0),(0,1),(-1,1)
    q1.origin = Eigen::Vector2d(-1, -1);
    q1.chopped = {true, true, true, false};  // corners (-1,-1),(0,-1),(0,0),(-1,0)
    blocks = {q3, q2, q1};
    return true;
  }
  return false;
}

struct PointKey {
  long long x, y;
  bool operator<(const PointKey& o) const { return x < o.x || (x == o.x && y < o.y); }
};

struct EdgeKey {
  PointKey a, b;
  bool operator<(const EdgeKey& o) const { return a < o.a || (!(o.a < a) && b < o.b); }
};

}  // namespace

double polygon_area(const std::vector<Eigen::Vector2d>& v) {
  double s = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

GeometricMesh build_geometric_mesh(const EllipticProblem& p) {
  GeometricMesh m;
  m.problem = &p;
  m.M = p.mesh.M;
  m.W = p.solver.W;
  const int np = p.p();
  const int M = m.M;
  const double rho = p.mesh.rho;
  if (2.0 * rho >= p.min_vertex_distance())
    throw std::runtime_error("mesh: rho too large (sector disks must be disjoint)");

  // Per-vertex sector data.
  m.corner.resize(np);
  for (int k = 0; k < np; ++k) {
    VertexSector& c = m.corner[k];
    c.omega = p.interior_angle(k);
    const Eigen::Vector2d d = p.vertices[(k + 1) % np] - p.vertices[k];
    c.theta0 = std::atan2(d.y(), d.x());
    c.I = std::max(1, static_cast<int>(std::ceil(c.omega / p.mesh.max_angle - 1e-12)));
    c.mu = p.mesh.mu[k];
    c.lambda = p.lambda(k);
    c.rho = rho;
    c.sigma.assign(M + 2, 0.0);
    for (int j = 2; j <= M + 1; ++j) c.sigma[j] = rho * std::pow(c.mu, M + 1 - j);
  }

  // Sector elements, lexicographic (k, i, j).
  m.sector_offset.resize(np);
  for (int k = 0; k < np; ++k) {
    m.sector_offset[k] = static_cast<int>(m.sectors.size());
    const VertexSector& c = m.corner[k];
    for (int i = 1; i <= c.I; ++i)
      for (int j = 1; j <= M; ++j) {
        SectorElement e;
        e.k = k;
        e.i = i;
        e.j = j;
        e.nu_lo = (j == 1) ? -std::numeric_limits<double>::infinity() : std::log(c.sigma[j]);
        e.nu_hi = std::log(c.sigma[j + 1]);
        e.phi_lo = c.omega * (i - 1) / c.I;
        e.phi_hi = c.omega * i / c.I;
        if (j == 1) {
          e.degree = 0;
        } else if (p.solver.variable_degree) {
          e.degree = std::max(2, std::min(m.W, static_cast<int>(std::ceil(double(m.W) * j / M))));
        } else {
          e.degree = m.W;
        }
        m.sectors.push_back(e);
      }
  }

  // Interior quadrilaterals: user-supplied or builtin template.
  std::vector<std::array<Eigen::Vector2d, 4>> quads = p.interior_quads;
  if (quads.empty()) {
    Similarity sim;
    std::vector<Block> blocks;
    if (!detect_template(p, sim, blocks))
      throw std::runtime_error(
          "mesh: no builtin interior template for this polygon; provide interior_quads");
    for (int k = 0; k < np; ++k) {
      const int quadrants = static_cast<int>(std::round(m.corner[k].omega / (kPi / 2)));
      if (m.corner[k].I != 2 * quadrants)
        throw std::runtime_error(
            "mesh: builtin templates need two angular cuts per quarter wedge "
            "(max_angle in [pi/4, pi/2)); provide interior_quads instead");
    }
    for (auto q : block_template(blocks, rho / sim.scale)) {
      for (auto& c : q) c = sim(c);
      quads.push_back(q);
    }
  }
  const double scale = p.min_vertex_distance();
  for (size_t l = 0; l < quads.size(); ++l) {
    InteriorElement e;
    e.l = static_cast<int>(l);
    e.corners = quads[l];
    e.degree = m.W;
    m.interiors.push_back(e);
  }
  for (int l = 0; l < static_cast<int>(m.interiors.size()); ++l)
    for (int a = 0; a <= 4; ++a)
      for (int b = 0; b <= 4; ++b)
        if (interior_metric(m, l, -1.0 + 0.5 * a, -1.0 + 0.5 * b).det <= 0)
          throw std::runtime_error("mesh: interior quad " + std::to_string(l) +
                                   " is degenerate or wrongly oriented");

  // Edge bookkeeping helpers.
  const double tol = 1e-8 * scale;
  auto key_of = [&](const Eigen::Vector2d& q) {
    return PointKey{static_cast<long long>(std::llround(q.x() / tol)),
                    static_cast<long long>(std::llround(q.y() / tol))};
  };
  auto edge_key = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    PointKey ka = key_of(a), kb = key_of(b);
    if (kb < ka) std::swap(ka, kb);
    return EdgeKey{ka, kb};
  };

  // Collect interior quad sides.
  struct QuadSide {
    int l, s;
    Eigen::Vector2d a, b;  // physical endpoints in the side's natural direction
  };
  std::map<EdgeKey, std::vector<QuadSide>> side_map;
  for (const InteriorElement& e : m.interiors)
    for (int s = 0; s < 4; ++s) {
      const Eigen::Vector2d a = e.corners[s];
      const Eigen::Vector2d b = e.corners[(s + 1) % 4];
      side_map[edge_key(a, b)].push_back({e.l, s, a, b});
    }

  auto locate_boundary_edge = [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) -> int {
    for (int eidx = 0; eidx < np; ++eidx) {
      const Eigen::Vector2d va = p.vertices[(eidx + np - 1) % np];
      const Eigen::Vector2d vb = p.vertices[eidx];
      const Eigen::Vector2d d = vb - va;
      const double len2 = d.squaredNorm();
      auto on_seg = [&](const Eigen::Vector2d& q) {
        const double t = (q - va).dot(d) / len2;
        if (t < -1e-10 || t > 1.0 + 1e-10) return false;
        return (q - (va + t * d)).norm() <= tol;
      };
      if (on_seg(a) && on_seg(b)) return eidx;
    }
    return -1;
  };

  auto add_edge = [&](MeshEdge e) {
    e.id = static_cast<int>(m.edges.size());
    m.edges.push_back(std::move(e));
  };

  auto bc_kind_of = [&](int bc_edge) {
    return p.edges[bc_edge].kind == probdef::BcKind::Dirichlet ? EdgeKind::BoundaryDirichlet
                                                              : EdgeKind::BoundaryNeumann;
  };

  // Sector-region edges.
  std::map<EdgeKey, bool> chord_used;
  for (int k = 0; k < np; ++k) {
    const VertexSector& c = m.corner[k];
    const double dphi = c.omega / c.I;
    // Radial lines i_line = 0..I, one edge per layer.
    for (int il = 0; il <= c.I; ++il)
      for (int j = 1; j <= M; ++j) {
        MeshEdge e;
        e.frame = EdgeFrame::SectorNuPhi;
        e.vertex_k = k;
        e.finite_measure = (j >= 2);
        e.dist = c.sigma[j];
        e.weight = (j >= 2) ? std::pow(e.dist, -2.0 * c.lambda) : 1.0;
        e.length = (j >= 2) ? std::log(c.sigma[j + 1] / c.sigma[j]) : 0.0;
        if (il == 0) {
          e.kind = bc_kind_of((k + 1) % np);
          e.bc_edge = (k + 1) % np;
          e.sides = {EdgeSide{true, m.sector_index(k, 1, j), 0, false}};
        } else if (il == c.I) {
          e.kind = bc_kind_of(k);
          e.bc_edge = k;
          e.sides = {EdgeSide{true, m.sector_index(k, c.I, j), 1, false}};
        } else {
          e.kind = EdgeKind::SectorInternal;
          e.sides = {EdgeSide{true, m.sector_index(k, il, j), 1, false},
                     EdgeSide{true, m.sector_index(k, il + 1, j), 0, false}};
        }
        add_edge(e);
      }
    // Arc lines between layers, and the outermost chord interface.
    for (int i = 1; i <= c.I; ++i) {
      for (int jl = 1; jl < M; ++jl) {
        MeshEdge e;
        e.frame = EdgeFrame::SectorNuPhi;
        e.vertex_k = k;
        e.kind = (jl == 1) ? EdgeKind::Layer1Interface : EdgeKind::SectorInternal;
        e.finite_measure = true;
        e.dist = c.sigma[jl + 1];
        e.weight = std::pow(e.dist, -2.0 * c.lambda);
        e.length = dphi;
        e.sides = {EdgeSide{true, m.sector_index(k, i, jl), 3, false},
                   EdgeSide{true, m.sector_index(k, i, jl + 1), 2, false}};
        add_edge(e);
      }
      // Chord endpoints of the outer arc piece.
      const double psi0 = dphi * (i - 1), psi1 = dphi * i;
      // Builtin templates place the chop chords at the equal-area radius;
      // user-supplied quads may use plain chords of the arc itself.
      auto chord_at = [&](double r) {
        const Eigen::Vector2d P0 =
            p.vertices[k] + r * Eigen::Vector2d(std::cos(c.theta0 + psi0), std::sin(c.theta0 + psi0));
        const Eigen::Vector2d P1 =
            p.vertices[k] + r * Eigen::Vector2d(std::cos(c.theta0 + psi1), std::sin(c.theta0 + psi1));
        return edge_key(P0, P1);
      };
      EdgeKey key = chord_at(equal_area_radius(rho, dphi));
      auto it = side_map.find(key);
      if (it == side_map.end()) {
        key = chord_at(rho);
        it = side_map.find(key);
      }
      if (it == side_map.end() || it->second.size() != 1)
        throw std::runtime_error("mesh: interior quads do not conform to a sector chord");
      const QuadSide& qs = it->second.front();
      chord_used[key] = true;
      MeshEdge e;
      e.frame = EdgeFrame::SectorNuPhi;
      e.vertex_k = k;
      e.kind = EdgeKind::SectorArcInterface;
      e.finite_measure = true;
      e.dist = rho;
      e.weight = std::pow(rho, -2.0 * c.lambda);
      e.length = dphi;
      const Eigen::Vector2d dir0(std::cos(c.theta0 + psi0), std::sin(c.theta0 + psi0));
      const bool rev = ((qs.a - p.vertices[k]).normalized() - dir0).norm() > 1e-6;
      e.sides = {EdgeSide{true, m.sector_index(k, i, M), 3, false},
                 EdgeSide{false, qs.l, qs.s, rev}};
      add_edge(e);
    }
  }

  // Interior-internal and interior boundary edges.
  for (const auto& [key, sides] : side_map) {
    if (chord_used.count(key)) continue;
    if (sides.size() == 2) {
      MeshEdge e;
      e.frame = EdgeFrame::InteriorPullback;
      e.kind = EdgeKind::InteriorInternal;
      e.finite_measure = true;
      e.length = (sides[0].b - sides[0].a).norm();
      e.sides = {EdgeSide{false, sides[0].l, sides[0].s, false},
                 EdgeSide{false, sides[1].l, sides[1].s, true}};
      add_edge(e);
    } else if (sides.size() == 1) {
      const int bc = locate_boundary_edge(sides[0].a, sides[0].b);
      if (bc < 0)
        throw std::runtime_error("mesh: interior quad side matches neither a neighbor, a sector chord, nor the boundary");
      MeshEdge e;
      e.frame = EdgeFrame::InteriorPullback;
      e.kind = bc_kind_of(bc);
      e.bc_edge = bc;
      e.finite_measure = true;
      e.length = (sides[0].b - sides[0].a).norm();
      e.sides = {EdgeSide{false, sides[0].l, sides[0].s, false}};
      add_edge(e);
    } else {
      throw std::runtime_error("mesh: non-conforming interior quads (side shared more than twice)");
    }
  }

  return m;
}

Eigen::Vector2d sector_map(const GeometricMesh& m, int k, double nu, double phi) {
  const VertexSector& c = m.corner[k];
  if (phi < -1e-12 || phi > c.omega + 1e-12)
    throw std::out_of_range("sector_map: phi outside [0, omega]");
  const double th = c.theta0 + phi;
  return m.problem->vertices[k] + std::exp(nu) * Eigen::Vector2d(std::cos(th), std::sin(th));
}

double sector_jacobian(const GeometricMesh& m, int k, double, double) {
  // Straight edges with the identity angular rescale: theta = theta0 + phi, so
  // the (nu,phi)->(tau,theta) map has unit Jacobian. The omega/psi-width ratio
  // is kept explicit so a non-identity rescale would land here.
  const VertexSector& c = m.corner[k];
  const double psi_width = c.omega;
  return c.omega / psi_width;
}

Eigen::Vector2d interior_map(const GeometricMesh& m, int l, double xi, double eta) {
  const auto& c = m.interiors[l].corners;
  const double n0 = (1 - xi) * (1 - eta) / 4, n1 = (1 + xi) * (1 - eta) / 4;
  const double n2 = (1 + xi) * (1 + eta) / 4, n3 = (1 - xi) * (1 + eta) / 4;
  return n0 * c[0] + n1 * c[1] + n2 * c[2] + n3 * c[3];
}

InteriorMetric interior_metric(const GeometricMesh& m, int l, double xi, double eta) {
  const auto& c = m.interiors[l].corners;
  const Eigen::Vector2d dxi =
      ((1 - eta) * (c[1] - c[0]) + (1 + eta) * (c[2] - c[3])) / 4.0;
  const Eigen::Vector2d deta =
      ((1 - xi) * (c[3] - c[0]) + (1 + xi) * (c[2] - c[1])) / 4.0;
  InteriorMetric g;
  g.det = dxi.x() * deta.y() - dxi.y() * deta.x();
  g.xi_x1 = deta.y() / g.det;
  g.xi_x2 = -deta.x() / g.det;
  g.eta_x1 = -dxi.y() / g.det;
  g.eta_x2 = dxi.x() / g.det;
  return g;
}

Eigen::Vector2d interior_map_inverse(const GeometricMesh& m, int l, const Eigen::Vector2d& x) {
  Eigen::Vector2d q(0, 0);
  const double scale = (m.interiors[l].corners[2] - m.interiors[l].corners[0]).norm();
  for (int it = 0; it < 50; ++it) {
    const Eigen::Vector2d r = interior_map(m, l, q.x(), q.y()) - x;
    if (r.norm() < 1e-14 * scale) return q;
    const auto& c = m.interiors[l].corners;
    Eigen::Matrix2d J;
    const Eigen::Vector2d dxi =
        ((1 - q.y()) * (c[1] - c[0]) + (1 + q.y()) * (c[2] - c[3])) / 4.0;
    const Eigen::Vector2d deta =
        ((1 - q.x()) * (c[3] - c[0]) + (1 + q.x()) * (c[2] - c[1])) / 4.0;
    J << dxi.x(), deta.x(), dxi.y(), deta.y();
    q -= J.inverse() * r;
  }
  const Eigen::Vector2d r = interior_map(m, l, q.x(), q.y()) - x;
  if (r.norm() < 1e-10 * scale) return q;
  throw std::runtime_error("interior_map_inverse: Newton iteration failed");
}

namespace {

// Master coordinates for parameter u running in the side's natural direction.
Eigen::Vector2d side_master(bool is_sector, int side, double u) {
  if (is_sector) {
    switch (side) {
      case 0: return {u, -1.0};
      case 1: return {u, 1.0};
      case 2: return {-1.0, u};
      default: return {1.0, u};
    }
  }
  switch (side) {
    case 0: return {u, -1.0};
    case 1: return {1.0, u};
    case 2: return {-u, 1.0};
    default: return {-1.0, -u};
  }
}

}  // namespace

Eigen::Vector2d edge_point_on_side(const GeometricMesh& m, const MeshEdge& e, int side_idx,
                                   double t) {
  const EdgeSide& s = e.sides[side_idx];
  const double u = s.reversed ? -t : t;
  if (e.kind == EdgeKind::SectorArcInterface && !s.is_sector) {
    // Physical point on the arc, pulled back through the quad's bilinear map.
    const Eigen::Vector2d x = edge_point_physical(m, e, t);
    return interior_map_inverse(m, s.elem, x);
  }
  return side_master(s.is_sector, s.side, u);
}

Eigen::Vector2d edge_point_physical(const GeometricMesh& m, const MeshEdge& e, double t) {
  const EdgeSide& s = e.sides[0];
  const Eigen::Vector2d q = side_master(s.is_sector, s.side, s.reversed ? -t : t);
  if (s.is_sector) {
    const SectorElement& el = m.sectors[s.elem];
    const double nu = 0.5 * (el.nu_lo + el.nu_hi) + 0.5 * (el.nu_hi - el.nu_lo) * q.x();
    const double phi = 0.5 * (el.phi_lo + el.phi_hi) + 0.5 * (el.phi_hi - el.phi_lo) * q.y();
    return sector_map(m, el.k, nu, phi);
  }
  return interior_map(m, s.elem, q.x(), q.y());
}

double distance_weight(const GeometricMesh&, const MeshEdge& e) { return e.weight; }

double sector_element_area(const GeometricMesh& m, int index) {
  const SectorElement& e = m.sectors[index];
  const VertexSector& c = m.corner[e.k];
  const double dphi = e.phi_hi - e.phi_lo;
  if (e.j == 1) return dphi * c.sigma[2] * c.sigma[2] / 2.0;
  const auto& rule = basis::gll_rule(8);
  double s = 0.0;
  const double hn = 0.5 * (e.nu_hi - e.nu_lo);
  const double mn = 0.5 * (e.nu_hi + e.nu_lo);
  for (int q = 0; q < rule.n; ++q)
    s += rule.weights[q] * std::exp(2.0 * (mn + hn * rule.nodes[q]));
  return s * hn * dphi;
}

double interior_element_area(const GeometricMesh& m, int index) {
  const auto& rule = basis::gll_rule(4);
  double s = 0.0;
  for (int a = 0; a < rule.n; ++a)
    for (int b = 0; b < rule.n; ++b)
      s += rule.weights[a] * rule.weights[b] *
           interior_metric(m, index, rule.nodes[a], rule.nodes[b]).det;
  return s;
}

}  // namespace polyspec::geometry
