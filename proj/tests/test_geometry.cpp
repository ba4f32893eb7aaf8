#include <doctest.h>

#include "polyspec/mesh.hpp"

#include <cmath>
#include <map>

using namespace polyspec;
using namespace polyspec::geometry;

namespace {

constexpr double kPi = 3.14159265358979323846;

probdef::EllipticProblem square_problem(double side, int M, double rho, double mu,
                                        const std::string& bc_pattern = "dddd") {
  probdef::EllipticProblem p;
  p.vertices = {{0, 0}, {side, 0}, {side, side}, {0, side}};
  for (int i = 0; i < 4; ++i) {
    probdef::EdgeBC bc;
    bc.kind = bc_pattern[i] == 'd' ? probdef::BcKind::Dirichlet : probdef::BcKind::Neumann;
    bc.data = probdef::parse_expression("0");
    p.edges.push_back(bc);
  }
  p.a11 = p.a22 = probdef::parse_expression("1");
  p.a12 = p.b1 = p.b2 = p.c = p.f = probdef::parse_expression("0");
  p.mesh.M = M;
  p.mesh.rho = rho;
  p.mesh.mu = {mu};
  probdef::finalize_problem(p);
  return p;
}

probdef::EllipticProblem lshape_problem(int M, double rho = 0.0) {
  probdef::EllipticProblem p;
  p.vertices = {{0, 0}, {1, 0}, {1, 1}, {-1, 1}, {-1, -1}, {0, -1}};
  for (int i = 0; i < 6; ++i) {
    probdef::EdgeBC bc;
    bc.kind = probdef::BcKind::Dirichlet;
    bc.data = probdef::parse_expression("0");
    p.edges.push_back(bc);
  }
  p.a11 = p.a22 = probdef::parse_expression("1");
  p.a12 = p.b1 = p.b2 = p.c = p.f = probdef::parse_expression("0");
  p.mesh.M = M;
  p.mesh.rho = rho;
  probdef::finalize_problem(p);
  return p;
}

double mesh_area(const GeometricMesh& m) {
  double a = 0.0;
  for (size_t i = 0; i < m.sectors.size(); ++i) a += sector_element_area(m, static_cast<int>(i));
  for (size_t i = 0; i < m.interiors.size(); ++i) a += interior_element_area(m, static_cast<int>(i));
  return a;
}

}  // namespace

TEST_CASE("layer radii follow the geometric sequence") {
  const auto p = square_problem(4.0, 3, 1.0, 0.5);
  const GeometricMesh m = build_geometric_mesh(p);
  for (int k = 0; k < 4; ++k) {
    const auto& s = m.corner[k].sigma;
    CHECK(s[1] == 0.0);
    CHECK(s[2] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(s[3] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s[4] == doctest::Approx(1.0).epsilon(1e-14));
    for (int j = 2; j <= 3; ++j) CHECK(std::abs(s[j + 1] / s[j] - 2.0) < 1e-14);
  }
}

TEST_CASE("angular subdivision counts") {
  const auto L = lshape_problem(2);
  const GeometricMesh m = build_geometric_mesh(L);
  CHECK(m.corner[0].I == 6);  // omega = 3 pi / 2, max_angle = pi / 4
  for (int k = 1; k < 6; ++k) CHECK(m.corner[k].I == 2);
  CHECK(m.corner[0].omega == doctest::Approx(1.5 * kPi));
}

TEST_CASE("mesh tiles the polygon") {
  SUBCASE("unit square, rho=0.25") {
    const auto p = square_problem(1.0, 3, 0.25, 0.5);
    const GeometricMesh m = build_geometric_mesh(p);
    CHECK(mesh_area(m) == doctest::Approx(1.0).epsilon(1e-10));
  }
  SUBCASE("L-shape") {
    const auto p = lshape_problem(3);
    const GeometricMesh m = build_geometric_mesh(p);
    CHECK(mesh_area(m) == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(polygon_area(p.vertices) == doctest::Approx(3.0));
  }
  SUBCASE("rotated and scaled square") {
    probdef::EllipticProblem p = square_problem(1.0, 2, 0.2, 0.4);
    const double c = std::cos(0.4), s = std::sin(0.4);
    for (auto& v : p.vertices) v = 2.5 * Eigen::Vector2d(c * v.x() - s * v.y(), s * v.x() + c * v.y());
    const GeometricMesh m = build_geometric_mesh(p);
    CHECK(mesh_area(m) == doctest::Approx(6.25).epsilon(1e-10));
  }
}

TEST_CASE("sector_map") {
  const auto p = square_problem(4.0, 2, 1.0, 0.5);
  const GeometricMesh m = build_geometric_mesh(p);
  // Vertex 0 at origin, outgoing edge along +x.
  const Eigen::Vector2d a = sector_map(m, 0, 0.0, kPi / 4);
  CHECK(a.x() == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-14));
  CHECK(a.y() == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-14));
  const Eigen::Vector2d b = sector_map(m, 0, std::log(0.5), 0.0);
  CHECK(b.x() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(b.y() == doctest::Approx(0.0));
  CHECK_THROWS(sector_map(m, 0, 0.0, kPi));  // outside [0, omega]

  SUBCASE("numeric inverse recovers (nu, phi)") {
    for (int k = 0; k < 4; ++k)
      for (int t = 0; t < 20; ++t) {
        const double nu = -2.0 + 0.08 * t, phi = m.corner[k].omega * (t + 0.5) / 20.0;
        const Eigen::Vector2d x = sector_map(m, k, nu, phi);
        const Eigen::Vector2d d = x - p.vertices[k];
        const double nu_rec = std::log(d.norm());
        double phi_rec = std::atan2(d.y(), d.x()) - m.corner[k].theta0;
        while (phi_rec < -1e-9) phi_rec += 2 * kPi;
        CHECK(std::abs(nu_rec - nu) < 1e-12);
        CHECK(std::abs(phi_rec - phi) < 1e-12);
      }
  }
}

TEST_CASE("sector_jacobian constant for straight edges") {
  const auto p = lshape_problem(2);
  const GeometricMesh m = build_geometric_mesh(p);
  double lo = 1e300, hi = -1e300;
  for (int t = 0; t < 100; ++t) {
    const double j = sector_jacobian(m, 0, -1.0 + 0.01 * t, m.corner[0].omega * t / 100.0);
    lo = std::min(lo, j);
    hi = std::max(hi, j);
  }
  CHECK(hi - lo < 1e-12);
  CHECK(lo == doctest::Approx(1.0));  // identity angular parametrization
}

TEST_CASE("interior_map and metric") {
  probdef::EllipticProblem p = square_problem(1.0, 2, 0.2, 0.5);
  GeometricMesh m = build_geometric_mesh(p);
  // Append a detached probe quad; maps are pure functions of the corner list.
  InteriorElement probe;
  probe.l = static_cast<int>(m.interiors.size());
  probe.corners = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), Eigen::Vector2d(1, 1),
                   Eigen::Vector2d(0, 1)};
  probe.degree = 2;
  m.interiors.push_back(probe);
  const int l = probe.l;

  const Eigen::Vector2d c = interior_map(m, l, 0.0, 0.0);
  CHECK(c.x() == doctest::Approx(0.5));
  CHECK(c.y() == doctest::Approx(0.5));
  const InteriorMetric g = interior_metric(m, l, 0.3, -0.2);
  CHECK(g.xi_x1 == doctest::Approx(2.0));
  CHECK(g.eta_x2 == doctest::Approx(2.0));
  CHECK(g.xi_x2 == doctest::Approx(0.0));
  CHECK(g.det == doctest::Approx(0.25));

  SUBCASE("skewed quad metric vs finite differences") {
    InteriorElement skew;
    skew.l = static_cast<int>(m.interiors.size());
    skew.corners = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1.2, 0.1), Eigen::Vector2d(1.4, 1.3),
                    Eigen::Vector2d(-0.2, 0.9)};
    skew.degree = 2;
    m.interiors.push_back(skew);
    const int ls = skew.l;
    const double h = 1e-6;
    for (double xi : {-0.7, 0.0, 0.55})
      for (double eta : {-0.3, 0.4}) {
        const Eigen::Vector2d dxi =
            (interior_map(m, ls, xi + h, eta) - interior_map(m, ls, xi - h, eta)) / (2 * h);
        const Eigen::Vector2d deta =
            (interior_map(m, ls, xi, eta + h) - interior_map(m, ls, xi, eta - h)) / (2 * h);
        const double det = dxi.x() * deta.y() - dxi.y() * deta.x();
        const InteriorMetric gm = interior_metric(m, ls, xi, eta);
        CHECK(std::abs(gm.det - det) < 1e-8);
        CHECK(std::abs(gm.xi_x1 - deta.y() / det) < 1e-8);
        CHECK(std::abs(gm.xi_x2 + deta.x() / det) < 1e-8);
        CHECK(std::abs(gm.eta_x1 + dxi.y() / det) < 1e-8);
        CHECK(std::abs(gm.eta_x2 - dxi.x() / det) < 1e-8);
      }
  }
}

TEST_CASE("edge adjacency and measures") {
  const auto p = lshape_problem(3);
  const GeometricMesh m = build_geometric_mesh(p);

  SUBCASE("every element side is matched exactly once") {
    std::map<std::pair<int, int>, int> seen;  // (sector elem, side) -> count
    std::map<std::pair<int, int>, int> seen_int;
    for (const MeshEdge& e : m.edges)
      for (const EdgeSide& s : e.sides)
        (s.is_sector ? seen : seen_int)[{s.elem, s.side}]++;
    for (size_t idx = 0; idx < m.sectors.size(); ++idx) {
      const SectorElement& el = m.sectors[idx];
      for (int side = 0; side < 4; ++side) {
        if (el.j == 1 && side == 2) {
          CHECK(seen.count({static_cast<int>(idx), side}) == 0);  // nu = -inf side
          continue;
        }
        CHECK(seen[{static_cast<int>(idx), side}] == 1);
      }
    }
    for (size_t idx = 0; idx < m.interiors.size(); ++idx)
      for (int side = 0; side < 4; ++side) CHECK(seen_int[{static_cast<int>(idx), side}] == 1);
  }

  SUBCASE("finite_measure false exactly for layer-1 radial sides") {
    for (const MeshEdge& e : m.edges) {
      bool is_layer1_radial = false;
      for (const EdgeSide& s : e.sides)
        if (s.is_sector && m.sectors[s.elem].j == 1 && (s.side == 0 || s.side == 1))
          is_layer1_radial = true;
      CHECK(e.finite_measure == !is_layer1_radial);
    }
  }

  SUBCASE("interior-internal edges have two opposed sides") {
    int n_int = 0;
    for (const MeshEdge& e : m.edges)
      if (e.kind == EdgeKind::InteriorInternal) {
        ++n_int;
        REQUIRE(e.sides.size() == 2);
        CHECK(!e.sides[0].reversed);
        CHECK(e.sides[1].reversed);
      }
    CHECK(n_int > 0);
  }
}

TEST_CASE("common edge parametrization is consistent") {
  const auto p = lshape_problem(3);
  const GeometricMesh m = build_geometric_mesh(p);

  auto physical_of_side = [&](const MeshEdge& e, int si, double t) -> Eigen::Vector2d {
    const EdgeSide& s = e.sides[si];
    const Eigen::Vector2d q = edge_point_on_side(m, e, si, t);
    if (s.is_sector) {
      const SectorElement& el = m.sectors[s.elem];
      const double nu = 0.5 * (el.nu_lo + el.nu_hi) + 0.5 * (el.nu_hi - el.nu_lo) * q.x();
      const double phi = 0.5 * (el.phi_lo + el.phi_hi) + 0.5 * (el.phi_hi - el.phi_lo) * q.y();
      return sector_map(m, el.k, nu, phi);
    }
    return interior_map(m, s.elem, q.x(), q.y());
  };

  int checked_sector = 0, checked_arc = 0, checked_interior = 0;
  for (const MeshEdge& e : m.edges) {
    if (e.sides.size() != 2 || !e.finite_measure) continue;
    if (e.kind == EdgeKind::Layer1Interface) continue;  // inner side has no finite map
    for (int q = 0; q < 20; ++q) {
      const double t = -1.0 + (2.0 * q + 1.0) / 20.0;
      const Eigen::Vector2d a = physical_of_side(e, 0, t);
      const Eigen::Vector2d b = physical_of_side(e, 1, t);
      if (e.kind == EdgeKind::SectorArcInterface)
        CHECK((a - b).norm() < 1e-10);
      else
        CHECK((a - b).norm() < 1e-12);
    }
    if (e.kind == EdgeKind::SectorInternal) ++checked_sector;
    if (e.kind == EdgeKind::SectorArcInterface) ++checked_arc;
    if (e.kind == EdgeKind::InteriorInternal) ++checked_interior;
  }
  CHECK(checked_sector > 0);
  CHECK(checked_arc > 0);
  CHECK(checked_interior > 0);
}

TEST_CASE("distance weights") {
  probdef::EllipticProblem p = square_problem(4.0, 3, 1.0, 0.5);
  p.beta = {0.5, 0.5, 0.5, 0.5};  // lambda = 0.5
  const GeometricMesh m = build_geometric_mesh(p);
  bool found23 = false, found_arc = false;
  for (const MeshEdge& e : m.edges) {
    if (e.kind == EdgeKind::SectorInternal && e.frame == EdgeFrame::SectorNuPhi &&
        e.sides[0].is_sector && e.sides[1].is_sector) {
      const SectorElement& a = m.sectors[e.sides[0].elem];
      const SectorElement& b = m.sectors[e.sides[1].elem];
      if (a.j == 2 && b.j == 3) {  // layer-2/layer-3 interface arc
        CHECK(e.dist == doctest::Approx(0.5));
        CHECK(distance_weight(m, e) == doctest::Approx(2.0));
        found23 = true;
      }
    }
    if (e.kind == EdgeKind::SectorArcInterface) {
      CHECK(e.dist == doctest::Approx(1.0));
      CHECK(distance_weight(m, e) == doctest::Approx(1.0));
      found_arc = true;
    }
  }
  CHECK(found23);
  CHECK(found_arc);

  // Angular (radial) edge within layer j sits at distance sigma_j.
  for (const MeshEdge& e : m.edges)
    if (e.kind == EdgeKind::SectorInternal && e.sides[0].is_sector &&
        m.sectors[e.sides[0].elem].j == m.sectors[e.sides[1].elem].j) {
      const SectorElement& a = m.sectors[e.sides[0].elem];
      if (a.j < 2) continue;
      // Oracle: minimize distance from the vertex over edge samples.
      double dmin = 1e300;
      for (int q = 0; q <= 50; ++q) {
        const double t = -1.0 + 0.04 * q;
        const Eigen::Vector2d x = edge_point_physical(m, e, t);
        dmin = std::min(dmin, (x - p.vertices[a.k]).norm());
      }
      CHECK(e.dist == doctest::Approx(dmin).epsilon(1e-10));
    }
}

TEST_CASE("boundary edges inherit the polygon bc") {
  const auto p = square_problem(1.0, 2, 0.2, 0.5, "dndn");
  const GeometricMesh m = build_geometric_mesh(p);
  int n_bd = 0, n_bn = 0;
  for (const MeshEdge& e : m.edges) {
    if (e.kind == EdgeKind::BoundaryDirichlet) {
      CHECK(p.edges[e.bc_edge].kind == probdef::BcKind::Dirichlet);
      ++n_bd;
    }
    if (e.kind == EdgeKind::BoundaryNeumann) {
      CHECK(p.edges[e.bc_edge].kind == probdef::BcKind::Neumann);
      ++n_bn;
    }
  }
  CHECK(n_bd > 0);
  CHECK(n_bn > 0);
}
