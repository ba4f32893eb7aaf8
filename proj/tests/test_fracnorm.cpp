#include "polyspec/fracnorm.hpp"

#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

using namespace polyspec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

double mono_int(int k) { return (k % 2 == 0) ? 2.0 / (k + 1) : 0.0; }  // int x^k over (-1,1)

VectorXd sample_1d(int d, const std::function<double(double)>& f) {
  const auto& r = basis::gll_rule(d + 1);
  VectorXd q(d + 1);
  for (int i = 0; i <= d; ++i) q(i) = f(r.nodes[i]);
  return q;
}

probdef::EllipticProblem laplace_square(int M, int W, double rho = 0.25) {
  probdef::EllipticProblem p;
  p.vertices = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int i = 0; i < 4; ++i) {
    probdef::EdgeBC bc;
    bc.kind = probdef::BcKind::Dirichlet;
    bc.data = probdef::parse_expression("0");
    p.edges.push_back(bc);
  }
  p.a11 = p.a22 = probdef::parse_expression("1");
  p.a12 = p.b1 = p.b2 = p.c = p.f = probdef::parse_expression("0");
  p.mesh.M = M;
  p.mesh.rho = rho;
  p.solver.W = W;
  probdef::finalize_problem(p);
  return p;
}

basis::NodalTensor sample_sector(const geometry::GeometricMesh& m, const geometry::SectorElement& e,
                                 const std::function<double(double, double)>& f_nuphi) {
  basis::NodalTensor t(e.degree);
  const auto& rule = basis::gll_rule(e.degree + 1);
  for (int a = 0; a <= e.degree; ++a)
    for (int b = 0; b <= e.degree; ++b) {
      const double nu = 0.5 * (e.nu_lo + e.nu_hi) + 0.5 * (e.nu_hi - e.nu_lo) * rule.nodes[a];
      const double phi = 0.5 * (e.phi_lo + e.phi_hi) + 0.5 * (e.phi_hi - e.phi_lo) * rule.nodes[b];
      t.v(a, b) = f_nuphi(nu, phi);
    }
  return t;
}

basis::NodalTensor sample_interior(const geometry::GeometricMesh& m,
                                   const geometry::InteriorElement& e,
                                   const std::function<double(double, double)>& f_xy) {
  basis::NodalTensor t(e.degree);
  const auto& rule = basis::gll_rule(e.degree + 1);
  for (int a = 0; a <= e.degree; ++a)
    for (int b = 0; b <= e.degree; ++b) {
      const Eigen::Vector2d x = geometry::interior_map(m, e.l, rule.nodes[a], rule.nodes[b]);
      t.v(a, b) = f_xy(x.x(), x.y());
    }
  return t;
}

}  // namespace

TEST_CASE("edge L2 gram") {
  SUBCASE("constants and linears on the reference interval") {
    MatrixXd G = fracnorm::edge_l2_gram(3, 2.0);
    VectorXd one = VectorXd::Ones(4);
    CHECK(one.dot(G * one) == doctest::Approx(2.0).epsilon(1e-14));
    VectorXd x = sample_1d(3, [](double t) { return t; });
    CHECK(x.dot(G * x) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("random degree-4 trace against the monomial oracle") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::array<double, 5> c;
      for (auto& v : c) v = U(rng);
      auto p = [&](double t) {
        double s = 0.0, tp = 1.0;
        for (double cv : c) {
          s += cv * tp;
          tp *= t;
        }
        return s;
      };
      double exact = 0.0;
      for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) exact += c[a] * c[b] * mono_int(a + b);
      VectorXd q = sample_1d(4, p);
      const double len = 1.7;
      MatrixXd G = fracnorm::edge_l2_gram(4, len);
      CHECK(q.dot(G * q) == doctest::Approx(0.5 * len * exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("half-norm gram") {
  SUBCASE("annihilates constants") {
    for (int d : {1, 3, 6}) {
      const MatrixXd& G = fracnorm::h_half_gram(d);
      CHECK((G * VectorXd::Ones(d + 1)).cwiseAbs().maxCoeff() < 1e-13);
      CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-13);
    }
  }

  SUBCASE("closed forms for x and x^2") {
    VectorXd x = sample_1d(4, [](double t) { return t; });
    VectorXd x2 = sample_1d(4, [](double t) { return t * t; });
    const MatrixXd& G = fracnorm::h_half_gram(4);
    CHECK(x.dot(G * x) == doctest::Approx(4.0).epsilon(1e-13));
    CHECK(x2.dot(G * x2) == doctest::Approx(8.0 / 3.0).epsilon(1e-13));
  }

  SUBCASE("monomial pairs up to degree 6 against the expansion oracle") {
    // (x^a - y^a)/(x - y) = sum_m x^m y^{a-1-m}; integrate the product.
    const int d = 6;
    const MatrixXd& G = fracnorm::h_half_gram(d);
    for (int a = 0; a <= 6; ++a)
      for (int b = 0; b <= 6; ++b) {
        double exact = 0.0;
        for (int mm = 0; mm < a; ++mm)
          for (int n = 0; n < b; ++n) exact += mono_int(mm + n) * mono_int(a + b - 2 - mm - n);
        VectorXd qa = sample_1d(d, [&](double t) { return std::pow(t, a); });
        VectorXd qb = sample_1d(d, [&](double t) { return std::pow(t, b); });
        CHECK(qa.dot(G * qb) == doctest::Approx(exact).epsilon(1e-12).scale(1.0));
      }
  }

  SUBCASE("positive semidefinite") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    const MatrixXd& G = fracnorm::h_half_gram(5);
    for (int trial = 0; trial < 100; ++trial) {
      VectorXd q(6);
      for (int i = 0; i < 6; ++i) q(i) = U(rng);
      CHECK(q.dot(G * q) >= -1e-12);
    }
  }

  SUBCASE("affine scale invariance") {
    // Direct Slobodeckij integral on (0.3, 1.1) equals the reference Gram
    // value: the seminorm is invariant under affine reparametrization.
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::array<double, 5> c;
    for (auto& v : c) v = U(rng);
    auto vref = [&](double t) {
      double s = 0.0, tp = 1.0;
      for (double cv : c) {
        s += cv * tp;
        tp *= t;
      }
      return s;
    };
    const double a = 0.3, b = 1.1;
    auto vphys = [&](double x) { return vref(-1.0 + 2.0 * (x - a) / (b - a)); };
    // two different-size Gauss-Lobatto rules so x != y at every node pair
    const auto &r1 = basis::gll_rule(40), &r2 = basis::gll_rule(41);
    double direct = 0.0;
    for (int i = 0; i < r1.n; ++i)
      for (int j = 0; j < r2.n; ++j) {
        const double x = a + 0.5 * (r1.nodes[i] + 1.0) * (b - a);
        const double y = a + 0.5 * (r2.nodes[j] + 1.0) * (b - a);
        double quot;
        if (std::abs(x - y) < 1e-12) {
          // both rules contain the interval endpoints; difference quotient
          // degenerates to the derivative there
          double s = 0.0, tp = 1.0;
          const double t = -1.0 + 2.0 * (x - a) / (b - a);
          for (int kk = 1; kk < 5; ++kk) {
            tp = std::pow(t, kk - 1);
            s += kk * c[kk] * tp;
          }
          quot = s * 2.0 / (b - a);
        } else {
          quot = (vphys(x) - vphys(y)) / (x - y);
        }
        direct += r1.weights[i] * r2.weights[j] * 0.25 * (b - a) * (b - a) * quot * quot;
      }
    VectorXd q = sample_1d(4, vref);
    CHECK(q.dot(fracnorm::h_half_gram(4) * q) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("jump vectors") {
  auto p = laplace_square(3, 6);
  auto m = geometry::build_geometric_mesh(p);

  SUBCASE("same-frame sector radial edge") {
    const geometry::MeshEdge* edge = nullptr;
    for (const auto& e : m.edges)
      if (e.kind == geometry::EdgeKind::SectorInternal && e.sides[0].side == 1 &&
          m.sectors[e.sides[0].elem].j >= 2) {
        edge = &e;
        break;
      }
    REQUIRE(edge != nullptr);
    auto f = [](double nu, double phi) { return nu * nu + phi - 0.5 * nu * phi; };
    auto uL = sample_sector(m, m.sectors[edge->sides[0].elem], f);
    auto uR = sample_sector(m, m.sectors[edge->sides[1].elem], f);
    const int d = m.sectors[edge->sides[0].elem].degree;
    for (auto q : {fracnorm::JumpQuantity::Value, fracnorm::JumpQuantity::DNu,
                   fracnorm::JumpQuantity::DPhi})
      CHECK(fracnorm::jump_vector(m, *edge, uL, uR, q, d).cwiseAbs().maxCoeff() < 1e-12);
    // shifting one side by a constant gives a constant value jump
    basis::NodalTensor uL1 = uL;
    uL1.v.array() += 1.0;
    VectorXd jv = fracnorm::jump_vector(m, *edge, uL1, uR, fracnorm::JumpQuantity::Value, d);
    CHECK((jv.array() - 1.0).abs().maxCoeff() < 1e-12);
    CHECK(fracnorm::jump_vector(m, *edge, uL1, uR, fracnorm::JumpQuantity::DNu, d)
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  SUBCASE("interior-internal edge between rectangle cells") {
    const geometry::MeshEdge* edge = nullptr;
    for (const auto& e : m.edges) {
      if (e.kind != geometry::EdgeKind::InteriorInternal) continue;
      const Eigen::Vector2d p0 = geometry::edge_point_physical(m, e, -1.0);
      const Eigen::Vector2d p1 = geometry::edge_point_physical(m, e, 1.0);
      auto is = [](const Eigen::Vector2d& v, double x, double y) {
        return (v - Eigen::Vector2d(x, y)).norm() < 1e-9;
      };
      if ((is(p0, 0.4, 0.4) && is(p1, 0.6, 0.4)) || (is(p0, 0.6, 0.4) && is(p1, 0.4, 0.4))) {
        edge = &e;
        break;
      }
    }
    REQUIRE(edge != nullptr);
    auto g = [](double x, double y) { return x * x + x * y - y; };
    auto uL = sample_interior(m, m.interiors[edge->sides[0].elem], g);
    auto uR = sample_interior(m, m.interiors[edge->sides[1].elem], g);
    const int d = m.interiors[edge->sides[0].elem].degree;
    for (auto q : {fracnorm::JumpQuantity::Value, fracnorm::JumpQuantity::DX1,
                   fracnorm::JumpQuantity::DX2})
      CHECK(fracnorm::jump_vector(m, *edge, uL, uR, q, d).cwiseAbs().maxCoeff() < 1e-11);
  }

  SUBCASE("arc interface jump of a global quadratic shrinks with degree") {
    double prev = -1.0;
    for (int W : {4, 8}) {
      auto pw = laplace_square(3, W);
      auto mw = geometry::build_geometric_mesh(pw);
      const geometry::MeshEdge* edge = nullptr;
      for (const auto& e : mw.edges)
        if (e.kind == geometry::EdgeKind::SectorArcInterface) {
          edge = &e;
          break;
        }
      REQUIRE(edge != nullptr);
      auto g = [](double x, double y) { return x * x - y + 0.5 * x * y; };
      const auto& sec = mw.sectors[edge->sides[0].elem];
      auto uL = sample_sector(mw, sec, [&](double nu, double phi) {
        const Eigen::Vector2d x = geometry::sector_map(mw, sec.k, nu, phi);
        return g(x.x(), x.y());
      });
      auto uR = sample_interior(mw, mw.interiors[edge->sides[1].elem], g);
      // sample above the element degree: at exactly degree W the edge nodes
      // coincide with grid nodes where both traces are exact, hiding the jump
      VectorXd jv =
          fracnorm::jump_vector(mw, *edge, uL, uR, fracnorm::JumpQuantity::Value, mw.W + 7);
      const double jnorm = jv.cwiseAbs().maxCoeff();
      CHECK(jnorm < 1e-3);
      if (prev >= 0.0) CHECK(jnorm < 0.25 * prev);
      prev = jnorm;
    }
  }
}
