#include "polyspec/harness.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace polyspec;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

// exact solution interpolated element-by-element onto the dof layout
VectorXd interpolant_dofs(const assembly::NormalSystem& sys,
                          const std::function<double(double, double)>& exact) {
  const auto& m = *sys.mesh;
  VectorXd U = VectorXd::Zero(sys.layout.total);
  for (int k = 0; k < sys.layout.p; ++k) {
    const Vector2d& A = sys.problem->vertices[k];
    U(k) = exact(A.x(), A.y());
  }
  for (size_t s = 0; s < m.sectors.size(); ++s) {
    const auto& e = m.sectors[s];
    if (e.j < 2) continue;
    const int d = e.degree;
    const auto& g = basis::gll_rule(d + 1);
    const int off = sys.layout.block_offset[sys.layout.sector_block[s]];
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b) {
        const double nu = e.nu_lo + 0.5 * (g.nodes[a] + 1) * (e.nu_hi - e.nu_lo);
        const double phi = e.phi_lo + 0.5 * (g.nodes[b] + 1) * (e.phi_hi - e.phi_lo);
        const Vector2d x = geometry::sector_map(m, e.k, nu, phi);
        U(off + a + b * (d + 1)) = exact(x.x(), x.y());
      }
  }
  for (size_t l = 0; l < m.interiors.size(); ++l) {
    const int d = m.interiors[l].degree;
    const auto& g = basis::gll_rule(d + 1);
    const int off = sys.layout.block_offset[sys.layout.interior_block[l]];
    for (int a = 0; a <= d; ++a)
      for (int b = 0; b <= d; ++b) {
        const Vector2d x = geometry::interior_map(m, static_cast<int>(l), g.nodes[a], g.nodes[b]);
        U(off + a + b * (d + 1)) = exact(x.x(), x.y());
      }
  }
  return U;
}

}  // namespace

TEST_CASE("builtin problems") {
  SUBCASE("names are registered") {
    auto names = harness::builtin_names();
    CHECK(names.size() == 3);
    for (const auto& n : names) CHECK_NOTHROW(harness::builtin_problem(n));
    CHECK_THROWS(harness::builtin_problem("no_such_problem"));
  }

  SUBCASE("singular corner solution is harmonic away from the corner") {
    auto p = harness::builtin_problem("lshape_singular");
    REQUIRE(p.exact.fn);
    const double h = 1e-4;
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ux(-0.9, 0.9), uy(-0.9, 0.9);
    int tested = 0;
    while (tested < 100) {
      const double x = ux(rng), y = uy(rng);
      if (!probdef::point_in_polygon(p.vertices, {x, y})) continue;
      if (std::hypot(x, y) < 0.05) continue;  // keep the FD stencil well-conditioned
      bool inside = true;
      for (double dx : {-2 * h, 2 * h})
        for (double dy : {-2 * h, 2 * h})
          inside = inside && probdef::point_in_polygon(p.vertices, {x + dx, y + dy});
      if (!inside) continue;
      const auto& u = p.exact.fn;
      const double lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / (h * h);
      CHECK(std::abs(lap) < 1e-5 / (h * h));
      CHECK(std::abs(lap) < 1e-2);  // much tighter in practice away from the corner
      ++tested;
    }
  }

  SUBCASE("boundary data expressions agree with the exact solutions") {
    for (const std::string name : {"lshape_singular", "square_smooth", "square_mixed_varcoef"}) {
      auto p = harness::builtin_problem(name);
      for (int i = 0; i < p.p(); ++i) {
        if (p.edges[i].kind != probdef::BcKind::Dirichlet) continue;
        const Vector2d a = p.vertices[(i + p.p() - 1) % p.p()];
        const Vector2d b = p.vertices[i];
        for (int s = 0; s <= 20; ++s) {
          const Vector2d x = a + (s / 20.0) * (b - a);
          CHECK(p.edges[i].data.eval(x.x(), x.y()) ==
                doctest::Approx(p.exact.fn(x.x(), x.y())).epsilon(1e-12));
        }
      }
    }
  }

  SUBCASE("square_smooth solution is exactly harmonic") {
    auto p = harness::builtin_problem("square_smooth");
    const double h = 1e-4;
    const auto& u = p.exact.fn;
    for (double x : {0.3, 0.62})
      for (double y : {0.41, 0.77}) {
        const double lap =
            (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4 * u(x, y)) / (h * h);
        CHECK(std::abs(lap) < 1e-6);
      }
  }

  SUBCASE("manufactured forcing and fluxes of the variable-coefficient problem") {
    auto p = harness::builtin_problem("square_mixed_varcoef");
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> U01(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
      const double x = U01(rng), y = U01(rng);
      // -d/dx(a11 u_x) - d/dy(a22 u_y) + u with u = cos(x) e^y, analytically
      const double f_ref = std::exp(y) * ((x / 2) * std::sin(x) +
                                          std::cos(x) * (1 + x * x / 4 - y * y / 4 - y / 2));
      CHECK(p.f.eval(x, y) == doctest::Approx(f_ref).epsilon(1e-10));
    }
    // Neumann data: top edge n=(0,1) carries a22 u_y, left edge n=(-1,0) carries -a11 u_x
    for (int t = 0; t <= 10; ++t) {
      const double s = t / 10.0;
      CHECK(p.edges[3].data.eval(s, 1.0) ==
            doctest::Approx((1 + 1.0 / 4) * std::cos(s) * std::exp(1.0)).epsilon(1e-12));
      CHECK(p.edges[0].data.eval(0.0, s) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("error measurement") {
  auto p = harness::builtin_problem("square_smooth");
  p.solver.W = 4;
  p.mesh.M = 4;
  probdef::finalize_problem(p);
  auto m = geometry::build_geometric_mesh(p);
  auto sys = assembly::build_functional(p, m);
  const int n = sys.layout.total;

  SUBCASE("zero against zero is zero") {
    auto err = harness::compute_error(sys, VectorXd::Zero(n), [](double, double) { return 0.0; });
    CHECK(err.broken == 0.0);
    CHECK(err.l2 == 0.0);
  }

  SUBCASE("broken L2 of the constant mismatch integrates the domain area") {
    // exact = 1, solution = 0: the l2 norm squared is the polygon area, and the
    // element tiling must reproduce it
    auto err = harness::compute_error(sys, VectorXd::Zero(n), [](double, double) { return 1.0; });
    CHECK(err.l2 == doctest::Approx(1.0).epsilon(1e-8));
  }

  SUBCASE("interpolant error decays with degree") {
    double prev = -1.0;
    for (int W : {3, 5}) {
      auto q = harness::builtin_problem("square_smooth");
      q.solver.W = W;
      q.mesh.M = W;
      probdef::finalize_problem(q);
      auto mq = geometry::build_geometric_mesh(q);
      auto sq = assembly::build_functional(q, mq);
      VectorXd U = interpolant_dofs(sq, q.exact.fn);
      auto err = harness::compute_error(sq, U, q.exact.fn);
      CHECK(err.broken > 0.0);
      CHECK(err.l2 < err.broken);
      if (prev > 0.0) CHECK(err.broken < 0.2 * prev);
      prev = err.broken;
    }
  }
}

TEST_CASE("vertex conforming correction") {
  auto p = harness::builtin_problem("square_smooth");
  p.solver.W = 3;
  p.mesh.M = 3;
  probdef::finalize_problem(p);
  auto m = geometry::build_geometric_mesh(p);
  auto sys = assembly::build_functional(p, m);
  const int n = sys.layout.total;

  SUBCASE("globally constant data needs no correction") {
    VectorXd U = VectorXd::Constant(n, 5.0);
    auto cs = harness::vertex_conforming_correction(sys, U);
    for (size_t s = 0; s < m.sectors.size(); ++s) {
      if (m.sectors[s].j < 2) continue;
      CHECK((cs.sector[s].v.array() - 5.0).abs().maxCoeff() < 1e-11);
    }
    for (const auto& t : cs.interior) CHECK((t.v.array() - 5.0).abs().maxCoeff() < 1e-11);
  }

  SUBCASE("a corner mismatch is averaged away, with bounded correction") {
    VectorXd U = VectorXd::Constant(n, 5.0);
    const double eps = 1e-3;
    const int l0 = 0;
    const int d = m.interiors[l0].degree;
    const int off = sys.layout.block_offset[sys.layout.interior_block[l0]];
    U(off + d) += eps;  // nodal corner (xi, eta) = (1, -1), master corner 1
    auto cs = harness::vertex_conforming_correction(sys, U);
    // corrected corner values of every element at that physical point agree
    const Vector2d xc = m.interiors[l0].corners[1];
    std::vector<double> vals;
    for (size_t l = 0; l < m.interiors.size(); ++l)
      for (int c = 0; c < 4; ++c)
        if ((m.interiors[l].corners[c] - xc).norm() < 1e-10) {
          const double xi = c == 1 || c == 2 ? 1.0 : -1.0;
          const double eta = c >= 2 ? 1.0 : -1.0;
          vals.push_back(basis::eval_nodal(cs.interior[l], xi, eta));
        }
    REQUIRE(vals.size() >= 2);
    for (size_t i = 1; i < vals.size(); ++i)
      CHECK(vals[i] == doctest::Approx(vals[0]).epsilon(1e-10));
    // the shared value is the cluster average and the correction stays O(eps)
    CHECK(std::abs(vals[0] - 5.0) <= eps);
    CHECK(std::abs(vals[0] - 5.0) > 0.0);
    double max_dev = 0.0;
    for (const auto& t : cs.interior) max_dev = std::max(max_dev, (t.v.array() - 5.0).abs().maxCoeff());
    CHECK(max_dev < 10 * eps);
  }

  SUBCASE("after solving, coincident corners share values") {
    auto pre = solver::build_preconditioner(sys);
    auto sol = solver::solve(sys, pre, 1e-10, 5000);
    REQUIRE(sol.converged);
    auto cs = harness::vertex_conforming_correction(sys, sol.U);
    // independent cluster walk over interior elements
    std::map<std::pair<long long, long long>, std::vector<double>> groups;
    for (size_t l = 0; l < m.interiors.size(); ++l)
      for (int c = 0; c < 4; ++c) {
        const Vector2d x = m.interiors[l].corners[c];
        const double xi = c == 1 || c == 2 ? 1.0 : -1.0;
        const double eta = c >= 2 ? 1.0 : -1.0;
        groups[{std::llround(x.x() * 1e8), std::llround(x.y() * 1e8)}].push_back(
            basis::eval_nodal(cs.interior[l], xi, eta));
      }
    int multi = 0;
    for (const auto& [key, vals] : groups) {
      if (vals.size() < 2) continue;
      ++multi;
      for (size_t i = 1; i < vals.size(); ++i)
        CHECK(vals[i] == doctest::Approx(vals[0]).epsilon(1e-9));
    }
    CHECK(multi > 0);
    // correction energy bounded by the corner mismatches of the raw solution
    harness::ErrorNorms raw = harness::compute_error(sys, sol.U, p.exact.fn);
    CHECK(raw.broken < 1.0);  // sanity on the configuration
  }
}

TEST_CASE("convergence sweep and outputs") {
  auto p = harness::builtin_problem("square_smooth");

  SUBCASE("errors decay across the sweep and the fit sees it") {
    auto sweep = harness::run_convergence(p, {2, 3, 4});
    REQUIRE(sweep.records.size() == 3);
    for (const auto& r : sweep.records) {
      CHECK(r.ok);
      CHECK(r.dofs > 0);
      CHECK(r.err_broken > 0.0);
      CHECK(r.seconds > 0.0);
    }
    CHECK(sweep.records[1].err_broken < sweep.records[0].err_broken);
    CHECK(sweep.records[2].err_broken < sweep.records[1].err_broken);
    CHECK(sweep.slope < 0.0);
    CHECK(sweep.r2 > 0.8);
    CHECK(sweep.records[1].functional < sweep.records[0].functional);
    CHECK(sweep.records[2].functional < sweep.records[1].functional);

    harness::write_convergence_csv(sweep.records, "harness_conv.csv");
    std::ifstream f("harness_conv.csv");
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line == "W,M,dofs,err_broken,err_l2,functional,iters_htilde,iters_back,kappa,seconds");
    int rows = 0;
    while (std::getline(f, line)) {
      CHECK(std::count(line.begin(), line.end(), ',') == 9);
      ++rows;
    }
    CHECK(rows == 3);
    std::remove("harness_conv.csv");
  }

  SUBCASE("empty record list writes only the header") {
    harness::write_convergence_csv({}, "harness_empty.csv");
    std::ifstream f("harness_empty.csv");
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(line.rfind("W,M,", 0) == 0);
    CHECK_FALSE(std::getline(f, line));
    std::remove("harness_empty.csv");
  }

  SUBCASE("solution round trip is bit exact") {
    p.solver.W = 2;
    p.mesh.M = 2;
    probdef::finalize_problem(p);
    auto m = geometry::build_geometric_mesh(p);
    auto sys = assembly::build_functional(p, m);
    std::mt19937 rng(21);
    std::normal_distribution<double> N(0.0, 1.0);
    VectorXd U(sys.layout.total);
    for (int i = 0; i < U.size(); ++i) U(i) = N(rng) * std::pow(10.0, i % 7 - 3);
    harness::write_solution_json(p, sys, U, "harness_sol.json");
    VectorXd back = harness::read_solution_json("harness_sol.json");
    REQUIRE(back.size() == U.size());
    for (int i = 0; i < U.size(); ++i) CHECK(back(i) == U(i));
    std::remove("harness_sol.json");
  }

  SUBCASE("mesh outlines are closed 16-sample polylines") {
    p.solver.W = 2;
    p.mesh.M = 2;
    probdef::finalize_problem(p);
    auto m = geometry::build_geometric_mesh(p);
    harness::write_mesh_json(m, "harness_mesh.json");
    std::ifstream f("harness_mesh.json");
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    CHECK(text.find("\"elements\"") != std::string::npos);
    CHECK(text.find("\"sector\"") != std::string::npos);
    CHECK(text.find("\"interior\"") != std::string::npos);
    std::remove("harness_mesh.json");
  }

  SUBCASE("problem hash is stable and sensitive") {
    auto a = harness::problem_hash(p);
    CHECK(a == harness::problem_hash(p));
    auto q = p;
    q.solver.W = p.solver.W + 1;
    CHECK(harness::problem_hash(q) != a);
  }
}
