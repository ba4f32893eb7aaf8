#include "polyspec/problem.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace polyspec::probdef {

using nlohmann::json;

double EllipticProblem::interior_angle(int k) const {
  const int n = p();
  const Eigen::Vector2d out = vertices[(k + 1) % n] - vertices[k];
  const Eigen::Vector2d back = vertices[(k + n - 1) % n] - vertices[k];
  double a = std::atan2(back.y(), back.x()) - std::atan2(out.y(), out.x());
  const double two_pi = 2.0 * std::acos(-1.0);
  while (a <= 0) a += two_pi;
  while (a > two_pi) a -= two_pi;
  return a;
}

double EllipticProblem::min_vertex_distance() const {
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p(); ++i)
    for (int j = i + 1; j < p(); ++j) d = std::min(d, (vertices[i] - vertices[j]).norm());
  return d;
}

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& reason) {
  throw std::runtime_error("problem file: field '" + field + "': " + reason);
}

Expression expr_field(const json& j, const std::string& field, const char* dflt = nullptr) {
  std::string src;
  if (j.contains(field)) {
    if (!j.at(field).is_string()) fail(field, "expected an expression string");
    src = j.at(field).get<std::string>();
  } else if (dflt) {
    src = dflt;
  } else {
    fail(field, "missing");
  }
  try {
    return parse_expression(src);
  } catch (const ParseError& e) {
    fail(field, e.what());
  }
}

bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
  };
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0));
}

double polygon_area(const std::vector<Eigen::Vector2d>& v) {
  double s = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    s += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * s;
}

}  // namespace

bool point_in_polygon(const std::vector<Eigen::Vector2d>& poly, const Eigen::Vector2d& q) {
  bool in = false;
  const size_t n = poly.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const auto& a = poly[i];
    const auto& b = poly[j];
    if ((a.y() > q.y()) != (b.y() > q.y()) &&
        q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
      in = !in;
  }
  return in;
}

void finalize_problem(EllipticProblem& prob) {
  const int p = prob.p();
  if (p < 3) fail("vertices", "need at least 3 vertices");
  if (static_cast<int>(prob.edges.size()) != p) fail("edges", "edge count mismatch");
  if (polygon_area(prob.vertices) <= 0) fail("vertices", "polygon must be counter-clockwise");
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) {
      if (j == i + 1 || (i == 0 && j == p - 1)) continue;  // adjacent edges share a vertex
      const auto& a = prob.vertices[i];
      const auto& b = prob.vertices[(i + 1) % p];
      const auto& c = prob.vertices[j];
      const auto& d = prob.vertices[(j + 1) % p];
      if (segments_intersect(a, b, c, d)) fail("vertices", "polygon is not simple");
    }

  if (prob.mesh.M < 2) fail("mesh.M", "need M >= 2");
  if (prob.solver.W == 0) prob.solver.W = prob.mesh.M;
  if (prob.solver.W < 2) fail("solver.W", "need W >= 2");
  const double min_dist = prob.min_vertex_distance();
  if (prob.mesh.rho == 0.0) prob.mesh.rho = 0.25 * min_dist;
  if (prob.mesh.rho <= 0.0) fail("mesh.rho", "must be positive");
  if (2.0 * prob.mesh.rho >= min_dist) fail("mesh.rho", "sector disks must be disjoint (2*rho < min vertex distance)");
  if (prob.mesh.mu.empty()) prob.mesh.mu.assign(p, 0.25);
  if (prob.mesh.mu.size() == 1) prob.mesh.mu.assign(p, prob.mesh.mu[0]);
  if (static_cast<int>(prob.mesh.mu.size()) != p) fail("mesh.mu", "length must be 1 or the vertex count");
  for (double m : prob.mesh.mu)
    if (!(m > 0.0 && m < 1.0)) fail("mesh.mu", "ratios must lie in (0,1)");
  const double pi = std::acos(-1.0);
  if (prob.mesh.max_angle == 0.0) prob.mesh.max_angle = pi / 4.0;
  if (prob.mesh.max_angle <= 0.0) fail("mesh.max_angle", "must be positive");

  if (prob.beta.empty()) {
    prob.beta.resize(p);
    for (int k = 0; k < p; ++k) {
      // Keep the weight exponent small: the innermost-layer truncation floor
      // scales like sigma_2^{2(1-lambda)}. At a reentrant corner lambda must
      // also stay below the leading singularity exponent pi/omega, which 0.2
      // satisfies for every omega < 2 pi.
      const double lam = prob.interior_angle(k) <= pi ? 0.05 : 0.2;
      prob.beta[k] = 1.0 - lam;
    }
  }
  if (static_cast<int>(prob.beta.size()) != p) fail("beta", "length must equal the vertex count");
  for (double b : prob.beta)
    if (!(b > 0.0 && b < 1.0)) fail("beta", "exponents must lie in (0,1)");

  if (prob.exact.kind == ExactSolution::Kind::Expr) {
    const Expression e = prob.exact.expr;
    prob.exact.fn = [e](double x, double y) { return e.eval(x, y); };
  }
}

EllipticProblem load_problem_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("problem file: invalid JSON: ") + e.what());
  }

  EllipticProblem prob;
  if (!j.contains("vertices") || !j.at("vertices").is_array()) fail("vertices", "missing array");
  for (const auto& v : j.at("vertices")) {
    if (!v.is_array() || v.size() != 2) fail("vertices", "entries must be [x, y]");
    prob.vertices.emplace_back(v[0].get<double>(), v[1].get<double>());
  }
  if (!j.contains("edges") || !j.at("edges").is_array()) fail("edges", "missing array");
  for (const auto& e : j.at("edges")) {
    EdgeBC bc;
    const std::string kind = e.value("bc", "");
    if (kind == "dirichlet")
      bc.kind = BcKind::Dirichlet;
    else if (kind == "neumann")
      bc.kind = BcKind::Neumann;
    else
      fail("edges.bc", "must be 'dirichlet' or 'neumann'");
    bc.data = expr_field(e, "g", "0");
    prob.edges.push_back(bc);
  }

  const json coeffs = j.value("coeffs", json::object());
  prob.a11 = expr_field(coeffs, "a11", "1");
  prob.a12 = expr_field(coeffs, "a12", "0");
  prob.a22 = expr_field(coeffs, "a22", "1");
  prob.b1 = expr_field(coeffs, "b1", "0");
  prob.b2 = expr_field(coeffs, "b2", "0");
  prob.c = expr_field(coeffs, "c", "0");
  prob.f = expr_field(j, "f", "0");

  if (j.contains("exact")) {
    const json& ex = j.at("exact");
    if (ex.contains("expr")) {
      prob.exact.kind = ExactSolution::Kind::Expr;
      prob.exact.expr = expr_field(ex, "expr");
    } else if (ex.contains("builtin")) {
      prob.exact.kind = ExactSolution::Kind::Builtin;
      prob.exact.builtin = ex.at("builtin").get<std::string>();
    } else {
      fail("exact", "expected 'expr' or 'builtin'");
    }
  }

  const json mesh = j.value("mesh", json::object());
  prob.mesh.M = mesh.value("M", 2);
  prob.mesh.rho = mesh.value("rho", 0.0);
  if (mesh.contains("mu")) {
    if (mesh.at("mu").is_array())
      prob.mesh.mu = mesh.at("mu").get<std::vector<double>>();
    else
      prob.mesh.mu = {mesh.at("mu").get<double>()};
  }
  prob.mesh.max_angle = mesh.value("max_angle", 0.0);

  const json solver = j.value("solver", json::object());
  prob.solver.W = solver.value("W", 0);
  prob.solver.tol = solver.value("tol", 1e-10);
  prob.solver.maxit = solver.value("maxit", 5000);
  prob.solver.variable_degree = solver.value("variable_degree", false);

  if (j.contains("beta")) prob.beta = j.at("beta").get<std::vector<double>>();

  if (j.contains("interior_quads")) {
    for (const auto& q : j.at("interior_quads")) {
      if (!q.is_array() || q.size() != 4) fail("interior_quads", "each quad needs 4 corners");
      std::array<Eigen::Vector2d, 4> quad;
      for (int i = 0; i < 4; ++i) quad[i] = Eigen::Vector2d(q[i][0].get<double>(), q[i][1].get<double>());
      prob.interior_quads.push_back(quad);
    }
  }

  finalize_problem(prob);
  return prob;
}

EllipticProblem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("problem file: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_problem_text(ss.str());
}

double validate_ellipticity(const EllipticProblem& p, int n_samples) {
  if (n_samples < 1) throw std::invalid_argument("validate_ellipticity: need n_samples >= 1");
  Eigen::Vector2d lo = p.vertices[0], hi = p.vertices[0];
  for (const auto& v : p.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  double min_eig = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i)
    for (int j = 0; j < n_samples; ++j) {
      const double t = (i + 0.5) / n_samples, s = (j + 0.5) / n_samples;
      const Eigen::Vector2d q(lo.x() + t * (hi.x() - lo.x()), lo.y() + s * (hi.y() - lo.y()));
      if (!point_in_polygon(p.vertices, q)) continue;
      const double a = p.a11.eval(q.x(), q.y());
      const double b = p.a12.eval(q.x(), q.y());
      const double d = p.a22.eval(q.x(), q.y());
      // Smaller eigenvalue of [[a,b],[b,d]].
      const double eig = 0.5 * (a + d) - std::sqrt(0.25 * (a - d) * (a - d) + b * b);
      min_eig = std::min(min_eig, eig);
    }
  if (!(min_eig > 0.0))
    throw std::runtime_error("coefficient matrix is not uniformly positive definite (min eigenvalue " +
                             std::to_string(min_eig) + ")");
  return min_eig;
}

}  // namespace polyspec::probdef
