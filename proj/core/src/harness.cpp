#include "polyspec/harness.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace polyspec::harness {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

const double kPi = std::acos(-1.0);

probdef::EllipticProblem base_laplace(std::vector<Vector2d> verts) {
  probdef::EllipticProblem p;
  p.vertices = std::move(verts);
  p.a11 = p.a22 = probdef::parse_expression("1");
  p.a12 = p.b1 = p.b2 = p.c = probdef::parse_expression("0");
  p.f = probdef::parse_expression("0");
  return p;
}

void add_edges(probdef::EllipticProblem& p, const std::vector<std::string>& data,
               const std::vector<probdef::BcKind>& kinds) {
  for (size_t i = 0; i < data.size(); ++i) {
    probdef::EdgeBC bc;
    bc.kind = kinds[i];
    bc.data = probdef::parse_expression(data[i]);
    p.edges.push_back(bc);
  }
}

double lshape_exact(double x, double y) {
  const double r2 = x * x + y * y;
  if (r2 == 0.0) return 0.0;
  double th = std::atan2(y, x);
  if (th < 0.0) th += 2.0 * kPi;  // reentrant corner: angle in [0, 3 pi / 2]
  return std::pow(r2, 1.0 / 3.0) * std::sin(2.0 * th / 3.0);
}

double square_smooth_exact(double x, double y) {
  return std::sin(kPi * x) * std::sinh(kPi * y) / std::sinh(kPi);
}

double varcoef_exact(double x, double y) { return std::cos(x) * std::exp(y); }

std::function<double(double, double)> exact_fn_for(const std::string& name) {
  if (name == "lshape_singular") return lshape_exact;
  if (name == "square_smooth") return square_smooth_exact;
  if (name == "square_mixed_varcoef") return varcoef_exact;
  throw std::runtime_error("unknown builtin problem: " + name);
}

// Nodal tensor of one element block of the dof vector.
basis::NodalTensor block_tensor(const assembly::NormalSystem& sys, const VectorXd& U, int block,
                                int degree) {
  basis::NodalTensor t(degree);
  const int n = degree + 1;
  t.v = Eigen::Map<const MatrixXd>(U.data() + sys.layout.block_offset[block], n, n);
  return t;
}

// Squared H^2 norm of the interpolant of the sampled difference; sx, sy scale
// the master derivatives to frame derivatives, area_scale maps the master
// area element to the frame one.
double h2_norm_sq(const MatrixXd& diff, const basis::GllRule& q, double sx, double sy,
                  double area_scale) {
  const MatrixXd& D = basis::diff_matrix(q.n);
  const MatrixXd e10 = sx * (D * diff);
  const MatrixXd e01 = sy * (diff * D.transpose());
  const MatrixXd e20 = sx * (D * e10);
  const MatrixXd e11 = sy * (e10 * D.transpose());
  const MatrixXd e02 = sy * (e01 * D.transpose());
  double s = 0.0;
  for (int a = 0; a < q.n; ++a)
    for (int b = 0; b < q.n; ++b) {
      const double w = q.weights[a] * q.weights[b];
      s += w * (diff(a, b) * diff(a, b) + e10(a, b) * e10(a, b) + e01(a, b) * e01(a, b) +
                e20(a, b) * e20(a, b) + e11(a, b) * e11(a, b) + e02(a, b) * e02(a, b));
    }
  return s * area_scale;
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> builtin_names() {
  return {"lshape_singular", "square_smooth", "square_mixed_varcoef"};
}

probdef::EllipticProblem builtin_problem(const std::string& name) {
  using probdef::BcKind;
  probdef::EllipticProblem p;
  if (name == "lshape_singular") {
    p = base_laplace({{0, 0}, {1, 0}, {1, 1}, {-1, 1}, {-1, -1}, {0, -1}});
    // u = r^(2/3) sin(2 theta / 3) about the reentrant corner at the origin;
    // the trace vanishes on the two edges meeting there. The left and bottom
    // edges need the shifted atan2 branch (theta in [0, 3 pi / 2]).
    const std::string right = "pow(x*x+y*y,1/3)*sin((2/3)*atan2(y,x))";
    const std::string left = "pow(x*x+y*y,1/3)*sin((2/3)*(pi+atan2(0-y,0-x)))";
    add_edges(p, {"0", "0", right, right, left, left},
              std::vector<BcKind>(6, BcKind::Dirichlet));
    // Small weight exponents keep the innermost-layer truncation error
    // decaying fast; the reentrant corner needs lambda below alpha = 2/3.
    p.beta.assign(6, 0.95);
    p.beta[0] = 0.8;
    p.mesh.mu.assign(6, 0.25);
  } else if (name == "square_smooth") {
    p = base_laplace({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const std::string u = "sin(pi*x)*(exp(pi*y)-exp(0-pi*y))/(exp(pi)-exp(0-pi))";
    add_edges(p, {u, u, u, u}, std::vector<BcKind>(4, BcKind::Dirichlet));
    p.beta.assign(4, 0.95);
    p.mesh.mu.assign(4, 0.2);
  } else if (name == "square_mixed_varcoef") {
    p = base_laplace({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    p.a11 = probdef::parse_expression("1+x*x/4");
    p.a22 = probdef::parse_expression("1+y*y/4");
    p.c = probdef::parse_expression("1");
    // manufactured from u = cos(x) e^y
    p.f = probdef::parse_expression(
        "exp(y)*((x/2)*sin(x)+cos(x)*(1+x*x/4-y*y/4-y/2))");
    const std::string u = "cos(x)*exp(y)";
    const std::string neumann_top = "(1+y*y/4)*cos(x)*exp(y)";     // n = (0, 1)
    const std::string neumann_left = "(1+x*x/4)*sin(x)*exp(y)";    // n = (-1, 0)
    add_edges(p, {neumann_left, u, u, neumann_top},
              {BcKind::Neumann, BcKind::Dirichlet, BcKind::Dirichlet, BcKind::Neumann});
    p.beta.assign(4, 0.95);
    p.mesh.mu.assign(4, 0.2);
  } else {
    throw std::runtime_error("unknown builtin problem: " + name);
  }
  p.exact.kind = probdef::ExactSolution::Kind::Builtin;
  p.exact.builtin = name;
  p.exact.fn = exact_fn_for(name);
  probdef::finalize_problem(p);
  return p;
}

void resolve_exact(probdef::EllipticProblem& p) {
  if (p.exact.kind == probdef::ExactSolution::Kind::Builtin && !p.exact.fn)
    p.exact.fn = exact_fn_for(p.exact.builtin);
}

ErrorNorms compute_error(const assembly::NormalSystem& sys, const VectorXd& U,
                         const std::function<double(double, double)>& exact) {
  const auto& m = *sys.mesh;
  double broken = 0.0, l2 = 0.0;

  std::vector<double> a_exact(m.corner.size());
  for (size_t k = 0; k < m.corner.size(); ++k) {
    const Vector2d& A = sys.problem->vertices[k];
    a_exact[k] = exact(A.x(), A.y());
    const double dv = U(static_cast<int>(k)) - a_exact[k];
    broken += dv * dv;
  }

  for (size_t s = 0; s < m.sectors.size(); ++s) {
    const auto& e = m.sectors[s];
    if (e.j < 2) {
      // physical L2 over the innermost wedge against the constant h_k
      const auto& q = basis::gll_rule(12);
      const double r1 = m.corner[e.k].sigma[2];
      const double dphi = e.phi_hi - e.phi_lo;
      for (int a = 0; a < 12; ++a)
        for (int b = 0; b < 12; ++b) {
          const double r = 0.5 * (q.nodes[a] + 1.0) * r1;
          const double phi = e.phi_lo + 0.5 * (q.nodes[b] + 1.0) * dphi;
          const double th = m.corner[e.k].theta0 + phi;
          const Vector2d x = sys.problem->vertices[e.k] + r * Vector2d(std::cos(th), std::sin(th));
          const double d = exact(x.x(), x.y()) - U(e.k);
          l2 += 0.25 * r1 * dphi * q.weights[a] * q.weights[b] * d * d * r;
        }
      continue;
    }
    const int d = e.degree;
    const int nq = 2 * d + 6;
    const auto& q = basis::gll_rule(nq);
    const MatrixXd P = basis::interp_matrix(d + 1, q.nodes);
    const basis::NodalTensor u = block_tensor(sys, U, sys.layout.sector_block[s], d);
    const MatrixXd Uq = P * u.v * P.transpose();
    const double dnu = e.nu_hi - e.nu_lo, dphi = e.phi_hi - e.phi_lo;
    MatrixXd Zq(nq, nq), shifted(nq, nq);
    const double vshift = U(e.k) - a_exact[e.k];
    double l2_loc = 0.0;
    for (int a = 0; a < nq; ++a)
      for (int b = 0; b < nq; ++b) {
        const double nu = e.nu_lo + 0.5 * (q.nodes[a] + 1.0) * dnu;
        const double phi = e.phi_lo + 0.5 * (q.nodes[b] + 1.0) * dphi;
        const Vector2d x = geometry::sector_map(m, e.k, nu, phi);
        Zq(a, b) = exact(x.x(), x.y());
        shifted(a, b) = Zq(a, b) - Uq(a, b) - vshift;
        const double d0 = Zq(a, b) - Uq(a, b);
        l2_loc += q.weights[a] * q.weights[b] * d0 * d0 * std::exp(2.0 * nu);
      }
    l2 += 0.25 * dnu * dphi * l2_loc;
    const double w = std::pow(m.corner[e.k].sigma[e.j], -2.0 * m.corner[e.k].lambda);
    broken += w * h2_norm_sq(shifted, q, 2.0 / dnu, 2.0 / dphi, 0.25 * dnu * dphi);
  }

  for (size_t l = 0; l < m.interiors.size(); ++l) {
    const auto& e = m.interiors[l];
    const int d = e.degree;
    const int nq = 2 * d + 6;
    const auto& q = basis::gll_rule(nq);
    const MatrixXd P = basis::interp_matrix(d + 1, q.nodes);
    const basis::NodalTensor u = block_tensor(sys, U, sys.layout.interior_block[l], d);
    const MatrixXd Uq = P * u.v * P.transpose();
    MatrixXd diff(nq, nq);
    double l2_loc = 0.0;
    for (int a = 0; a < nq; ++a)
      for (int b = 0; b < nq; ++b) {
        const Vector2d x = geometry::interior_map(m, static_cast<int>(l), q.nodes[a], q.nodes[b]);
        diff(a, b) = exact(x.x(), x.y()) - Uq(a, b);
        const double J = geometry::interior_metric(m, static_cast<int>(l), q.nodes[a], q.nodes[b]).det;
        l2_loc += q.weights[a] * q.weights[b] * diff(a, b) * diff(a, b) * std::abs(J);
      }
    l2 += l2_loc;
    broken += h2_norm_sq(diff, q, 1.0, 1.0, 1.0);
  }

  return {std::sqrt(broken), std::sqrt(l2)};
}

namespace {

// Cubic Hermite shape functions on [-1,1]: value / slope cards at node +-1.
double herm_val(double s, int node) {  // 1 at node, 0 value+slope elsewhere
  return node > 0 ? (s + 1) * (s + 1) * (2 - s) / 4 : (1 - s) * (1 - s) * (2 + s) / 4;
}
double herm_slope(double s, int node) {  // slope 1 at node, 0 otherwise
  return node > 0 ? (s + 1) * (s + 1) * (s - 1) / 4 : (1 - s) * (1 - s) * (s + 1) / 4;
}

struct CornerSample {
  int elem = -1;       // index into the combined element list
  int corner = 0;      // master corner 0..3
  double value = 0.0;
  Vector2d grad_phys = Vector2d::Zero();
};

constexpr double kCornerXi[4] = {-1, 1, 1, -1};
constexpr double kCornerEta[4] = {-1, -1, 1, 1};

}  // namespace

CorrectedSolution vertex_conforming_correction(const assembly::NormalSystem& sys,
                                               const VectorXd& U) {
  const auto& m = *sys.mesh;
  CorrectedSolution out;
  out.vertex = U.head(sys.layout.p);
  out.sector.resize(m.sectors.size());
  out.interior.resize(m.interiors.size());

  // combined element list: sectors with tensors first, then interiors
  struct Elem {
    bool sector = false;
    int idx = 0;
  };
  std::vector<Elem> elems;
  for (size_t s = 0; s < m.sectors.size(); ++s)
    if (m.sectors[s].j >= 2) elems.push_back({true, static_cast<int>(s)});
  for (size_t l = 0; l < m.interiors.size(); ++l) elems.push_back({false, static_cast<int>(l)});

  auto tensor_of = [&](const Elem& el) {
    if (el.sector)
      return block_tensor(sys, U, sys.layout.sector_block[el.idx], m.sectors[el.idx].degree);
    return block_tensor(sys, U, sys.layout.interior_block[el.idx], m.interiors[el.idx].degree);
  };

  // corner geometry helpers
  auto corner_point = [&](const Elem& el, int c) -> Vector2d {
    if (el.sector) {
      const auto& e = m.sectors[el.idx];
      const double nu = c == 1 || c == 2 ? e.nu_hi : e.nu_lo;
      const double phi = c >= 2 ? e.phi_hi : e.phi_lo;
      return geometry::sector_map(m, e.k, nu, phi);
    }
    return m.interiors[el.idx].corners[c];
  };

  // physical gradient of the element polynomial at a master corner
  auto corner_state = [&](const Elem& el, int c, const basis::NodalTensor& t, double& value,
                          Vector2d& grad) {
    const double xi = kCornerXi[c], eta = kCornerEta[c];
    value = basis::eval_nodal(t, xi, eta);
    const Vector2d gm = basis::eval_nodal_grad(t, xi, eta);
    if (el.sector) {
      const auto& e = m.sectors[el.idx];
      const double nu = c == 1 || c == 2 ? e.nu_hi : e.nu_lo;
      const double phi = c >= 2 ? e.phi_hi : e.phi_lo;
      const double th = m.corner[e.k].theta0 + phi;
      const Vector2d gf(gm.x() * 2.0 / (e.nu_hi - e.nu_lo), gm.y() * 2.0 / (e.phi_hi - e.phi_lo));
      Eigen::Matrix2d O;
      O << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      grad = std::exp(-nu) * (O * gf);
    } else {
      const auto& cs = m.interiors[el.idx].corners;
      const double xi_ = kCornerXi[c], eta_ = kCornerEta[c];
      const Vector2d dxd_xi = 0.25 * ((1 - eta_) * (cs[1] - cs[0]) + (1 + eta_) * (cs[2] - cs[3]));
      const Vector2d dxd_eta = 0.25 * ((1 - xi_) * (cs[3] - cs[0]) + (1 + xi_) * (cs[2] - cs[1]));
      Eigen::Matrix2d J;
      J.col(0) = dxd_xi;
      J.col(1) = dxd_eta;
      grad = J.transpose().fullPivLu().solve(gm);  // grad_x = J^{-T} grad_master
    }
  };

  // cluster coincident corners
  std::vector<basis::NodalTensor> tensors(elems.size());
  std::map<std::pair<long long, long long>, std::vector<CornerSample>> clusters;
  for (size_t i = 0; i < elems.size(); ++i) {
    tensors[i] = tensor_of(elems[i]);
    for (int c = 0; c < 4; ++c) {
      CornerSample cs;
      cs.elem = static_cast<int>(i);
      cs.corner = c;
      corner_state(elems[i], c, tensors[i], cs.value, cs.grad_phys);
      const Vector2d x = corner_point(elems[i], c);
      const auto key = std::make_pair(std::llround(x.x() * 1e8), std::llround(x.y() * 1e8));
      clusters[key].push_back(cs);
    }
  }

  // target value/gradient per element corner
  std::vector<std::array<double, 4>> tgt_value(elems.size());
  std::vector<std::array<Vector2d, 4>> tgt_grad(elems.size());
  for (auto& [key, group] : clusters) {
    double v = 0.0;
    Vector2d g = Vector2d::Zero();
    for (const auto& cs : group) {
      v += cs.value;
      g += cs.grad_phys;
    }
    v /= static_cast<double>(group.size());
    g /= static_cast<double>(group.size());
    // a corner on the innermost arc matches the layer constant h_k exactly
    for (const auto& cs : group) {
      const Elem& el = elems[cs.elem];
      if (el.sector && m.sectors[el.idx].j == 2 && (cs.corner == 0 || cs.corner == 3)) {
        v = U(m.sectors[el.idx].k);
        break;
      }
    }
    for (const auto& cs : group) {
      tgt_value[cs.elem][cs.corner] = v;
      tgt_grad[cs.elem][cs.corner] = g;
    }
  }

  // assemble the degree <= 3 Hermite correction per element and resample
  for (size_t i = 0; i < elems.size(); ++i) {
    const Elem& el = elems[i];
    const basis::NodalTensor& t = tensors[i];
    std::array<double, 4> dv, dgx, dgy;  // master-frame corner deltas
    for (int c = 0; c < 4; ++c) {
      double value;
      Vector2d grad;
      corner_state(el, c, t, value, grad);
      dv[c] = tgt_value[i][c] - value;
      const Vector2d dg_phys = tgt_grad[i][c] - grad;
      Vector2d dg_master;
      if (el.sector) {
        const auto& e = m.sectors[el.idx];
        const double nu = c == 1 || c == 2 ? e.nu_hi : e.nu_lo;
        const double phi = c >= 2 ? e.phi_hi : e.phi_lo;
        const double th = m.corner[e.k].theta0 + phi;
        Eigen::Matrix2d O;
        O << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Vector2d df = std::exp(nu) * (O.transpose() * dg_phys);
        dg_master = Vector2d(df.x() * 0.5 * (e.nu_hi - e.nu_lo), df.y() * 0.5 * (e.phi_hi - e.phi_lo));
      } else {
        const auto& cs = m.interiors[el.idx].corners;
        const double xi_ = kCornerXi[c], eta_ = kCornerEta[c];
        const Vector2d dxd_xi = 0.25 * ((1 - eta_) * (cs[1] - cs[0]) + (1 + eta_) * (cs[2] - cs[3]));
        const Vector2d dxd_eta = 0.25 * ((1 - xi_) * (cs[3] - cs[0]) + (1 + xi_) * (cs[2] - cs[1]));
        Eigen::Matrix2d J;
        J.col(0) = dxd_xi;
        J.col(1) = dxd_eta;
        dg_master = J.transpose() * dg_phys;
      }
      dgx[c] = dg_master.x();
      dgy[c] = dg_master.y();
    }
    const int d0 = el.sector ? m.sectors[el.idx].degree : m.interiors[el.idx].degree;
    const int dc = std::max(d0, 3);
    const auto& g = basis::gll_rule(dc + 1);
    basis::NodalTensor corrected(dc);
    for (int a = 0; a <= dc; ++a)
      for (int b = 0; b <= dc; ++b) {
        const double xi = g.nodes[a], eta = g.nodes[b];
        double r = 0.0;
        for (int c = 0; c < 4; ++c) {
          const int nx = kCornerXi[c] > 0 ? 1 : -1;
          const int ny = kCornerEta[c] > 0 ? 1 : -1;
          r += dv[c] * herm_val(xi, nx) * herm_val(eta, ny) +
               dgx[c] * herm_slope(xi, nx) * herm_val(eta, ny) +
               dgy[c] * herm_val(xi, nx) * herm_slope(eta, ny);
        }
        corrected.v(a, b) = basis::eval_nodal(t, xi, eta) + r;
      }
    if (el.sector)
      out.sector[el.idx] = corrected;
    else
      out.interior[el.idx] = corrected;
  }
  return out;
}

RunResult run_once(probdef::EllipticProblem p, bool with_kappa) {
  resolve_exact(p);
  RunResult out;
  const auto t0 = std::chrono::steady_clock::now();
  auto m = geometry::build_geometric_mesh(p);
  auto sys = assembly::build_functional(p, m);
  auto pre = solver::build_preconditioner(sys);
  auto sol = solver::solve(sys, pre, p.solver.tol, p.solver.maxit);
  out.record.W = p.solver.W;
  out.record.M = p.mesh.M;
  out.record.dofs = sys.layout.total;
  out.record.functional = sol.functional;
  out.record.iters_htilde = sol.iters_inner;
  out.record.iters_back = sol.iters_back;
  out.record.ok = sol.converged;
  out.U = sol.U;
  if (p.exact.fn) {
    const ErrorNorms err = compute_error(sys, sol.U, p.exact.fn);
    out.record.err_broken = err.broken;
    out.record.err_l2 = err.l2;
  }
  if (with_kappa) out.record.kappa = solver::estimate_condition(sys, pre);
  out.record.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

ConvergenceSweep run_convergence(const probdef::EllipticProblem& base,
                                 const std::vector<int>& W_list, bool with_kappa,
                                 std::optional<int> fixed_M) {
  ConvergenceSweep sweep;
  for (int W : W_list) {
    probdef::EllipticProblem p = base;
    p.solver.W = W;
    p.mesh.M = fixed_M ? *fixed_M : W;
    try {
      sweep.records.push_back(run_once(std::move(p), with_kappa).record);
    } catch (const std::exception&) {
      ConvergenceRecord r;
      r.W = W;
      r.M = fixed_M ? *fixed_M : W;
      r.ok = false;
      sweep.records.push_back(r);
    }
  }
  // least-squares fit of ln(err_broken) against W over the successful runs
  double sw = 0, se = 0, sww = 0, swe = 0, see = 0;
  int n = 0;
  for (const auto& r : sweep.records) {
    if (!r.ok || !(r.err_broken > 0)) continue;
    const double e = std::log(r.err_broken);
    sw += r.W;
    se += e;
    sww += double(r.W) * r.W;
    swe += r.W * e;
    see += e * e;
    ++n;
  }
  if (n >= 2) {
    const double varw = sww - sw * sw / n;
    const double cove = swe - sw * se / n;
    const double vare = see - se * se / n;
    if (varw > 0) {
      sweep.slope = cove / varw;
      sweep.r2 = vare > 0 ? (cove * cove) / (varw * vare) : 1.0;
    }
  }
  return sweep;
}

void write_convergence_csv(const std::vector<ConvergenceRecord>& records,
                           const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "W,M,dofs,err_broken,err_l2,functional,iters_htilde,iters_back,kappa,seconds\n";
  for (const auto& r : records)
    f << r.W << ',' << r.M << ',' << r.dofs << ',' << format_g(r.err_broken) << ','
      << format_g(r.err_l2) << ',' << format_g(r.functional) << ',' << r.iters_htilde << ','
      << r.iters_back << ',' << format_g(r.kappa) << ',' << format_g(r.seconds) << '\n';
  if (!f) throw std::runtime_error("write failure: " + path);
}

std::string problem_hash(const probdef::EllipticProblem& p) {
  std::ostringstream s;
  for (const auto& v : p.vertices) s << format_g(v.x()) << ',' << format_g(v.y()) << ';';
  for (const auto& e : p.edges)
    s << (e.kind == probdef::BcKind::Dirichlet ? 'D' : 'N') << e.data.print() << ';';
  for (const auto* c : {&p.a11, &p.a12, &p.a22, &p.b1, &p.b2, &p.c, &p.f}) s << c->print() << ';';
  s << p.mesh.M << ';' << format_g(p.mesh.rho) << ';';
  for (double mu : p.mesh.mu) s << format_g(mu) << ',';
  for (double b : p.beta) s << format_g(b) << ',';
  s << ';' << p.solver.W << ';' << (p.solver.variable_degree ? 1 : 0);
  // FNV-1a 64
  unsigned long long h = 1469598103934665603ull;
  for (unsigned char ch : s.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", h);
  return buf;
}

void write_solution_json(const probdef::EllipticProblem& p, const assembly::NormalSystem& sys,
                         const VectorXd& U, const std::string& path) {
  json j;
  j["problem_hash"] = problem_hash(p);
  j["layout"] = {{"p", sys.layout.p},
                 {"total", sys.layout.total},
                 {"block_offset", sys.layout.block_offset},
                 {"block_size", sys.layout.block_size}};
  j["dofs"] = std::vector<double>(U.data(), U.data() + U.size());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump(2) << '\n';
  if (!f) throw std::runtime_error("write failure: " + path);
}

VectorXd read_solution_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  json j = json::parse(f);
  const auto vals = j.at("dofs").get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void write_mesh_json(const geometry::GeometricMesh& m, const std::string& path) {
  json elements = json::array();
  const int samples = 16;
  auto polyline = [&](const std::function<Vector2d(double)>& side0,
                      const std::function<Vector2d(double)>& side1,
                      const std::function<Vector2d(double)>& side2,
                      const std::function<Vector2d(double)>& side3) {
    json pts = json::array();
    for (const auto* side : {&side0, &side1, &side2, &side3})
      for (int i = 0; i < samples; ++i) {
        const Vector2d x = (*side)(-1.0 + 2.0 * i / samples);
        pts.push_back({x.x(), x.y()});
      }
    const Vector2d x = side0(-1.0);
    pts.push_back({x.x(), x.y()});  // close the loop
    return pts;
  };
  for (size_t s = 0; s < m.sectors.size(); ++s) {
    const auto& e = m.sectors[s];
    json el;
    el["type"] = "sector";
    el["k"] = e.k;
    el["i"] = e.i;
    el["j"] = e.j;
    const Vector2d apex = m.problem->vertices[e.k];
    if (e.j == 1) {
      // innermost wedge: apex to the first arc
      auto lo = [&](double t) -> Vector2d {
        return apex + 0.5 * (t + 1.0) * (geometry::sector_map(m, e.k, e.nu_hi, e.phi_lo) - apex);
      };
      auto arc = [&](double t) -> Vector2d {
        return geometry::sector_map(m, e.k, e.nu_hi, e.phi_lo + 0.5 * (t + 1.0) * (e.phi_hi - e.phi_lo));
      };
      auto hi = [&](double t) -> Vector2d {
        return geometry::sector_map(m, e.k, e.nu_hi, e.phi_hi) +
               0.5 * (t + 1.0) * (apex - geometry::sector_map(m, e.k, e.nu_hi, e.phi_hi));
      };
      auto stay = [&](double) -> Vector2d { return apex; };
      el["polyline"] = polyline(lo, arc, hi, stay);
    } else {
      auto map = [&](double nu, double phi) { return geometry::sector_map(m, e.k, nu, phi); };
      auto s0 = [&](double t) { return map(e.nu_lo + 0.5 * (t + 1) * (e.nu_hi - e.nu_lo), e.phi_lo); };
      auto s1 = [&](double t) { return map(e.nu_hi, e.phi_lo + 0.5 * (t + 1) * (e.phi_hi - e.phi_lo)); };
      auto s2 = [&](double t) { return map(e.nu_hi - 0.5 * (t + 1) * (e.nu_hi - e.nu_lo), e.phi_hi); };
      auto s3 = [&](double t) { return map(e.nu_lo, e.phi_hi - 0.5 * (t + 1) * (e.phi_hi - e.phi_lo)); };
      el["polyline"] = polyline(s0, s1, s2, s3);
    }
    elements.push_back(std::move(el));
  }
  for (size_t l = 0; l < m.interiors.size(); ++l) {
    const auto& c = m.interiors[l].corners;
    json el;
    el["type"] = "interior";
    el["l"] = static_cast<int>(l);
    auto seg = [&](int a, int b) {
      return [&c, a, b](double t) -> Vector2d { return c[a] + 0.5 * (t + 1.0) * (c[b] - c[a]); };
    };
    el["polyline"] = polyline(seg(0, 1), seg(1, 2), seg(2, 3), seg(3, 0));
    elements.push_back(std::move(el));
  }
  json j;
  j["elements"] = std::move(elements);
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << j.dump() << '\n';
  if (!f) throw std::runtime_error("write failure: " + path);
}

}  // namespace polyspec::harness
