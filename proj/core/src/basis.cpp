#include "polyspec/basis.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace polyspec::basis {

namespace {

// Legendre P_m and P_m' at x by the three-term recurrence.
void legendre(int m, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (m == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= m; ++k) {
    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  if (std::abs(x) == 1.0)
    dp = x > 0 ? m * (m + 1) / 2.0 : (m % 2 == 0 ? -1.0 : 1.0) * m * (m + 1) / 2.0;
  else
    dp = m * (p0 - x * p1) / (1.0 - x * x);
}

GllRule make_gll(int n) {
  if (n < 2) throw std::invalid_argument("gll_rule: need n >= 2");
  GllRule r;
  r.n = n;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int m = n - 1;  // interior nodes are roots of P_m'
  r.nodes[0] = -1.0;
  r.nodes[n - 1] = 1.0;
  const double pi = std::acos(-1.0);
  for (int i = 1; i < n - 1; ++i) {
    // Chebyshev-Lobatto initial guess, then Newton on P_m'.
    double x = -std::cos(pi * i / m);
    for (int it = 0; it < 100; ++it) {
      double p, dp;
      legendre(m, x, p, dp);
      // P_m'' from the Legendre ODE: (1-x^2) P'' = 2x P' - m(m+1) P.
      const double d2p = (2.0 * x * dp - m * (m + 1) * p) / (1.0 - x * x);
      const double dx = dp / d2p;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes[i] = x;
  }
  for (int i = 0; i < n; ++i) {
    double p, dp;
    legendre(m, r.nodes[i], p, dp);
    r.weights[i] = 2.0 / (n * m * p * p);
  }
  // Enforce exact symmetry.
  for (int i = 0; i < n / 2; ++i) {
    const double x = 0.5 * (r.nodes[n - 1 - i] - r.nodes[i]);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    const double w = 0.5 * (r.weights[i] + r.weights[n - 1 - i]);
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

std::vector<double> bary_weights(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> b(n, 1.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) b[i] /= (x[i] - x[j]);
  return b;
}

template <class K, class V, class F>
const V& cached(std::map<K, V>& cache, std::mutex& mu, const K& key, F&& make) {
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, make()).first;
  return it->second;
}

}  // namespace

const GllRule& gll_rule(int n) {
  static std::map<int, GllRule> cache;
  static std::mutex mu;
  return cached(cache, mu, n, [n] { return make_gll(n); });
}

const Eigen::MatrixXd& diff_matrix(int n) {
  static std::map<int, Eigen::MatrixXd> cache;
  static std::mutex mu;
  return cached(cache, mu, n, [n] {
    const GllRule& r = gll_rule(n);
    const std::vector<double> b = bary_weights(r.nodes);
    Eigen::MatrixXd D(n, n);
    for (int i = 0; i < n; ++i) {
      double diag = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        D(i, j) = (b[j] / b[i]) / (r.nodes[i] - r.nodes[j]);
        diag -= D(i, j);
      }
      D(i, i) = diag;
    }
    return D;
  });
}

Eigen::MatrixXd interp_matrix(int n, const std::vector<double>& pts) {
  const GllRule& r = gll_rule(n);
  const std::vector<double> b = bary_weights(r.nodes);
  Eigen::MatrixXd E(pts.size(), n);
  for (size_t q = 0; q < pts.size(); ++q) {
    const double x = pts[q];
    int hit = -1;
    for (int j = 0; j < n; ++j)
      if (x == r.nodes[j]) hit = j;
    if (hit >= 0) {
      for (int j = 0; j < n; ++j) E(q, j) = (j == hit) ? 1.0 : 0.0;
      continue;
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) denom += b[j] / (x - r.nodes[j]);
    for (int j = 0; j < n; ++j) E(q, j) = (b[j] / (x - r.nodes[j])) / denom;
  }
  return E;
}

double eval_nodal(const NodalTensor& t, double xi, double eta) {
  const int n = t.d + 1;
  const Eigen::MatrixXd ex = interp_matrix(n, {xi});
  const Eigen::MatrixXd ey = interp_matrix(n, {eta});
  return (ex * t.v * ey.transpose())(0, 0);
}

Eigen::Vector2d eval_nodal_grad(const NodalTensor& t, double xi, double eta) {
  const int n = t.d + 1;
  const Eigen::MatrixXd& D = diff_matrix(n);
  const Eigen::MatrixXd ex = interp_matrix(n, {xi});
  const Eigen::MatrixXd ey = interp_matrix(n, {eta});
  Eigen::Vector2d g;
  g[0] = (ex * (D * t.v) * ey.transpose())(0, 0);
  g[1] = (ex * (t.v * D.transpose()) * ey.transpose())(0, 0);
  return g;
}

namespace {

// Quadrature pieces for the degree-d discrete H^2 inner product:
// E_k maps nodal values on the (d+1)-grid to k-th derivative values on the
// (d+3)-point quadrature grid.
struct H2Pieces {
  Eigen::MatrixXd E[3];
  Eigen::VectorXd wq;
};

const H2Pieces& h2_pieces(int d) {
  static std::map<int, H2Pieces> cache;
  static std::mutex mu;
  return cached(cache, mu, d, [d] {
    const int m = d + 3;
    const GllRule& q = gll_rule(m);
    H2Pieces p;
    p.wq = Eigen::Map<const Eigen::VectorXd>(q.weights.data(), m);
    const Eigen::MatrixXd E = interp_matrix(d + 1, q.nodes);
    const Eigen::MatrixXd& D = diff_matrix(d + 1);
    p.E[0] = E;
    p.E[1] = E * D;
    p.E[2] = E * D * D;
    return p;
  });
}

Eigen::MatrixXd gram_1d_order(int d, int k) {
  const H2Pieces& p = h2_pieces(d);
  return p.E[k].transpose() * p.wq.asDiagonal() * p.E[k];
}

}  // namespace

const Eigen::MatrixXd& h2_gram_1d(int d) {
  static std::map<int, Eigen::MatrixXd> cache;
  static std::mutex mu;
  return cached(cache, mu, d, [d] {
    Eigen::MatrixXd g = gram_1d_order(d, 0) + gram_1d_order(d, 1) + gram_1d_order(d, 2);
    return g;
  });
}

const Eigen::MatrixXd& h2_gram_2d(int d) {
  static std::map<int, Eigen::MatrixXd> cache;
  static std::mutex mu;
  return cached(cache, mu, d, [d] {
    const Eigen::MatrixXd g0 = gram_1d_order(d, 0);
    const Eigen::MatrixXd g1 = gram_1d_order(d, 1);
    const Eigen::MatrixXd g2 = gram_1d_order(d, 2);
    const auto kron = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
      Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
      for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
      return k;
    };
    // Multi-indices with |alpha| <= 2: 00, 10, 01, 20, 11, 02.
    Eigen::MatrixXd g = kron(g0, g0) + kron(g1, g0) + kron(g0, g1) + kron(g2, g0) + kron(g1, g1) + kron(g0, g2);
    return g;
  });
}

Eigen::VectorXd h2_project_1d(const std::function<double(double)>& f, int d) {
  const int m = d + 3;
  const GllRule& q = gll_rule(m);
  const H2Pieces& p = h2_pieces(d);
  Eigen::VectorXd fq(m);
  for (int i = 0; i < m; ++i) fq[i] = f(q.nodes[i]);
  // Derivatives of the quadrature-grid interpolant of f.
  const Eigen::MatrixXd& Dm = diff_matrix(m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd fk = fq;
  for (int k = 0; k <= 2; ++k) {
    rhs += p.E[k].transpose() * (p.wq.asDiagonal() * fk);
    fk = Dm * fk;
  }
  return h2_gram_1d(d).ldlt().solve(rhs);
}

NodalTensor h2_project_2d(const std::function<double(double, double)>& f, int d) {
  const int m = d + 3;
  const GllRule& q = gll_rule(m);
  const H2Pieces& p = h2_pieces(d);
  Eigen::MatrixXd F(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) F(i, j) = f(q.nodes[i], q.nodes[j]);
  const Eigen::MatrixXd& Dm = diff_matrix(m);
  const Eigen::MatrixXd W = p.wq * p.wq.transpose();
  const int ab[6][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d + 1, d + 1);
  for (const auto& o : ab) {
    Eigen::MatrixXd Fab = F;
    for (int k = 0; k < o[0]; ++k) Fab = Dm * Fab;
    for (int k = 0; k < o[1]; ++k) Fab = Fab * Dm.transpose();
    rhs += p.E[o[0]].transpose() * (W.cwiseProduct(Fab)) * p.E[o[1]];
  }
  // Flatten convention: index i*(d+1)+j for value at (xi_i, eta_j).
  Eigen::VectorXd rflat((d + 1) * (d + 1));
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d; ++j) rflat[i * (d + 1) + j] = rhs(i, j);
  const Eigen::VectorXd sol = h2_gram_2d(d).ldlt().solve(rflat);
  NodalTensor t(d);
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d; ++j) t.v(i, j) = sol[i * (d + 1) + j];
  return t;
}

}  // namespace polyspec::basis
