#include <benchmark/benchmark.h>

#include "polyspec/harness.hpp"

using namespace polyspec;

namespace {

// One shared system per degree so setup cost stays out of the timed loop.
struct Fixture {
  probdef::EllipticProblem p;
  geometry::GeometricMesh m;
  assembly::NormalSystem sys;
  solver::Preconditioner pre;
  Eigen::VectorXd u;
  explicit Fixture(int W) {
    p = harness::builtin_problem("lshape_singular");
    p.mesh.M = W;
    p.solver.W = W;
    m = geometry::build_geometric_mesh(p);
    sys = assembly::build_functional(p, m);
    pre = solver::build_preconditioner(sys);
    u = Eigen::VectorXd::Random(sys.layout.total);
  }
};

Fixture& fixture(int W) {
  static std::map<int, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[W];
  if (!slot) slot = std::make_unique<Fixture>(W);
  return *slot;
}

}  // namespace

static void BM_GllRule(benchmark::State& state) {
  for (auto _ : state) {
    polyspec::basis::GllRule r;
    benchmark::DoNotOptimize(r = polyspec::basis::gll_rule(static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_GllRule)->Arg(8)->Arg(16);

static void BM_BuildMesh(benchmark::State& state) {
  auto p = harness::builtin_problem("lshape_singular");
  p.mesh.M = static_cast<int>(state.range(0));
  p.solver.W = p.mesh.M;
  for (auto _ : state) {
    auto m = geometry::build_geometric_mesh(p);
    benchmark::DoNotOptimize(m.sectors.size());
  }
}
BENCHMARK(BM_BuildMesh)->Arg(4)->Arg(8);

static void BM_BuildFunctional(benchmark::State& state) {
  auto p = harness::builtin_problem("lshape_singular");
  p.mesh.M = static_cast<int>(state.range(0));
  p.solver.W = p.mesh.M;
  auto m = geometry::build_geometric_mesh(p);
  for (auto _ : state) {
    auto sys = assembly::build_functional(p, m);
    benchmark::DoNotOptimize(sys.terms.size());
  }
}
BENCHMARK(BM_BuildFunctional)->Arg(4)->Arg(6);

static void BM_ApplyA(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Eigen::VectorXd y = assembly::apply_A(f.sys, f.u);
    benchmark::DoNotOptimize(y.sum());
  }
  state.SetItemsProcessed(state.iterations() * f.sys.layout.total);
}
BENCHMARK(BM_ApplyA)->Arg(4)->Arg(6)->Arg(8);

static void BM_PreconditionerApply(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  Eigen::VectorXd r = Eigen::VectorXd::Random(f.sys.layout.total - f.sys.layout.p);
  for (auto _ : state) {
    Eigen::VectorXd z = f.pre.apply(r);
    benchmark::DoNotOptimize(z.sum());
  }
}
BENCHMARK(BM_PreconditionerApply)->Arg(4)->Arg(6)->Arg(8);

static void BM_Functional(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    double v = assembly::evaluate_functional(f.sys, f.u);
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(BM_Functional)->Arg(4)->Arg(6);

static void BM_FullSolve(benchmark::State& state) {
  auto& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto res = solver::solve(f.sys, f.pre, 1e-8, 5000);
    benchmark::DoNotOptimize(res.functional);
  }
}
BENCHMARK(BM_FullSolve)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
