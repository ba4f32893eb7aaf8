// Command-line front end: solve a problem file (or builtin), run convergence
// sweeps, dump mesh geometry, or just validate the input.

#include "polyspec/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polyspec;

namespace {

probdef::EllipticProblem load_any(const std::string& ref) {
  const auto names = harness::builtin_names();
  if (std::find(names.begin(), names.end(), ref) != names.end())
    return harness::builtin_problem(ref);
  if (!fs::exists(ref))
    throw std::runtime_error("problem '" + ref + "' is neither a file nor a builtin name");
  auto p = probdef::load_problem(ref);
  harness::resolve_exact(p);
  return p;
}

json record_json(const harness::ConvergenceRecord& r) {
  return json{{"W", r.W},
              {"M", r.M},
              {"dofs", r.dofs},
              {"err_broken", r.err_broken},
              {"err_l2", r.err_l2},
              {"functional", r.functional},
              {"iters_htilde", r.iters_htilde},
              {"iters_back", r.iters_back},
              {"kappa", r.kappa},
              {"seconds", r.seconds},
              {"ok", r.ok}};
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

std::vector<int> parse_w_list(const std::string& s) {
  std::vector<int> out;
  size_t at = 0;
  while (at < s.size()) {
    size_t comma = s.find(',', at);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stoi(s.substr(at, comma - at)));
    at = comma + 1;
  }
  if (out.empty()) throw std::runtime_error("empty W list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonconforming h-p spectral element least-squares elliptic solver"};
  app.require_subcommand(1);

  std::string problem_ref, out_dir, format = "csv", w_list_text = "2,3,4,5,6";
  int W = 0, M = 0, maxit = 0;
  double tol = 0.0;
  bool with_kappa = false;

  auto* solve = app.add_subcommand("solve", "solve one configuration");
  solve->add_option("--problem", problem_ref, "problem file or builtin name")->required();
  solve->add_option("--W", W, "polynomial degree override");
  solve->add_option("--M", M, "geometric layer count override");
  solve->add_option("--tol", tol, "solver tolerance override");
  solve->add_option("--maxit", maxit, "solver iteration cap override");
  solve->add_option("--out", out_dir, "output directory")->required();
  solve->add_option("--format", format, "record format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  solve->add_flag("--kappa", with_kappa, "also estimate the preconditioned condition number");

  auto* conv = app.add_subcommand("convergence", "W = M sweep with error decay fit");
  conv->add_option("--problem", problem_ref, "problem file or builtin name")->required();
  conv->add_option("--W-list", w_list_text, "comma-separated degrees");
  conv->add_option("--out", out_dir, "output directory")->required();
  conv->add_flag("--kappa", with_kappa, "record condition estimates");

  auto* mesh_cmd = app.add_subcommand("mesh", "write element outlines as mesh.json");
  mesh_cmd->add_option("--problem", problem_ref, "problem file or builtin name")->required();
  mesh_cmd->add_option("--M", M, "geometric layer count override");
  mesh_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* check = app.add_subcommand("check", "validate the problem file only");
  check->add_option("--problem", problem_ref, "problem file or builtin name")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    auto p = load_any(problem_ref);
    if (W > 0) p.solver.W = W;
    if (M > 0) p.mesh.M = M;
    if (tol > 0) p.solver.tol = tol;
    if (maxit > 0) p.solver.maxit = maxit;

    if (check->parsed()) {
      probdef::validate_ellipticity(p, 32);
      std::printf("ok: %d vertices, W=%d M=%d\n", p.p(), p.solver.W, p.mesh.M);
      return 0;
    }

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    if (mesh_cmd->parsed()) {
      auto m = geometry::build_geometric_mesh(p);
      harness::write_mesh_json(m, (dir / "mesh.json").string());
      std::printf("wrote %s (%zu sector + %zu interior elements)\n",
                  (dir / "mesh.json").c_str(), m.sectors.size(), m.interiors.size());
      return 0;
    }

    if (solve->parsed()) {
      auto run = harness::run_once(p, with_kappa);
      const auto& r = run.record;
      auto m = geometry::build_geometric_mesh(p);
      auto sys = assembly::build_functional(p, m);
      harness::write_solution_json(p, sys, run.U, (dir / "solution.json").string());
      if (format == "json")
        write_json(record_json(r), dir / "record.json");
      else
        harness::write_convergence_csv({r}, (dir / "convergence.csv").string());
      std::printf("W=%d M=%d dofs=%d functional=%.6e iters=%d/%d residual-converged=%d\n",
                  r.W, r.M, r.dofs, r.functional, r.iters_htilde, r.iters_back, (int)r.ok);
      if (p.exact.fn)
        std::printf("err_broken=%.6e err_l2=%.6e\n", r.err_broken, r.err_l2);
      if (with_kappa) std::printf("kappa=%.3e\n", r.kappa);
      return r.ok ? 0 : 1;
    }

    // convergence sweep
    auto Ws = parse_w_list(w_list_text);
    auto sw = harness::run_convergence(p, Ws, with_kappa);
    harness::write_convergence_csv(sw.records, (dir / "convergence.csv").string());
    json j{{"slope", sw.slope}, {"r2", sw.r2}, {"records", json::array()}};
    for (const auto& r : sw.records) j["records"].push_back(record_json(r));
    write_json(j, dir / "sweep.json");
    for (const auto& r : sw.records)
      std::printf("W=%d M=%d dofs=%d err_broken=%.3e err_l2=%.3e F=%.3e t=%.1fs ok=%d\n",
                  r.W, r.M, r.dofs, r.err_broken, r.err_l2, r.functional, r.seconds, (int)r.ok);
    std::printf("slope=%.3f r2=%.3f\n", sw.slope, sw.r2);
    const bool all_ok =
        std::all_of(sw.records.begin(), sw.records.end(), [](const auto& r) { return r.ok; });
    return all_ok ? 0 : 1;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}
