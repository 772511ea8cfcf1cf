#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "layerscatter/error.hpp"
#include "layerscatter/scene.hpp"
#include "selftest.hpp"

using namespace layerscatter;

namespace {

struct Options {
  std::string scene;
  std::string out;
  std::string solution;
  std::string grid;
  std::string extent;
  std::string path;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  bool exclude_interiors = false;
  std::string level = "fast";
  std::string scenes_dir = "scenes";
  std::vector<int> only;
};

std::vector<double> split_numbers(const std::string& text, std::size_t count, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError(std::string(what) + ": cannot parse '" + item + "'");
    v.push_back(x);
  }
  if (v.size() != count)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(count) + " comma-separated values");
  return v;
}

SceneConfig scene_with_overrides(const Options& o) {
  auto cfg = load_scene(o.scene);
  if (!o.path.empty()) cfg.path = parse_path(o.path);
  if (o.tol) cfg.gmres.tol = *o.tol;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

SceneSetup setup(const Options& o, bool need_densities) {
  const auto dir = default_cache_dir();
  auto s = setup_scene(scene_with_overrides(o), dir, need_densities);
  if (s.cache.cache_rebuilt)
    std::cerr << "notice: scattering-matrix cache was stale or unreadable and has been rebuilt: "
              << s.cache.cache_file.string() << "\n";
  else if (!s.cache.cache_hit)
    std::cerr << "notice: scattering matrix computed and cached at " << s.cache.cache_file.string() << "\n";
  return s;
}

Solution solve_or_fail(const SceneSetup& s) {
  const auto t0 = std::chrono::steady_clock::now();
  Solution sol = solve_layered_scene(*s.problem, s.config.gmres);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!sol.converged) throw SolverError("GMRES did not reach tol " + std::to_string(s.config.gmres.tol), sol.history);
  std::printf("solved M = %d in %d iterations, residual %.3e, %.2f s (%s path)\n", s.config.M, sol.iterations,
              sol.residual, secs, path_name(s.problem->coupling().use_nufft(s.config.path) ? CouplingPath::Nufft
                                                                                          : CouplingPath::Direct));
  return sol;
}

int cmd_precompute(const Options& o) {
  const auto s = setup(o, false);
  std::printf("model: N = %d, p = %d, R = %.6g, cache %s (%s)\n", s.config.shape.N, s.config.p, s.model->R,
              s.cache.cache_hit ? "hit" : "written", s.cache.cache_file.string().c_str());
  return 0;
}

int cmd_solve(const Options& o) {
  const auto s = setup(o, false);
  const Solution sol = solve_or_fail(s);
  write_solution(o.out, sol);
  std::printf("wrote %s\n", o.out.c_str());
  return 0;
}

int cmd_eval(const Options& o) {
  const auto g = split_numbers(o.grid, 2, "--grid");
  if (g[0] != std::floor(g[0]) || g[1] != std::floor(g[1])) throw ConfigError("--grid: nx and ny must be integers");
  const auto s = setup(o, true);
  Rect extent;
  if (o.extent.empty()) {
    const double d = s.config.layers.d;
    extent = {s.config.region.x0, s.config.region.x1, -d - 0.1 * d, 0.1 * d};
  } else {
    const auto e = split_numbers(o.extent, 4, "--extent");
    extent = {e[0], e[1], e[2], e[3]};
  }
  Solution sol;
  double solve_s = 0.0;
  if (!o.solution.empty()) {
    sol = read_solution(o.solution);
    if (sol.fingerprint != s.problem->fingerprint())
      throw ConfigError("solution " + o.solution + " was computed for a different scene (fingerprint mismatch)");
  } else {
    const auto t0 = std::chrono::steady_clock::now();
    sol = solve_or_fail(s);
    solve_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  FieldGrid grid = eval_field_grid(*s.problem, sol, extent, int(g[0]), int(g[1]), !o.exclude_interiors);
  grid.tol = s.config.gmres.tol;
  grid.solve_seconds = solve_s;
  write_field_grid(o.out, grid);
  std::printf("wrote %s (%d x %d, %.2f s)\n", o.out.c_str(), grid.nx, grid.ny, grid.eval_seconds);
  return 0;
}

int cmd_selftest(const Options& o) {
  if (o.level != "fast" && o.level != "full") throw ConfigError("--level: expected fast or full");
  const auto level = o.level == "full" ? selftest::Level::Full : selftest::Level::Fast;
  const auto results = selftest::run(level, o.scenes_dir, std::cout, o.only);
  int failed = 0;
  for (const auto& r : results) failed += !r.pass;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scattering by many particles embedded in a three-layer medium"};
  app.require_subcommand(1);
  Options o;

  auto add_scene_opts = [&](CLI::App* c) {
    c->add_option("--scene", o.scene, "Scene file")->required()->check(CLI::ExistingFile);
    c->add_option("--path", o.path, "Coupling path")->check(CLI::IsMember({"auto", "direct", "nufft"}));
    c->add_option("--tol", o.tol, "GMRES relative tolerance");
    c->add_option("--seed", o.seed, "Placement seed");
  };

  auto* pre = app.add_subcommand("precompute", "Build or load the cached scattering matrix");
  add_scene_opts(pre);
  auto* solve = app.add_subcommand("solve", "Solve a scene and write the solution");
  add_scene_opts(solve);
  solve->add_option("--out", o.out, "Solution file")->required();
  auto* eval = app.add_subcommand("eval", "Evaluate the total field on a grid");
  add_scene_opts(eval);
  eval->add_option("--out", o.out, "Field grid file")->required();
  eval->add_option("--solution", o.solution, "Solution from `solve`; solved in place if omitted");
  eval->add_option("--grid", o.grid, "nx,ny")->required();
  eval->add_option("--extent", o.extent, "x0,x1,y0,y1");
  eval->add_flag("--exclude-interiors", o.exclude_interiors, "Write NaN inside the inclusions");
  auto* self = app.add_subcommand("selftest", "Run the acceptance checks");
  self->add_option("--level", o.level, "fast or full");
  self->add_option("--scenes", o.scenes_dir, "Directory with the bundled scenes");
  self->add_option("--only", o.only, "Criterion numbers to run");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pre) return cmd_precompute(o);
    if (*solve) return cmd_solve(o);
    if (*eval) return cmd_eval(o);
    return cmd_selftest(o);
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\nresidual history:\n";
    for (std::size_t i = 0; i < e.history().size(); ++i) std::cerr << "  " << i << " " << e.history()[i] << "\n";
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
