#include "selftest.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>

#include "layerscatter/coupling.hpp"
#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/numerics/nufft.hpp"
#include "layerscatter/scene.hpp"
#include "layerscatter/solver.hpp"
#include "oracles/layered_monolithic.hpp"

namespace layerscatter::selftest {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

CheckResult named(int id, std::string name) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  return r;
}

LayerStack uniform_layers(cplx k, double d, Vec2 source) {
  LayerStack l;
  l.k1 = l.k2 = l.k3 = k;
  l.d = d;
  l.source = source;
  return l;
}

ShapeParams example_shape(cplx kp = 2.0) {
  ShapeParams s;
  s.a1 = 0.12;
  s.a2 = 0.04;
  s.a3 = 3;
  s.kp = kp;
  s.N = 300;
  return s;
}

GmresConfig gmres_tol(double tol) {
  GmresConfig c;
  c.tol = tol;
  return c;
}

double max_entry(const ScatteringMatrix& s) {
  double m = 0.0;
  for (const auto& e : s.entries) m = std::max(m, std::abs(e));
  return m;
}

// Field error on the enclosing circles caused by a coefficient difference.
double weighted_local_error(const CVector& a, const CVector& ref, std::size_t M, int p, cplx k, double R) {
  const int np = 2 * p + 1;
  std::vector<double> j(np);
  for (int n = -p; n <= p; ++n) j[n + p] = std::abs(numerics::bessel_j(std::abs(n), k * R));
  double err = 0.0, scale = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    double e = 0.0, s = 0.0;
    for (int c = 0; c < np; ++c) {
      e += std::abs(a[m * np + c] - ref[m * np + c]) * j[c];
      s += std::abs(ref[m * np + c]) * j[c];
    }
    err = std::max(err, e);
    scale = std::max(scale, s);
  }
  return err / scale;
}

double update_error(const SpectralUpdate& a, const SpectralUpdate& ref) {
  double err = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    err = std::max({err, std::abs(a.plus[j] - ref.plus[j]), std::abs(a.minus[j] - ref.minus[j])});
    scale = std::max({scale, std::abs(ref.plus[j]), std::abs(ref.minus[j])});
  }
  return err / scale;
}

CVector scattered_beta(const ScatteringMatrix& S, std::size_t M, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  const int p = S.p, np = 2 * p + 1;
  CVector beta(M * np), xi(np);
  for (std::size_t m = 0; m < M; ++m) {
    for (auto& x : xi) x = {g(rng), g(rng)};
    const CVector b = S.apply(xi);
    std::copy(b.begin(), b.end(), beta.begin() + m * np);
  }
  return beta;
}

double interface_jump(const LayeredProblem& pb, const Solution& sol, double x0, double x1, int n) {
  double jump = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = x0 + (x1 - x0) * i / (n - 1);
    for (int side = 0; side < 2; ++side) {
      const double y = side ? -pb.layers().d : 0.0;
      const auto a = eval_layer_field(pb, sol, {x, y}, side ? 2 : 1, true);
      const auto b = eval_layer_field(pb, sol, {x, y}, side ? 3 : 2, true);
      jump = std::max({jump, std::abs(a.value - b.value), std::abs(a.dy - b.dy)});
    }
  }
  return jump;
}

CheckResult sommerfeld_identity() {
  auto r = named(1, "Sommerfeld identity");
  double worst = 0.0;
  std::ostringstream nodes;
  std::mt19937_64 rng(17);
  for (double k : {1.0, 3.0, 10.0}) {
    const double min_dy = 0.2 * kTwoPi / k;
    const auto L = uniform_layers(k, 1.0, {0.0, 1.0});
    const auto contour = k == 1.0 ? build_contour(L) : build_contour(L, contour_for_accuracy(L, min_dy, 6.0));
    nodes << (k == 1.0 ? "" : "/") << contour.size();
    std::uniform_real_distribution<double> ux(-3.0, 3.0), uy(min_dy, min_dy + 4.0);
    for (int i = 0; i < 100; ++i) {
      const Vec2 src{ux(rng), 0.0}, tgt{ux(rng), uy(rng) * (i % 2 ? 1.0 : -1.0)};
      const cplx ref = free_space_green(k, tgt, src);
      worst = std::max(worst, std::abs(sommerfeld_free_space(contour, k, tgt, src) - ref) / std::abs(ref));
    }
  }
  r.pass = worst <= 1e-9;
  r.detail = fmt("max rel err %.2e over k = 1, 3, 10 (limit 1e-9), contour nodes %s", worst, nodes.str().c_str());
  return r;
}

CheckResult disk_cross_validation() {
  auto r = named(2, "Disk cross-validation");
  ShapeParams circle;
  circle.a1 = 0.16;
  circle.a2 = 0.0;
  circle.a3 = 0;
  circle.kp = 2.0;
  circle.N = 300;
  const auto num = scattering_matrix_nystrom(discretize_boundary(circle), 3.0, 2.0, 10, 1.1 * 0.16);
  const auto ref = scattering_matrix_disk(0.16, 3.0, 2.0, 10);
  double err = 0.0;
  for (std::size_t i = 0; i < ref.entries.size(); ++i) err = std::max(err, std::abs(num.entries[i] - ref.entries[i]));
  r.pass = err <= 1e-10;
  r.detail = fmt("max entry diff %.2e (limit 1e-10), p = 10, N = 300, (k2, kp) = (3, 2)", err);
  return r;
}

CheckResult degenerations() {
  auto r = named(3, "Zero-contrast and equal-layer degenerations");
  const auto zero = scattering_matrix_nystrom(discretize_boundary(example_shape(3.0)), 3.0, 3.0, 10, 0.176);
  const double s = max_entry(zero);
  double worst = 0.0;
  for (double k : {1.0, 3.0}) {
    const auto L = uniform_layers(k, 4.0, {0.0, 1.0});
    auto model = std::make_shared<const ParticleModel>(build_particle_model(example_shape(), k, 0));
    const LayeredProblem pb(L, build_contour(L), {}, model);
    const Solution sol = solve_layered_scene(pb, gmres_tol(1e-12));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(-10.0, 10.0), uy(-8.0, 0.6);
    for (int i = 0; i < 100; ++i) {
      const Vec2 x{ux(rng), uy(rng)};
      const cplx ref = free_space_green(k, x, L.source);
      worst = std::max(worst, std::abs(eval_total_field(pb, sol, x) - ref) / std::abs(ref));
    }
  }
  r.pass = s <= 1e-12 && worst <= 1e-8;
  r.detail = fmt("kp = k2: max |S| %.2e (limit 1e-12); M = 0, k1 = k2 = k3: max rel err %.2e at 200 points (limit 1e-8)", s, worst);
  return r;
}

CheckResult small_scene_oracle() {
  auto r = named(4, "Small-scene monolithic oracle");
  LayerStack L;
  L.k1 = 1.0;
  L.k2 = 3.0;
  L.k3 = 1.5;
  L.d = 5.0;
  L.source = {0.5, 1.0};
  const auto contour = build_contour(L);
  const std::vector<ParticleInstance> inst{{{-0.35, -2.1}, 0.7}, {{0.3, -2.6}, 2.3}};
  auto model = std::make_shared<const ParticleModel>(build_particle_model(example_shape(), L.k2, 10));
  const LayeredProblem pb(L, contour, inst, model, CouplingPath::Direct);
  const Solution sol = solve_layered_scene(pb, gmres_tol(1e-12));
  std::vector<oracle::Body> bodies;
  for (const auto& i : inst) bodies.push_back({discretize_boundary(example_shape(), i.rotation), i.center});
  const auto ref = oracle::solve_layered_monolithic(L, contour, bodies, example_shape().kp);
  const Vec2 probes[] = {{0.0, 0.3},   {-2.0, 1.5},  {3.0, 0.05},  {1.0, 2.0},   {-0.5, -0.5},
                         {1.5, -1.0},  {-2.5, -2.5}, {0.0, -3.5},  {2.0, -4.7},  {-1.0, -4.0},
                         {0.0, -2.35}, {-0.1, -2.8}, {0.55, -2.2}, {0.0, -5.5},  {2.0, -7.0},
                         {-3.0, -6.0}, {-0.35, -2.1}, {0.3, -2.6}, {-0.28, -2.05}, {0.36, -2.62}};
  double worst = 0.0;
  for (const Vec2 x : probes) {
    const cplx b = oracle::layered_oracle_field(ref, x);
    worst = std::max(worst, std::abs(eval_total_field(pb, sol, x) - b) / std::max(1e-3, std::abs(b)));
  }
  r.pass = worst <= 1e-6;
  r.detail = fmt("max rel field diff %.2e at 20 probes (limit 1e-6), %d GMRES iterations", worst, sol.iterations);
  return r;
}

CheckResult path_equivalence(const std::filesystem::path& scenes) {
  auto r = named(5, "Direct vs NUFFT coupling paths");
  const auto cfg = load_scene(scenes / "example1.scene");
  auto model = std::make_shared<const ParticleModel>(build_particle_model(cfg.shape, cfg.layers.k2, cfg.p, {}, nullptr, false));
  const auto inst = place_particles(cfg.region, cfg.M, model->R, cfg.seed);
  const auto contour = build_contour(cfg.layers, cfg.contour);
  const LayeredProblem direct(cfg.layers, contour, inst, model, CouplingPath::Direct);
  const LayeredProblem nufft(cfg.layers, contour, inst, model, CouplingPath::Nufft);
  const Solution sd = solve_layered_scene(direct, gmres_tol(1e-10));
  const Solution sn = solve_layered_scene(nufft, gmres_tol(1e-10));
  const auto& ctx = direct.coupling();
  const double c_err = weighted_local_error(ctx.sommerfeld_to_local_nufft(sd.densities),
                                            ctx.sommerfeld_to_local_direct(sd.densities), inst.size(),
                                            cfg.p, cfg.layers.k2, model->R);
  const double b_err = update_error(ctx.multipole_to_sommerfeld_nufft(sd.beta), ctx.multipole_to_sommerfeld_direct(sd.beta));
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ux(-20.0, 20.0), uy(-34.0, 3.0);
  double field = 0.0;
  int probes = 0;
  while (probes < 20) {
    const Vec2 x{ux(rng), uy(rng)};
    if (direct.locate(x).region == Region::EnclosingDisk) continue;
    field = std::max(field, std::abs(eval_total_field(direct, sd, x) - eval_total_field(nufft, sn, x)));
    ++probes;
  }
  r.pass = c_err <= 1e-8 && b_err <= 1e-8 && field <= 1e-7;
  r.detail = fmt("M = %d: local coeff %.2e, spectral update %.2e (limit 1e-8), field %.2e at 20 probes (limit 1e-7)",
                 cfg.M, c_err, b_err, field);
  return r;
}

double best_time(const std::function<void()>& f, int reps) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    f();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

CheckResult crossover(const std::filesystem::path& scenes) {
  auto r = named(6, "Coupling crossover at M = 5000");
  const auto cfg = load_scene(scenes / "example1_full.scene");
  const auto model = build_particle_model(cfg.shape, cfg.layers.k2, cfg.p, {}, nullptr, false);
  auto inst = place_particles(cfg.region, cfg.M, model.R, cfg.seed);
  for (auto& i : inst) i.R = model.R;
  const auto contour = build_contour(cfg.layers, cfg.contour);
  const InterfaceSolver solver(contour, cfg.layers);
  const CouplingContext ctx(solver, inst, cfg.p);
  std::mt19937_64 rng(21);
  const CVector beta = scattered_beta(model.S, inst.size(), rng);
  const auto up = ctx.multipole_to_sommerfeld_direct(beta);
  const auto rhs = up.rhs(solver);
  const auto dens = solver.solve(&rhs);
  SpectralUpdate sink;
  CVector local;
  const double b_direct = best_time([&] { sink = ctx.multipole_to_sommerfeld_direct(beta); }, 3);
  const double b_nufft = best_time([&] { sink = ctx.multipole_to_sommerfeld_nufft(beta); }, 3);
  const double c_direct = best_time([&] { local = ctx.sommerfeld_to_local_direct(dens); }, 3);
  const double c_nufft = best_time([&] { local = ctx.sommerfeld_to_local_nufft(dens); }, 3);
  const double rb = b_direct / b_nufft, rc = c_direct / c_nufft;
  r.pass = rb >= 1.5 && rc >= 1.5;
  r.detail = fmt("N_S = %zu, p = %d: multipole-to-Sommerfeld %.3f s vs %.3f s (%.2fx), Sommerfeld-to-local %.3f s vs %.3f s (%.2fx), floor 1.5x",
                 contour.size(), cfg.p, b_direct, b_nufft, rb, c_direct, c_nufft, rc);
  return r;
}

CheckResult end_to_end(const std::filesystem::path& scenes) {
  auto r = named(7, "End-to-end Example-1 analogue");
  auto cfg = load_scene(scenes / "example1.scene");
  auto model = std::make_shared<const ParticleModel>(build_particle_model(cfg.shape, cfg.layers.k2, cfg.p));
  const auto all = place_particles(cfg.region, 1000, model->R, cfg.seed);
  const auto contour = build_contour(cfg.layers, cfg.contour);
  auto subset = [&](int M) { return std::vector<ParticleInstance>(all.begin(), all.begin() + M); };
  const GmresConfig g = gmres_tol(1e-6);

  const LayeredProblem p500(cfg.layers, contour, subset(500), model, cfg.path);
  const auto t0 = Clock::now();
  const Solution s500 = solve_layered_scene(p500, g);
  const double solve_s = seconds_since(t0);
  const double jump = interface_jump(p500, s500, cfg.region.x0, cfg.region.x1, 50);
  double trace = 0.0;
  for (std::size_t m = 0; m < 500; m += 50) {
    const auto t = boundary_traces(p500, s500, m);
    for (int i = 0; i < 32; ++i) {
      const int node = i * int(t.nodes.size()) / 32;
      trace = std::max(trace, std::abs(t.exterior[node] - t.interior[node]));
    }
  }
  const Solution s100 = solve_layered_scene(LayeredProblem(cfg.layers, contour, subset(100), model, cfg.path), g);
  const Solution s1000 = solve_layered_scene(LayeredProblem(cfg.layers, contour, subset(1000), model, cfg.path), g);
  auto homog = cfg.layers;
  homog.k1 = homog.k3 = homog.k2;
  const Solution h500 = solve_layered_scene(
      LayeredProblem(homog, build_contour(homog, cfg.contour), subset(500), model, cfg.path), g);
  const bool trend = s100.iterations <= s500.iterations && s500.iterations <= s1000.iterations;
  const bool layered = s500.iterations >= h500.iterations;
  r.pass = s500.converged && s500.residual <= 1e-6 && jump <= 1e-5 && trace <= 1e-5 && trend && layered;
  r.detail = fmt("M = 500: residual %.2e in %d iterations (%.1f s); interface jump %.2e, boundary jump %.2e (limit 1e-5); "
                 "iterations M = 100/500/1000: %d/%d/%d; homogeneous M = 500: %d",
                 s500.residual, s500.iterations, solve_s, jump, trace, s100.iterations, s500.iterations,
                 s1000.iterations, h500.iterations);
  return r;
}

CheckResult properties() {
  auto r = named(8, "Property suites");
  // Wronskian J_n Y_n' - J_n' Y_n = 2 / (pi z).
  double wr = 0.0;
  for (int n : {0, 1, 2, 5, 10, 20})
    for (cplx z : {cplx(0.1), cplx(1.0), cplx(3.7), cplx(10.0), cplx(25.0), cplx(2.0, 1.0), cplx(0.5, 3.0)}) {
      const cplx yp = 0.5 * (numerics::bessel_y(n - 1, z) - numerics::bessel_y(n + 1, z));
      const cplx w = numerics::bessel_j(n, z) * yp - numerics::bessel_j_prime(n, z) * numerics::bessel_y(n, z);
      const cplx ref = 2.0 / (kPi * z);
      wr = std::max(wr, std::abs(w - ref) / std::abs(ref));
    }
  // NUFFT against direct sums at the requested tolerance.
  double nufft_ratio = 0.0;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> ux(0.0, kTwoPi);
  std::normal_distribution<double> g;
  for (double tol : {1e-6, 1e-9, 1e-12}) {
    std::vector<double> x(200);
    CVector c(200), f(128);
    for (auto& v : x) v = ux(rng);
    for (auto& v : c) v = {g(rng), g(rng)};
    for (auto& v : f) v = {g(rng), g(rng)};
    const int kmin = -64;
    const auto t1 = numerics::nufft_1d(x, c, kmin, 128, numerics::NufftType::Type1, tol);
    const auto t2 = numerics::nufft_1d(x, f, kmin, 128, numerics::NufftType::Type2, tol);
    double n1 = 0.0, n2 = 0.0, e1 = 0.0, e2 = 0.0;
    for (const auto& v : c) n1 += std::abs(v);
    for (const auto& v : f) n2 += std::abs(v);
    for (int k = 0; k < 128; ++k) {
      cplx s = 0.0;
      for (int j = 0; j < 200; ++j) s += c[j] * std::exp(kI * (double(kmin + k) * x[j]));
      e1 = std::max(e1, std::abs(s - t1[k]));
    }
    for (int j = 0; j < 200; ++j) {
      cplx s = 0.0;
      for (int k = 0; k < 128; ++k) s += f[k] * std::exp(kI * (double(kmin + k) * x[j]));
      e2 = std::max(e2, std::abs(s - t2[j]));
    }
    nufft_ratio = std::max({nufft_ratio, e1 / (tol * n1), e2 / (tol * n2)});
  }
  // M2L against a circle projection of the translated field.
  double m2l_err = 0.0;
  {
    const cplx k = 3.0;
    const double R = 0.2;
    const int p = 10;
    const auto S = scattering_matrix_disk(R / 1.1, k, 2.0, p);
    for (int trial = 0; trial < 20; ++trial) {
      ExpansionVector src(ExpansionKind::Multipole, p, {0.1, -0.3}, k);
      CVector xi(2 * p + 1);
      for (auto& v : xi) v = {g(rng), g(rng)};
      src.coefficients() = S.apply(xi);
      const double a = ux(rng);
      const Vec2 tc = src.center() + 3.0 * R * Vec2{std::cos(a), std::sin(a)};
      const auto loc = m2l(src, tc, 40, R, R);
      double err = 0.0, mag = 0.0;
      for (int i = 0; i < 50; ++i) {
        const double th = kTwoPi * i / 50;
        const Vec2 x = tc + R * Vec2{std::cos(th), std::sin(th)};
        const cplx ref = src.evaluate(x);
        err = std::max(err, std::abs(loc.evaluate(x) - ref));
        mag = std::max(mag, std::abs(ref));
      }
      m2l_err = std::max(m2l_err, err / mag);
    }
  }
  // Lossless unitarity of I + 2S.
  const auto S = scattering_matrix_nystrom(discretize_boundary(example_shape()), 3.0, 2.0, 10, 0.176);
  const int m = S.dim();
  Eigen::MatrixXcd U(m, m);
  for (int l = 0; l < m; ++l)
    for (int n = 0; n < m; ++n) U(l, n) = (l == n ? 1.0 : 0.0) + 2.0 * S.entries[l * m + n];
  const double unit = (U.adjoint() * U - Eigen::MatrixXcd::Identity(m, m)).norm();
  // Reported GMRES residual against a recomputation.
  LayerStack L;
  L.k1 = 1.0;
  L.k2 = 3.0;
  L.k3 = 1.0;
  L.d = 8.0;
  L.source = {1.0, 1.0};
  auto model = std::make_shared<const ParticleModel>(build_particle_model(example_shape(), 3.0, 10, {}, nullptr, false));
  const LayeredProblem pb(L, build_contour(L), place_particles({-2.0, 2.0, -5.0, -1.5}, 20, model->R, 4), model);
  const Solution sol = solve_layered_scene(pb, gmres_tol(1e-8));
  const double res = std::abs(sol.residual - schur_residual(pb, sol.beta));

  r.pass = wr <= 1e-12 && nufft_ratio <= 1.0 && m2l_err <= 1e-9 && unit <= 1e-6 && res <= 1e-12;
  r.detail = fmt("Wronskian %.2e (1e-12); NUFFT err/(tol |c|_1) %.2f (<= 1); M2L field %.2e (1e-9); |U*U - I| %.2e (1e-6); "
                 "GMRES residual recomputation %.2e (1e-12)",
                 wr, nufft_ratio, m2l_err, unit, res);
  return r;
}

struct Criterion {
  int id;
  double limit_seconds;  // 0: none
  bool fast;
  std::function<CheckResult()> run;
};

}  // namespace

std::vector<CheckResult> run(Level level, const std::filesystem::path& scenes, std::ostream& out,
                             const std::vector<int>& only) {
  const std::vector<Criterion> all{
      {1, 5.0, true, sommerfeld_identity},
      {2, 30.0, true, disk_cross_validation},
      {3, 10.0, true, degenerations},
      {4, 300.0, true, small_scene_oracle},
      {5, 120.0, false, [&] { return path_equivalence(scenes); }},
      {6, 0.0, false, [&] { return crossover(scenes); }},
      {7, 900.0, false, [&] { return end_to_end(scenes); }},
      {8, 0.0, true, properties},
  };
  std::vector<CheckResult> results;
  for (const auto& c : all) {
    if (level == Level::Fast && !c.fast) continue;
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = Clock::now();
    CheckResult r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r.id = c.id;
      r.name = "criterion " + std::to_string(c.id);
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = seconds_since(t0);
    std::string timing = fmt("%.1f s", r.seconds);
    if (c.limit_seconds > 0.0) {
      timing += fmt(" (limit %.0f s)", c.limit_seconds);
      if (r.seconds > c.limit_seconds) r.pass = false;
    }
    out << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ". " << r.name << ": " << r.detail << "; " << timing
        << std::endl;
    results.push_back(r);
  }
  return results;
}

}  // namespace layerscatter::selftest
