#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <random>

#include "layerscatter/coupling.hpp"
#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/particle.hpp"

using namespace layerscatter;

namespace {

LayerStack example_layers() {
  LayerStack l;
  l.k1 = 1.0;
  l.k2 = 3.0;
  l.k3 = 1.0;
  l.d = 32.0;
  l.source = {1.0, 1.0};
  return l;
}

// Jittered lattice placement inside [x0,x1] x [y0,y1].
std::vector<ParticleInstance> scatter(std::mt19937_64& rng, int M, double R, double x0, double x1,
                                      double y0, double y1) {
  const double pitch = 2.6 * R;
  const int nx = int((x1 - x0 - 2 * R) / pitch) + 1;
  const int ny = int((y1 - y0 - 2 * R) / pitch) + 1;
  REQUIRE(nx * ny >= M);
  std::vector<int> cells(nx * ny);
  for (int i = 0; i < nx * ny; ++i) cells[i] = i;
  std::shuffle(cells.begin(), cells.end(), rng);
  std::uniform_real_distribution<double> u(-0.15 * R, 0.15 * R), rot(0.0, kTwoPi);
  std::vector<ParticleInstance> out;
  for (int i = 0; i < M; ++i) {
    const int cx = cells[i] % nx, cy = cells[i] / nx;
    ParticleInstance p;
    p.center = {x0 + R + cx * pitch + u(rng), y0 + R + cy * pitch + u(rng)};
    p.center.x = std::clamp(p.center.x, x0 + R, x1 - R);
    p.center.y = std::clamp(p.center.y, y0 + R, y1 - R);
    p.rotation = rot(rng);
    p.R = R;
    out.push_back(p);
  }
  return out;
}

CVector random_beta(std::mt19937_64& rng, std::size_t M, int p, cplx k) {
  const auto S = scattering_matrix_disk(0.16, k, 2.0, p);
  std::normal_distribution<double> g;
  const int np = 2 * p + 1;
  CVector beta(M * np);
  for (std::size_t m = 0; m < M; ++m)
    for (int n = -p; n <= p; ++n) beta[m * np + n + p] = S.at(n, n) * cplx(g(rng), g(rng));
  return beta;
}

// Densities with rich evanescent content: incident source plus multipole sources.
SpectralDensities rich_densities(const CouplingContext& ctx, std::mt19937_64& rng) {
  const auto beta = random_beta(rng, ctx.num_instances(), ctx.order(), ctx.solver().layers().k2);
  const auto up = ctx.multipole_to_sommerfeld_direct(beta);
  const auto rhs = up.rhs(ctx.solver());
  return ctx.solver().solve(&rhs);
}

double weighted_error(const CVector& a, const CVector& b, const CouplingContext& ctx) {
  const int p = ctx.order(), np = 2 * p + 1;
  double err = 0.0, scale = 0.0;
  for (std::size_t m = 0; m < ctx.num_instances(); ++m) {
    const cplx z = ctx.solver().layers().k2 * ctx.instances()[m].R;
    double e = 0.0, s = 0.0;
    for (int n = -p; n <= p; ++n) {
      const double j = std::abs(numerics::bessel_j(std::abs(n), z));
      e += std::abs(a[m * np + n + p] - b[m * np + n + p]) * j;
      s += std::abs(b[m * np + n + p]) * j;
    }
    err = std::max(err, e);
    scale = std::max(scale, s);
  }
  return err / scale;
}

double update_error(const SpectralUpdate& a, const SpectralUpdate& b) {
  double err = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    err = std::max({err, std::abs(a.plus[j] - b.plus[j]), std::abs(a.minus[j] - b.minus[j])});
    scale = std::max({scale, std::abs(b.plus[j]), std::abs(b.minus[j])});
  }
  return err / scale;
}

cplx eval_local(const CVector& alpha, std::size_t m, int p, cplx k, Vec2 c, Vec2 x) {
  ExpansionVector e(ExpansionKind::Local, p, c, k);
  for (int n = -p; n <= p; ++n) e[n] = alpha[m * (2 * p + 1) + n + p];
  return e.evaluate(x);
}

}  // namespace

TEST_CASE("sommerfeld-to-local direct reproduces the middle-layer field") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::vector<ParticleInstance> inst(3);
  inst[0].center = {0.4, -1.5};
  inst[1].center = {-3.0, -12.0};
  inst[2].center = {6.0, -30.5};
  for (auto& i : inst) i.R = 0.3;
  const int p = 10;
  const CouplingContext ctx(solver, inst, p);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2; ++trial) {
    const auto dens = trial == 0 ? solver.solve() : rich_densities(ctx, rng);
    const auto alpha = ctx.sommerfeld_to_local_direct(dens);
    double worst = 0.0;
    for (std::size_t m = 0; m < inst.size(); ++m) {
      const Vec2 c = inst[m].center;
      const cplx u0 = eval_middle_layer(dens, solver, c).value;
      const double scale = std::abs(u0) + 1e-300;
      worst = std::max(worst, std::abs(eval_local(alpha, m, p, 3.0, c, c) - u0) / scale);
      for (int i = 0; i < 32; ++i) {
        const double th = kTwoPi * i / 32;
        const Vec2 x = c + inst[m].R * Vec2{std::cos(th), std::sin(th)};
        const cplx ref = eval_middle_layer(dens, solver, x).value;
        worst = std::max(worst, std::abs(eval_local(alpha, m, p, 3.0, c, x) - ref) / scale);
      }
    }
    MESSAGE("trial " << trial << " worst relative " << worst);
    CHECK(worst <= 1e-9);
  }
  SpectralDensities zero;
  zero.values.assign(contour.size(), Vec4{});
  for (const auto& a : ctx.sommerfeld_to_local_direct(zero)) CHECK(a == cplx(0.0));
}

TEST_CASE("interpolation grid against direct evaluation") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::mt19937_64 rng(5);
  const auto inst = scatter(rng, 60, 0.176, -8.0, 8.0, -30.7, -1.3);
  const CouplingContext ctx(solver, inst, 10);
  MESSAGE("x step " << ctx.x_step() << " box height " << ctx.box_height());
  const auto dens = rich_densities(ctx, rng);
  const auto grid = ctx.build_interp_grid(dens);

  double scale = 0.0;
  for (const auto& v : grid.value) scale = std::max(scale, std::abs(v));
  std::uniform_int_distribution<int> col(0, grid.nx - 1);
  std::uniform_int_distribution<int> row(0, int(grid.rows()) - 1);
  double node_err = 0.0;
  for (int t = 0; t < 100;) {
    const int r = row(rng);
    if (!grid.active[r / grid.order]) continue;
    const int c = col(rng);
    const Vec2 x{grid.column_x(c), grid.row_y(r)};
    const auto ref = eval_middle_layer(dens, solver, x, true);
    const std::size_t i = std::size_t(r) * grid.nx + c;
    node_err = std::max({node_err, std::abs(grid.value[i] - ref.value),
                         std::abs(grid.dx[i] - ref.dx) / 3.0, std::abs(grid.dy[i] - ref.dy) / 3.0});
    ++t;
  }
  MESSAGE("node error " << node_err / scale);
  CHECK(node_err / scale <= 1e-11);

  double off_err = 0.0;
  std::uniform_real_distribution<double> ang(0.0, kTwoPi), rad(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto& in = inst[t % inst.size()];
    const double r = in.R * std::sqrt(rad(rng)), th = ang(rng);
    const Vec2 x = in.center + r * Vec2{std::cos(th), std::sin(th)};
    const auto ref = eval_middle_layer(dens, solver, x, true);
    const auto s = grid.sample(x);
    off_err = std::max({off_err, std::abs(s.value - ref.value), std::abs(s.dx - ref.dx) / 3.0,
                        std::abs(s.dy - ref.dy) / 3.0});
  }
  MESSAGE("off-node error " << off_err / scale);
  CHECK(off_err / scale <= 1e-10);

  SpectralDensities zero;
  zero.values.assign(contour.size(), Vec4{});
  const auto zg = ctx.build_interp_grid(zero);
  CHECK(std::all_of(zg.value.begin(), zg.value.end(), [](cplx v) { return v == 0.0; }));
  CHECK(std::all_of(zg.dy.begin(), zg.dy.end(), [](cplx v) { return v == 0.0; }));
}

TEST_CASE("sommerfeld-to-local NUFFT path agrees with the direct path") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::mt19937_64 rng(21);
  const auto inst = scatter(rng, 100, 0.176, -20.0, 20.0, -30.5, -1.5);
  const CouplingContext ctx(solver, inst, 10);
  for (int trial = 0; trial < 2; ++trial) {
    const auto dens = trial == 0 ? solver.solve() : rich_densities(ctx, rng);
    const auto direct = ctx.sommerfeld_to_local_direct(dens);
    const auto fast = ctx.sommerfeld_to_local_nufft(dens);
    const double err = weighted_error(fast, direct, ctx);
    MESSAGE("trial " << trial << " weighted error " << err);
    CHECK(err <= 1e-8);
  }
}

TEST_CASE("robust projection near a Bessel zero") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  // First zero of J_3.
  const double j31 = 6.380161895923983;
  std::vector<ParticleInstance> inst(1);
  inst[0].R = (j31 + 5e-4) / 3.0;
  inst[0].center = {0.5, -12.0};
  const int p = 10;
  const CouplingContext ctx(solver, inst, p);
  std::mt19937_64 rng(8);
  const auto dens = rich_densities(ctx, rng);
  const auto direct = ctx.sommerfeld_to_local_direct(dens);
  const auto grid = ctx.build_interp_grid(dens);
  const auto fast = ctx.sommerfeld_to_local_nufft(grid);
  double amax = 0.0;
  for (const auto& a : direct) amax = std::max(amax, std::abs(a));
  double robust = 0.0;
  for (int n = -p; n <= p; ++n) robust = std::max(robust, std::abs(fast[n + p] - direct[n + p]));
  // The bare division by J_3(k R) for comparison.
  const int ns = ctx.circle_samples();
  cplx u3 = 0.0;
  for (int i = 0; i < ns; ++i) {
    const double phi = kTwoPi * i / ns;
    const Vec2 x = inst[0].center + inst[0].R * Vec2{std::cos(phi), std::sin(phi)};
    u3 += grid.sample(x).value * std::exp(-kI * (3.0 * phi));
  }
  u3 /= double(ns);
  const cplx bare = u3 / numerics::bessel_j(3, 3.0 * inst[0].R);
  const double bare_err = std::abs(bare - direct[3 + p]) / amax;
  MESSAGE("robust " << robust / amax << " bare " << bare_err);
  CHECK(robust / amax <= 1e-8);
  CHECK(bare_err > robust / amax);
}

TEST_CASE("single-mode projection equals the centre value") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::vector<ParticleInstance> inst(1);
  inst[0].R = 0.2;
  inst[0].center = {-0.7, -2.0};
  const CouplingContext ctx(solver, inst, 0);
  const auto dens = solver.solve();
  const auto a = ctx.sommerfeld_to_local_nufft(dens);
  const cplx u0 = eval_middle_layer(dens, solver, inst[0].center).value;
  CHECK(std::abs(a[0] - u0) <= 1e-9 * std::abs(u0));
}

TEST_CASE("multipole-to-sommerfeld reconstructs Hankel functions on the interfaces") {
  const auto layers = example_layers();
  const auto params = contour_for_accuracy(layers, 2.0, 8.0, 1e-13);
  const auto contour = build_contour(layers, params);
  const InterfaceSolver solver(contour, layers);
  std::vector<ParticleInstance> inst(1);
  inst[0].R = 0.176;
  inst[0].center = {0.3, -2.5};
  const int p = 4;
  const CouplingContext ctx(solver, inst, p);
  const cplx k = layers.k2;
  for (int n : {0, 1, -1, 3, -4}) {
    CVector beta(2 * p + 1, 0.0);
    beta[n + p] = 1.0;
    const auto up = ctx.multipole_to_sommerfeld_direct(beta);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double x = -4.0 + 8.0 * i / 19.0;
      for (double y : {0.0, -layers.d}) {
        cplx u = 0.0;
        for (std::size_t j = 0; j < contour.size(); ++j) {
          const cplx lam = contour.nodes[j];
          const cplx g = solver.gamma2(j);
          const cplx amp = y == 0.0 ? up.plus[j] : up.minus[j];
          u += contour.weights[j] / (4.0 * kPi) / g * amp * std::exp(kI * lam * (x - layers.source.x));
        }
        const Vec2 r = Vec2{x, y} - inst[0].center;
        const cplx ref = numerics::hankel1(n, k * norm(r)) * std::exp(kI * (n * angle(r)));
        worst = std::max(worst, std::abs(u - ref) / std::abs(ref));
      }
    }
    MESSAGE("n = " << n << " worst relative " << worst);
    CHECK(worst <= 1e-8);
  }
}

TEST_CASE("multipole-to-sommerfeld NUFFT path agrees with the direct path") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::mt19937_64 rng(33);
  const auto inst = scatter(rng, 100, 0.176, -20.0, 20.0, -30.5, -1.5);
  const CouplingContext ctx(solver, inst, 10);
  MESSAGE("snap step " << ctx.snap_step() << " snap order " << ctx.snap_order());
  const auto beta = random_beta(rng, inst.size(), 10, 3.0);
  const auto direct = ctx.multipole_to_sommerfeld_direct(beta);
  const auto fast = ctx.multipole_to_sommerfeld_nufft(beta);
  const double err = update_error(fast, direct);
  MESSAGE("relative error " << err);
  CHECK(err <= 1e-8);

  const auto zero = ctx.multipole_to_sommerfeld_nufft(CVector(beta.size(), 0.0));
  CHECK(std::all_of(zero.plus.begin(), zero.plus.end(), [](cplx v) { return v == 0.0; }));
  CHECK(std::all_of(zero.minus.begin(), zero.minus.end(), [](cplx v) { return v == 0.0; }));

  const auto beta2 = random_beta(rng, inst.size(), 10, 3.0);
  CVector comb(beta.size());
  const cplx a(0.3, -1.2), b(2.0, 0.5);
  for (std::size_t i = 0; i < beta.size(); ++i) comb[i] = a * beta[i] + b * beta2[i];
  const auto u1 = ctx.multipole_to_sommerfeld_nufft(beta);
  const auto u2 = ctx.multipole_to_sommerfeld_nufft(beta2);
  const auto uc = ctx.multipole_to_sommerfeld_nufft(comb);
  double lin = 0.0, scale = 0.0;
  for (std::size_t j = 0; j < uc.size(); ++j) {
    lin = std::max(lin, std::abs(uc.plus[j] - a * u1.plus[j] - b * u2.plus[j]));
    scale = std::max(scale, std::abs(uc.plus[j]));
  }
  CHECK(lin / scale <= 1e-13);

  const auto rhs = direct.rhs(solver);
  CHECK(rhs.size() == contour.size());
  CHECK(rhs[7][2] == direct.plus[7]);
  CHECK(rhs[7][3] == -direct.minus[7]);
}

TEST_CASE("instance on a snap node") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  CouplingOptions opt;
  opt.snap_step = 0.25;
  std::vector<ParticleInstance> inst(2);
  inst[0].center = {layers.source.x + 3 * 0.25, -8 * 0.25};
  inst[1].center = {layers.source.x - 5 * 0.25, -40 * 0.25};
  for (auto& i : inst) i.R = 0.176;
  const CouplingContext ctx(solver, inst, 10, opt);
  CHECK(ctx.snap_order() == 10);
  std::mt19937_64 rng(2);
  const auto beta = random_beta(rng, inst.size(), 10, 3.0);
  const double err =
      update_error(ctx.multipole_to_sommerfeld_nufft(beta), ctx.multipole_to_sommerfeld_direct(beta));
  MESSAGE("on-node error " << err);
  CHECK(err <= 1e-11);
}

TEST_CASE("randomized scenes: both paths of both blocks agree") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::mt19937_64 rng(404);
  std::uniform_int_distribution<int> count(1, 200);
  std::uniform_real_distribution<double> wid(3.0, 25.0);
  double worst_c = 0.0, worst_b = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int M = count(rng);
    const double w = wid(rng);
    const auto inst = scatter(rng, M, 0.176, -w, w, -30.5, -1.5);
    const CouplingContext ctx(solver, inst, 10);
    const auto beta = random_beta(rng, inst.size(), 10, 3.0);
    worst_b = std::max(worst_b, update_error(ctx.multipole_to_sommerfeld_nufft(beta),
                                             ctx.multipole_to_sommerfeld_direct(beta)));
    const auto dens = rich_densities(ctx, rng);
    worst_c = std::max(worst_c, weighted_error(ctx.sommerfeld_to_local_nufft(dens),
                                               ctx.sommerfeld_to_local_direct(dens), ctx));
  }
  MESSAGE("worst C " << worst_c << " worst B " << worst_b);
  CHECK(worst_c <= 1e-8);
  CHECK(worst_b <= 1e-8);
}

TEST_CASE("sommerfeld-to-local is invariant under grid refinement") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::mt19937_64 rng(77);
  const auto inst = scatter(rng, 40, 0.176, -6.0, 6.0, -30.5, -1.5);
  const CouplingContext base(solver, inst, 10);
  CouplingOptions fine;
  fine.x_step = base.x_step() / 2;
  fine.box_height = base.box_height() / 2;
  const CouplingContext refined(solver, inst, 10, fine);
  const auto dens = rich_densities(base, rng);
  const double change =
      weighted_error(refined.sommerfeld_to_local_nufft(dens), base.sommerfeld_to_local_nufft(dens), base);
  MESSAGE("refinement change " << change);
  CHECK(change <= 1e-9);
}

TEST_CASE("coupling rejects instances crossing an interface") {
  const auto layers = example_layers();
  const auto contour = build_contour(layers);
  const InterfaceSolver solver(contour, layers);
  std::vector<ParticleInstance> inst(1);
  inst[0].R = 0.3;
  inst[0].center = {0.0, -0.2};
  CHECK_THROWS_AS(CouplingContext(solver, inst, 4), ConfigError);
  inst[0].center = {0.0, -5.0};
  const CouplingContext ctx(solver, inst, 4);
  CHECK_FALSE(ctx.use_nufft(CouplingPath::Auto));
  CHECK(ctx.use_nufft(CouplingPath::Nufft));
}
