#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "layerscatter/error.hpp"
#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/numerics/quadrature.hpp"
#include "layerscatter/particle.hpp"

using namespace layerscatter;

namespace {

ShapeParams example_shape(int n = 300) {
  ShapeParams s;
  s.a1 = 0.12;
  s.a2 = 0.04;
  s.a3 = 3;
  s.kp = 2.0;
  s.N = n;
  return s;
}

ShapeParams disk(double r, cplx kp, int n = 300) {
  ShapeParams s;
  s.a1 = r;
  s.a2 = 0.0;
  s.a3 = 0;
  s.kp = kp;
  s.N = n;
  return s;
}

double max_entry_diff(const ScatteringMatrix& a, const ScatteringMatrix& b) {
  double e = 0.0;
  for (std::size_t i = 0; i < a.entries.size(); ++i) e = std::max(e, std::abs(a.entries[i] - b.entries[i]));
  return e;
}

double max_abs(const ScatteringMatrix& a) {
  double e = 0.0;
  for (cplx v : a.entries) e = std::max(e, std::abs(v));
  return e;
}

cplx incident(cplx k, int n, Vec2 x) {
  return numerics::bessel_j(n, k * norm(x)) * std::exp(kI * (n * angle(x)));
}

}  // namespace

TEST_CASE("curve: degenerate circle and printed point") {
  const auto c = disk(0.3, 2.0);
  for (double t : {0.0, 0.7, 2.5, 5.9}) {
    const auto p = shape_curve(c, t);
    CHECK(p.speed == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(norm(p.pos) == doctest::Approx(0.3).epsilon(1e-15));
  }
  const auto p0 = shape_curve(example_shape(), 0.0);
  CHECK(p0.pos.x == doctest::Approx(0.16).epsilon(1e-15));
  CHECK(std::abs(p0.pos.y) < 1e-16);
}

TEST_CASE("curve: derivatives match finite differences and normals point outward") {
  ShapeParams s;
  s.a1 = 0.3;
  s.a2 = 0.1;
  s.a3 = 5;
  for (double t = 0.05; t < kTwoPi; t += 0.37) {
    const auto c = shape_curve(s, t);
    const double e = 1e-6;
    const auto a = shape_curve(s, t + e), b = shape_curve(s, t - e);
    CHECK(std::abs((a.pos.x - b.pos.x) / (2 * e) - c.tangent.x) < 1e-8);
    CHECK(std::abs((a.pos.y - b.pos.y) / (2 * e) - c.tangent.y) < 1e-8);
    CHECK(std::abs(norm(c.normal) - 1.0) < 1e-14);
    CHECK(std::abs(dot(c.normal, c.tangent)) < 1e-14);
    CHECK(s.contains(c.pos - 1e-6 * c.normal));
    CHECK_FALSE(s.contains(c.pos + 1e-6 * c.normal));
  }
}

TEST_CASE("boundary: arclength matches composite Gauss quadrature") {
  for (const auto& s : {example_shape(), disk(0.2, 2.0, 64)}) {
    const auto b = discretize_boundary(s, 0.4);
    double ref = 0.0;
    const int panels = 64;
    for (int p = 0; p < panels; ++p) {
      const auto q = numerics::gauss_legendre(20, p * kTwoPi / panels, (p + 1) * kTwoPi / panels);
      for (std::size_t i = 0; i < q.nodes.size(); ++i) ref += q.weights[i] * shape_curve(s, q.nodes[i]).speed;
    }
    CHECK(std::abs(b.arclength() - ref) < 1e-10);
    for (const auto& n : b.normals) CHECK(std::abs(norm(n) - 1.0) < 1e-14);
  }
}

TEST_CASE("shape validation") {
  auto s = example_shape();
  s.a2 = s.a1;
  CHECK_THROWS_AS(discretize_boundary(s), ConfigError);
  s = example_shape(32);
  CHECK_THROWS_AS(discretize_boundary(s), ConfigError);
  s = example_shape();
  s.a3 = -1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(example_shape().fingerprint() == example_shape().fingerprint());
  CHECK(example_shape().fingerprint() != example_shape(302).fingerprint());
}

TEST_CASE("zero contrast: block identity and closed-form densities") {
  const auto s = example_shape();
  const auto b = discretize_boundary(s);
  const auto a = assemble_muller(b, 2.0, 2.0);
  Eigen::MatrixXcd ref = Eigen::MatrixXcd::Identity(2 * b.N, 2 * b.N);
  ref.bottomRightCorner(b.N, b.N) *= -1.0;
  CHECK((a - ref).norm() == 0.0);
  const int p = 4;
  const auto rhs = incident_mode_rhs(b, 2.0, p);
  const auto d = factor_and_solve(a, rhs, p);
  for (int n = -p; n <= p; ++n)
    for (int i = 0; i < b.N; i += 17) {
      CHECK(std::abs(d.mu(i, n + p) + incident(2.0, n, b.nodes[i])) < 1e-15);
      // Normal derivative by central difference along the normal.
      const double e = 1e-6;
      const cplx dn = (incident(2.0, n, b.nodes[i] + e * b.normals[i]) -
                       incident(2.0, n, b.nodes[i] - e * b.normals[i])) / (2 * e);
      CHECK(std::abs(d.sigma(i, n + p) - dn) < 1e-8);
    }
  for (const auto& shape : {example_shape(), disk(0.2, 3.0)}) {
    ShapeParams z = shape;
    z.kp = 3.0;
    const auto bz = discretize_boundary(z);
    CHECK(max_abs(scattering_matrix_nystrom(bz, 3.0, 3.0, 10, 1.1 * z.circumradius())) < 1e-12);
  }
}

TEST_CASE("factor_and_solve: zero rhs and residuals") {
  const auto b = discretize_boundary(example_shape());
  const auto a = assemble_muller(b, 3.0, 2.0);
  const int p = 10;
  auto zero = factor_and_solve(a, Eigen::MatrixXcd::Zero(2 * b.N, 2 * p + 1), p);
  CHECK(zero.mu.norm() == 0.0);
  CHECK(zero.sigma.norm() == 0.0);
  const auto rhs = incident_mode_rhs(b, 3.0, p);
  const auto d = factor_and_solve(a, rhs, p);
  Eigen::MatrixXcd x(2 * b.N, 2 * p + 1);
  x << d.mu, d.sigma;
  for (int n = 0; n <= 2 * p; ++n)
    CHECK((a * x.col(n) - rhs.col(n)).norm() / rhs.col(n).norm() < 1e-12);
  CHECK_THROWS_AS(factor_and_solve(Eigen::MatrixXcd::Zero(8, 8), Eigen::MatrixXcd::Zero(8, 3), 1),
                  SolverError);
}

TEST_CASE("disk: Nystrom matches the analytic partial-wave solve") {
  for (auto [k2, kp] : {std::pair{3.0, 2.0}, std::pair{10.0, 2.0}}) {
    for (int p : {0, 5, 12}) {
      const auto b = discretize_boundary(disk(0.2, kp));
      const auto num = scattering_matrix_nystrom(b, k2, kp, p, 0.22);
      const auto ref = scattering_matrix_disk(0.2, k2, kp, p);
      CHECK(max_entry_diff(num, ref) < 1e-10);
      for (int l = -p; l <= p; ++l)
        for (int n = -p; n <= p; ++n)
          if (l != n) CHECK(std::abs(num.at(l, n)) < 1e-10);
    }
  }
}

TEST_CASE("disk: closed-form properties") {
  const auto s = scattering_matrix_disk(0.2, 3.0, 2.0, 10);
  for (int n = -10; n <= 10; ++n) CHECK(std::abs(std::abs(1.0 + 2.0 * s.at(n, n)) - 1.0) < 1e-10);
  CHECK(max_abs(scattering_matrix_disk(0.2, 3.0, 3.0, 10)) < 1e-14);
  // Decay beyond n = 2 k R.
  const auto big = scattering_matrix_disk(1.0, 3.0, 2.0, 20);
  for (int n = 6; n <= 20; ++n)
    CHECK(std::abs(big.at(n, n)) < std::pow(3.0 / n, n));
  const auto pec = scattering_matrix_pec_disk(0.2, 3.0, 10);
  for (int n = -10; n <= 10; ++n) CHECK(std::abs(std::abs(1.0 + 2.0 * pec.at(n, n)) - 1.0) < 1e-12);
  const double j0_zero = 2.404825557695773;
  CHECK(std::abs(scattering_matrix_pec_disk(j0_zero / 3.0, 3.0, 2).at(0, 0)) < 1e-14);
  // Dielectric disk approaches the sound-soft limit as |kp| grows with loss.
  double prev = 1e300;
  for (double kp : {5.0, 50.0, 500.0}) {
    const auto d = scattering_matrix_disk(0.2, 3.0, cplx(kp, kp), 3);
    const double e = std::abs(d.at(0, 0) - scattering_matrix_pec_disk(0.2, 3.0, 3).at(0, 0));
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("general shape: unitarity of I + 2S") {
  const auto b = discretize_boundary(example_shape());
  const auto s = scattering_matrix_nystrom(b, 3.0, 2.0, 10, 0.176);
  const int m = s.dim();
  Eigen::MatrixXcd u(m, m);
  for (int l = 0; l < m; ++l)
    for (int n = 0; n < m; ++n) u(l, n) = (l == n ? 1.0 : 0.0) + 2.0 * s.entries[l * m + n];
  CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(m, m)).norm() < 1e-6);
  CHECK(truncation_ratio(s) < 1e-8);
}

TEST_CASE("self-convergence: N and 2N agree") {
  const auto s300 = scattering_matrix_nystrom(discretize_boundary(example_shape(300)), 3.0, 2.0, 10, 0.176);
  const auto s600 = scattering_matrix_nystrom(discretize_boundary(example_shape(600)), 3.0, 2.0, 10, 0.176);
  CHECK(max_entry_diff(s300, s600) < 1e-12);
}

TEST_CASE("self-convergence order on a demanding shape") {
  ShapeParams s;
  s.a1 = 0.3;
  s.a2 = 0.1;
  s.a3 = 5;
  s.kp = cplx(6.0, 0.0);
  auto at = [&](int n) {
    s.N = n;
    return scattering_matrix_nystrom(discretize_boundary(s), 10.0, s.kp, 8, 0.44);
  };
  const auto ref = at(640);
  const double e1 = max_entry_diff(at(120), ref), e2 = max_entry_diff(at(240), ref);
  MESSAGE("errors " << e1 << " " << e2);
  CHECK((e2 < 1e-13 || e1 / e2 > std::pow(2.0, 16)));
}

TEST_CASE("far field: multipole expansion equals direct layer potentials") {
  const auto b = discretize_boundary(example_shape());
  PrecomputedDensities d;
  const double R = 0.176;
  const auto s = scattering_matrix_nystrom(b, 3.0, 2.0, 10, R, &d);
  for (double th : {0.0, 1.1, 2.9, 4.4}) {
    const Vec2 x{10 * R * std::cos(th), 10 * R * std::sin(th)};
    const cplx direct = layer_potential(b, d.sigma.col(10).data(), d.mu.col(10).data(), 3.0, x);
    cplx mp = 0.0;
    for (int l = -10; l <= 10; ++l)
      mp += s.at(l, 0) * numerics::hankel1(l, 3.0 * norm(x)) * std::exp(kI * (l * th));
    CHECK(std::abs(direct - mp) < 1e-9);
  }
}

TEST_CASE("transmission conditions hold for the reconstructed fields") {
  const auto b = discretize_boundary(example_shape());
  const int p = 3;
  const auto d = factor_and_solve(assemble_muller(b, 3.0, 2.0), incident_mode_rhs(b, 3.0, p), p);
  for (int n : {-3, 0, 2})
    for (int i = 0; i < b.N; i += 37) {
      const cplx* sg = d.sigma.col(n + p).data();
      const cplx* mu = d.mu.col(n + p).data();
      const cplx ext = incident(3.0, n, b.nodes[i]) + layer_potential_on_boundary(b, sg, mu, 3.0, i) + 0.5 * mu[i];
      const cplx in = layer_potential_on_boundary(b, sg, mu, 2.0, i) - 0.5 * mu[i];
      CHECK(std::abs(ext - in) < 1e-10);
    }
}

TEST_CASE("rotation") {
  const auto b = discretize_boundary(example_shape());
  const auto s = scattering_matrix_nystrom(b, 3.0, 2.0, 10, 0.176);
  CHECK(max_entry_diff(rotate_scattering_matrix(s, 0.0), s) == 0.0);
  CHECK(max_entry_diff(rotate_scattering_matrix(s, kTwoPi), s) < 1e-13);
  for (double th : {0.3, 2.0}) {
    const auto rb = discretize_boundary(example_shape(), th);
    const auto direct = scattering_matrix_nystrom(rb, 3.0, 2.0, 10, 0.176);
    CHECK(max_entry_diff(rotate_scattering_matrix(s, th), direct) < 1e-10);
  }
}

TEST_CASE("enclosing radius must cover the shape") {
  const auto b = discretize_boundary(example_shape());
  CHECK_THROWS_AS(scattering_matrix_nystrom(b, 3.0, 2.0, 4, 0.15), ConfigError);
}

TEST_CASE("cache file round trip and fingerprint handling") {
  const auto dir = std::filesystem::temp_directory_path() / "layerscatter_cache_test";
  std::filesystem::remove_all(dir);
  ModelBuildInfo info;
  const auto cold = build_particle_model(example_shape(), 3.0, 10, dir, &info);
  CHECK_FALSE(info.cache_hit);
  CHECK(std::filesystem::exists(info.cache_file));
  const auto warm = build_particle_model(example_shape(), 3.0, 10, dir, &info, false);
  CHECK(info.cache_hit);
  CHECK(warm.densities.N == 0);
  CHECK(max_entry_diff(cold.S, warm.S) == 0.0);
  CHECK(cold.S.R == doctest::Approx(1.1 * 0.16));

  auto other = example_shape(320);
  build_particle_model(other, 3.0, 10, dir, &info);
  CHECK(info.cache_rebuilt);
  CHECK(read_scattering_matrix(info.cache_file).fingerprint == other.fingerprint());

  {
    std::ofstream bad(info.cache_file, std::ios::binary | std::ios::trunc);
    bad << "LSSM";
  }
  CHECK_THROWS_AS(read_scattering_matrix(info.cache_file), ConfigError);
  build_particle_model(other, 3.0, 10, dir, &info);
  CHECK(info.cache_rebuilt);

  // Header layout: magic, version, p, R, k2, kp, fingerprint, entries.
  std::ifstream in(info.cache_file, std::ios::binary);
  in.seekg(0, std::ios::end);
  CHECK(std::size_t(in.tellg()) == 4 + 4 + 4 + 5 * 8 + 8 + 21 * 21 * 16);
  std::filesystem::remove_all(dir);
}
