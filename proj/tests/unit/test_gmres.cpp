#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "layerscatter/error.hpp"
#include "layerscatter/gmres.hpp"

using namespace layerscatter;

namespace {

LinearOperator dense(const Eigen::MatrixXcd& a) {
  return [a](const CVector& in, CVector& out) {
    Eigen::Map<const Eigen::VectorXcd> x(in.data(), Eigen::Index(in.size()));
    out.resize(in.size());
    Eigen::Map<Eigen::VectorXcd>(out.data(), Eigen::Index(out.size())) = a * x;
  };
}

CVector random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  CVector v(n);
  for (auto& c : v) c = {g(rng), g(rng)};
  return v;
}

}  // namespace

TEST_CASE("identity converges in one iteration") {
  std::mt19937_64 rng(1);
  const auto b = random_vector(rng, 20);
  GmresConfig cfg;
  cfg.tol = 1e-12;
  const auto r = gmres([](const CVector& in, CVector& out) { out = in; }, b, cfg);
  CHECK(r.iterations == 1);
  CHECK(r.converged);
  for (int i = 0; i < 20; ++i) CHECK(std::abs(r.x[i] - b[i]) < 1e-14);
}

TEST_CASE("random well-conditioned system matches a direct solve") {
  std::mt19937_64 rng(7);
  const int n = 50;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(n, n) * 4.0;
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) += cplx(g(rng), g(rng)) / std::sqrt(double(n));
  const auto b = random_vector(rng, n);
  GmresConfig cfg;
  cfg.tol = 1e-13;
  const auto r = gmres(dense(a), b, cfg);
  const Eigen::VectorXcd ref = a.partialPivLu().solve(Eigen::Map<const Eigen::VectorXcd>(b.data(), n));
  double err = 0.0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::abs(r.x[i] - ref(i)));
  CHECK(err < 1e-10);
  CHECK(r.true_residual <= 1e-13);
  CHECK(std::abs(r.true_residual - r.history.back()) < 1e-12);
}

TEST_CASE("diagonal operator: iterations bounded by distinct eigenvalues") {
  const int n = 60;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
  const cplx eig[] = {1.0, cplx(2.0, 1.0), -3.0, cplx(0.5, -2.0), 7.0};
  for (int i = 0; i < n; ++i) a(i, i) = eig[i % 5];
  std::mt19937_64 rng(3);
  GmresConfig cfg;
  cfg.tol = 1e-12;
  const auto r = gmres(dense(a), random_vector(rng, n), cfg);
  CHECK(r.iterations <= 5);
  CHECK(r.converged);
}

TEST_CASE("restarts still converge and the history is monotone") {
  std::mt19937_64 rng(11);
  const int n = 80;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Identity(n, n) * 2.0;
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) += cplx(g(rng), g(rng)) / std::sqrt(double(n));
  GmresConfig cfg;
  cfg.tol = 1e-10;
  cfg.restart = 7;
  const auto r = gmres(dense(a), random_vector(rng, n), cfg);
  CHECK(r.converged);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1] * (1 + 1e-12));
}

TEST_CASE("zero rhs, failures and configuration errors") {
  GmresConfig cfg;
  const auto z = gmres([](const CVector& in, CVector& out) { out = in; }, CVector(5, 0.0), cfg);
  CHECK(z.iterations == 0);
  for (cplx c : z.x) CHECK(c == 0.0);

  // Cyclic shift: GMRES needs n iterations, so a small cap fails.
  const int n = 30;
  LinearOperator shift = [](const CVector& in, CVector& out) {
    out.resize(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[(i + 1) % in.size()] = in[i];
  };
  CVector b(n, 0.0);
  b[0] = 1.0;
  cfg.max_iterations = 5;
  cfg.tol = 1e-10;
  try {
    gmres(shift, b, cfg);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.history().size() == 6);
  }
  cfg.throw_on_failure = false;
  CHECK_FALSE(gmres(shift, b, cfg).converged);
  // Restart length 1 stagnates on the shift operator.
  cfg.max_iterations = 100;
  cfg.restart = 1;
  cfg.throw_on_failure = true;
  CHECK_THROWS_AS(gmres(shift, b, cfg), SolverError);

  GmresConfig bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
