#include "layerscatter/gmres.hpp"

#include <cmath>
#include <sstream>

#include "layerscatter/error.hpp"

namespace layerscatter {
namespace {

double norm2(const CVector& v) {
  double s = 0.0;
  for (cplx c : v) s += std::norm(c);
  return std::sqrt(s);
}

cplx dotc(const CVector& a, const CVector& b) {
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
  return s;
}

double residual(const LinearOperator& apply, const CVector& rhs, const CVector& x, CVector& r) {
  apply(x, r);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = rhs[i] - r[i];
  return norm2(r);
}

}  // namespace

void GmresConfig::validate() const {
  if (!(tol > 0.0)) throw ConfigError("gmres: tol must be positive");
  if (max_iterations < 1) throw ConfigError("gmres: max_iterations must be at least 1");
  if (restart < 1) throw ConfigError("gmres: restart must be at least 1");
}

GmresResult gmres(const LinearOperator& apply, const CVector& rhs, const GmresConfig& config,
                  const CVector* x0) {
  config.validate();
  const std::size_t n = rhs.size();
  GmresResult res;
  res.x = x0 ? *x0 : CVector(n, 0.0);
  if (res.x.size() != n) throw ConfigError("gmres: initial guess has the wrong size");
  const double bnorm = norm2(rhs);
  if (bnorm == 0.0) {
    res.x.assign(n, 0.0);
    res.history = {0.0};
    res.converged = true;
    return res;
  }

  CVector r(n);
  double rnorm = residual(apply, rhs, res.x, r);
  res.history.push_back(rnorm / bnorm);
  const int m = config.restart;
  std::vector<CVector> v(m + 1, CVector(n));
  std::vector<CVector> h(m + 1, CVector(m, 0.0));
  CVector cs(m), g(m + 1);
  std::vector<double> sn(m);
  CVector w(n);

  while (rnorm / bnorm > config.tol && res.iterations < config.max_iterations) {
    const double cycle_start = rnorm;
    for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / rnorm;
    std::fill(g.begin(), g.end(), 0.0);
    g[0] = rnorm;
    int j = 0;
    for (; j < m && res.iterations < config.max_iterations; ++j) {
      apply(v[j], w);
      for (int i = 0; i <= j; ++i) {
        const cplx hij = dotc(v[i], w);
        h[i][j] = hij;
        for (std::size_t q = 0; q < n; ++q) w[q] -= hij * v[i][q];
      }
      const double hn = norm2(w);
      h[j + 1][j] = hn;
      if (hn > 0.0)
        for (std::size_t q = 0; q < n; ++q) v[j + 1][q] = w[q] / hn;
      for (int i = 0; i < j; ++i) {
        const cplx t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
        h[i + 1][j] = -sn[i] * h[i][j] + std::conj(cs[i]) * h[i + 1][j];
        h[i][j] = t;
      }
      // [c s; -s conj(c)] with s real zeroes h[j+1][j] (which is real).
      const cplx a = h[j][j];
      const double b = std::abs(h[j + 1][j]);
      const double den = std::hypot(std::abs(a), b);
      if (den == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = std::conj(a) / den;
        sn[j] = b / den;
      }
      h[j][j] = cs[j] * a + sn[j] * h[j + 1][j];
      h[j + 1][j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++res.iterations;
      res.history.push_back(std::abs(g[j + 1]) / bnorm);
      if (std::abs(g[j + 1]) / bnorm <= config.tol || hn == 0.0) {
        ++j;
        break;
      }
    }
    // Back substitution for the j-dimensional least-squares problem.
    CVector y(j);
    for (int i = j - 1; i >= 0; --i) {
      cplx s = g[i];
      for (int q = i + 1; q < j; ++q) s -= h[i][q] * y[q];
      y[i] = s / h[i][i];
    }
    for (int i = 0; i < j; ++i)
      for (std::size_t q = 0; q < n; ++q) res.x[q] += y[i] * v[i][q];
    rnorm = residual(apply, rhs, res.x, r);
    if (rnorm / bnorm <= config.tol) break;
    if (cycle_start - rnorm < 1e-12 * cycle_start) {
      res.true_residual = rnorm / bnorm;
      if (config.throw_on_failure)
        throw SolverError("gmres stagnated at relative residual " + std::to_string(rnorm / bnorm),
                          res.history);
      return res;
    }
  }
  res.true_residual = rnorm / bnorm;
  res.converged = res.true_residual <= config.tol;
  if (!res.converged && config.throw_on_failure) {
    std::ostringstream msg;
    msg << "gmres did not converge in " << res.iterations << " iterations (relative residual "
        << res.true_residual << ")";
    throw SolverError(msg.str(), res.history);
  }
  return res;
}

}  // namespace layerscatter
