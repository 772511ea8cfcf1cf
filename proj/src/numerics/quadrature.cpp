#include "layerscatter/numerics/quadrature.hpp"

#include <array>
#include <cmath>
#include <string>

#include "layerscatter/error.hpp"

namespace layerscatter::numerics {
namespace {

// Order-16 hybrid Gauss-trapezoidal correction for log singularities
// (j = 15 nodes, a = 14 excluded points). Obtained by solving the moment
// equations
//   sum_p w_p x_p^b        = -zeta(-b, a)
//   sum_p w_p x_p^b log x_p = zeta'(-b, a),   b = 0..14,
// with the Hurwitz zeta function, in 50-digit arithmetic.
constexpr int kAlpertExcluded = 14;
constexpr std::array<double, 15> kAlpertNodes = {
    0.0013366595559519256264, 0.0197903659444014041720, 0.0959682401348016854121,
    0.2884712479194736103875, 0.6619081800731032859926, 1.2729792563282637939597,
    2.1569767562918276392378, 3.3169973907804848440725, 4.7177589567461344273859,
    6.2852152609947266472392, 7.9123653244549552862213, 9.4716687620208436665562,
    10.841486240235341055540, 11.981060900251303533419, 12.999595251383030232872};
constexpr std::array<double, 15> kAlpertWeights = {
    0.0050949211251569773396, 0.0387021890592350046854, 0.1236249578793939825253,
    0.2723868310526525940416, 0.4841676723803785496520, 0.7440409505450366674007,
    1.0245761293794879849367, 1.2895920015394884042392, 1.4994928396150026234915,
    1.6173866707350409462009, 1.6152955242564029102862, 1.4819234071110196382767,
    1.2484716562085536783557, 1.0531401769207818436109, 1.0021040721923681949570};

}  // namespace

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw ConfigError("gauss_legendre: n must be >= 1");
  if (!(a < b)) throw ConfigError("gauss_legendre: interval must satisfy a < b");
  QuadratureRule rule;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) {
        p0 = 1.0;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        if (n == 1) p0 = 1.0;
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        break;
      }
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[n - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[n - 1 - i] = half * w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = mid;
  return rule;
}

AlpertRule alpert_weights(int n, int order) {
  if (order != 16)
    throw ConfigError("alpert_weights: unsupported order " + std::to_string(order) +
                      " (only 16 is tabulated)");
  if (n < 64) throw ConfigError("alpert_weights: N must be >= 64");
  AlpertRule rule;
  rule.order = order;
  rule.n = n;
  rule.h = kTwoPi / n;
  rule.excluded = kAlpertExcluded;
  rule.offsets = kAlpertNodes;
  rule.weights = kAlpertWeights;
  return rule;
}

}  // namespace layerscatter::numerics
