#pragma once

// Global Muller discretization of several inclusions in a homogeneous
// background: self blocks come from assemble_muller, cross blocks are the
// smooth exterior-wavenumber kernels sampled with the trapezoidal rule.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "layerscatter/numerics/bessel.hpp"
#include "layerscatter/particle.hpp"

namespace oracle {

using layerscatter::BoundaryDiscretization;
using layerscatter::cplx;
using layerscatter::kI;
using layerscatter::Vec2;

struct Body {
  BoundaryDiscretization boundary;  // body frame
  Vec2 center;

  Vec2 node(int i) const { return boundary.nodes[i] + center; }
};

struct FullKernels {
  cplx S, D, N, T;
};

inline FullKernels full_kernels(cplx k, Vec2 x, Vec2 nx, Vec2 y, Vec2 ny) {
  using layerscatter::dot;
  const Vec2 d = x - y;
  const double r = layerscatter::norm(d);
  cplx h0, h1;
  layerscatter::numerics::hankel1_01(k * r, h0, h1);
  const cplx g = 0.25 * kI * h0;
  const cplx g1 = -0.25 * kI * k * h1;
  const cplx g2 = -k * k * g - g1 / r;
  const double a = dot(d, nx), b = dot(d, ny);
  return {g, -g1 * b / r, g1 * a / r, -g2 * a * b / (r * r) + g1 * (-dot(nx, ny) / r + a * b / (r * r * r))};
}

// Unknowns per body: (mu, sigma). u_inc(x) and grad u_inc(x) are supplied in
// global coordinates.
struct MultibodySolution {
  std::vector<Eigen::VectorXcd> mu, sigma;
};

inline std::vector<int> body_offsets(const std::vector<Body>& bodies) {
  std::vector<int> off{0};
  for (const auto& b : bodies) off.push_back(off.back() + 2 * b.boundary.N);
  return off;
}

// Block b occupies rows/columns off[b] .. off[b] + 2N: value rows then normal
// derivative rows, mu columns then sigma columns.
inline Eigen::MatrixXcd assemble_multibody(const std::vector<Body>& bodies, cplx k2, cplx kp) {
  const auto off = body_offsets(bodies);
  const int n_total = off.back();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n_total, n_total);
  for (std::size_t bi = 0; bi < bodies.size(); ++bi) {
    const auto& B = bodies[bi];
    const int n = B.boundary.N;
    a.block(off[bi], off[bi], 2 * n, 2 * n) = layerscatter::assemble_muller(B.boundary, k2, kp);
    for (std::size_t bj = 0; bj < bodies.size(); ++bj) {
      if (bi == bj) continue;
      const auto& C = bodies[bj];
      const int m = C.boundary.N;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
          const auto k = full_kernels(k2, B.node(i), B.boundary.normals[i], C.node(j), C.boundary.normals[j]);
          const double w = C.boundary.h * C.boundary.speed[j];
          a(off[bi] + i, off[bj] + j) += w * k.D;
          a(off[bi] + i, off[bj] + m + j) += w * k.S;
          a(off[bi] + n + i, off[bj] + j) += w * k.T;
          a(off[bi] + n + i, off[bj] + m + j) += w * k.N;
        }
    }
  }
  return a;
}

inline MultibodySolution unpack(const std::vector<Body>& bodies, const Eigen::VectorXcd& x) {
  const auto off = body_offsets(bodies);
  MultibodySolution s;
  for (std::size_t bi = 0; bi < bodies.size(); ++bi) {
    const int n = bodies[bi].boundary.N;
    s.mu.push_back(x.segment(off[bi], n));
    s.sigma.push_back(x.segment(off[bi] + n, n));
  }
  return s;
}

inline MultibodySolution solve_multibody(
    const std::vector<Body>& bodies, cplx k2, cplx kp,
    const std::function<void(Vec2, cplx&, cplx&, cplx&)>& incident) {
  const auto off = body_offsets(bodies);
  const Eigen::MatrixXcd a = assemble_multibody(bodies, k2, kp);
  Eigen::VectorXcd rhs(off.back());
  for (std::size_t bi = 0; bi < bodies.size(); ++bi) {
    const auto& B = bodies[bi];
    const int n = B.boundary.N;
    for (int i = 0; i < n; ++i) {
      cplx u, ux, uy;
      incident(B.node(i), u, ux, uy);
      rhs(off[bi] + i) = -u;
      rhs(off[bi] + n + i) = -(ux * B.boundary.normals[i].x + uy * B.boundary.normals[i].y);
    }
  }
  return unpack(bodies, a.partialPivLu().solve(rhs));
}

// Scattered field outside all bodies.
inline cplx multibody_scattered(const std::vector<Body>& bodies, const MultibodySolution& s, cplx k2,
                                Vec2 x) {
  cplx u = 0.0;
  for (std::size_t b = 0; b < bodies.size(); ++b)
    u += layerscatter::layer_potential(bodies[b].boundary, s.sigma[b].data(), s.mu[b].data(), k2,
                                       x - bodies[b].center);
  return u;
}

}  // namespace oracle
