#include "layerscatter/numerics/bessel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "layerscatter/error.hpp"

namespace layerscatter::numerics {
namespace {

constexpr double kEulerGamma = 0.57721566490153286061;
constexpr double kRescale = 1e250;

void check_order(int n) {
  if (std::abs(n) > kMaxBesselOrder)
    throw DomainError("Bessel order " + std::to_string(n) + " exceeds supported maximum");
}

void check_finite(cplx z) {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw DomainError("Bessel argument is not finite");
}

double sign_for(int n) { return (n & 1) ? -1.0 : 1.0; }

void j_series(int nmax, cplx z, std::span<cplx> out) {
  const cplx half = 0.5 * z;
  const cplx q = -half * half;
  cplx lead = 1.0;
  for (int n = 0; n <= nmax; ++n) {
    if (n > 0) lead *= half / double(n);
    cplx term = lead;
    cplx sum = term;
    for (int m = 1; m < 60; ++m) {
      term *= q / (double(m) * double(m + n));
      sum += term;
      if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
    }
    out[n] = sum;
  }
}

// Miller's downward recurrence, normalized with the Jacobi-Anger sum for
// e^{-iz} (or e^{iz} when Im z < 0).
void j_miller(int nmax, cplx z, std::span<cplx> out) {
  const double az = std::abs(z);
  const int top = std::max(nmax, int(std::ceil(az))) + 30 + int(std::ceil(6.0 * std::cbrt(az)));
  const int start = top + (top & 1);
  const cplx rot = z.imag() >= 0.0 ? cplx(0.0, -1.0) : cplx(0.0, 1.0);
  std::vector<cplx> rot_pow(4);
  rot_pow[0] = 1.0;
  for (int i = 1; i < 4; ++i) rot_pow[i] = rot_pow[i - 1] * rot;

  cplx next = 0.0;
  cplx cur = 1e-300;
  cplx sum = 0.0;
  const cplx two_over_z = 2.0 / z;
  for (int n = start; n >= 1; --n) {
    if (n <= nmax) out[n] = cur;
    sum += 2.0 * rot_pow[n & 3] * cur;
    cplx prev = double(n) * two_over_z * cur - next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      next /= kRescale;
      sum /= kRescale;
      for (int k = n; k <= nmax; ++k) out[k] /= kRescale;
    }
  }
  sum += cur;
  const cplx scale = std::exp(rot * z) / sum;
  out[0] = cur * scale;
  for (int k = 1; k <= nmax; ++k) out[k] *= scale;
}

cplx asymptotic_hankel(int nu, cplx z) {
  const double mu = 4.0 * nu * nu;
  cplx term = 1.0;
  cplx sum = 1.0;
  const cplx iz = kI / z;
  double prev_mag = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= iz * ((mu - odd * odd) / (8.0 * k));
    const double mag = std::abs(term);
    if (mag > prev_mag) break;
    sum += term;
    prev_mag = mag;
    if (mag <= 1e-17 * std::abs(sum)) break;
  }
  const cplx phase = std::exp(kI * (z - 0.5 * kPi * nu - 0.25 * kPi));
  return std::sqrt(2.0 / (kPi * z)) * phase * sum;
}

void y01_neumann(cplx z, std::span<const cplx> j, int jcount, cplx& y0, cplx& y1) {
  const cplx lg = std::log(0.5 * z) + kEulerGamma;
  cplx s0 = 0.0;
  cplx s1 = 0.0;
  for (int k = 1; 2 * k + 1 < jcount; ++k) {
    const double sg = (k & 1) ? -1.0 : 1.0;
    s0 += sg * j[2 * k] / double(k);
    s1 += sg * (j[2 * k - 1] - j[2 * k + 1]) / double(k);
  }
  y0 = (2.0 / kPi) * lg * j[0] - (4.0 / kPi) * s0;
  y1 = -(2.0 / kPi) * j[0] / z + (2.0 / kPi) * lg * j[1] + (2.0 / kPi) * s1;
}

void y01(cplx z, cplx& j0, cplx& j1, cplx& y0, cplx& y1) {
  const double az = std::abs(z);
  if (az < 2.0) {
    const SmallArgParts s = small_argument_parts(z);
    const cplx lg = std::log(0.5 * z);
    j0 = s.j0;
    j1 = s.j1;
    y0 = (2.0 / kPi) * lg * s.j0 + s.y0_reg;
    y1 = -2.0 / (kPi * z) + (2.0 / kPi) * lg * s.j1 + s.y1_reg;
    return;
  }
  const int count = int(std::ceil(az)) + 40;
  std::vector<cplx> j(count + 1);
  j_miller(count, z, j);
  j0 = j[0];
  j1 = j[1];
  y01_neumann(z, j, count + 1, y0, y1);
}

}  // namespace

SmallArgParts small_argument_parts(cplx z) {
  const cplx half = 0.5 * z;
  const cplx q = half * half;
  SmallArgParts r{};
  // J0, J1 and the harmonic-number series of the regular parts.
  cplx t0 = 1.0;
  cplx j0 = 1.0, y0s = 0.0;
  double harmonic = 0.0;
  for (int m = 1; m < 80; ++m) {
    t0 *= -q / (double(m) * m);
    harmonic += 1.0 / m;
    j0 += t0;
    y0s -= harmonic * t0;
    if (std::abs(t0) * (1.0 + harmonic) <= 1e-18 * (std::abs(j0) + std::abs(y0s))) break;
  }
  cplx t1 = half;
  cplx j1 = half;
  cplx y1s = (-2.0 * kEulerGamma + 1.0) * half;
  double hk = 0.0, hk1 = 1.0;
  for (int k = 1; k < 80; ++k) {
    t1 *= -q / (double(k) * (k + 1));
    hk += 1.0 / k;
    hk1 += 1.0 / (k + 1);
    const double psi_sum = -2.0 * kEulerGamma + hk + hk1;
    j1 += t1;
    y1s += psi_sum * t1;
    if (std::abs(t1) * (1.0 + std::abs(psi_sum)) <= 1e-18 * (std::abs(j1) + std::abs(y1s))) break;
  }
  r.j0 = j0;
  r.j1 = j1;
  r.y0_reg = (2.0 / kPi) * (kEulerGamma * j0 + y0s);
  r.y1_reg = -y1s / kPi;
  return r;
}

void bessel_j_array(int nmax, cplx z, std::span<cplx> out) {
  check_order(nmax);
  check_finite(z);
  if (z == cplx(0.0)) {
    out[0] = 1.0;
    for (int n = 1; n <= nmax; ++n) out[n] = 0.0;
    return;
  }
  if (std::abs(z) < 2.0)
    j_series(nmax, z, out);
  else
    j_miller(nmax, z, out);
}

void hankel1_01(cplx z, cplx& h0, cplx& h1) {
  check_finite(z);
  if (z == cplx(0.0)) throw DomainError("Hankel function evaluated at z = 0");
  if (std::abs(z) >= 25.0) {
    h0 = asymptotic_hankel(0, z);
    h1 = asymptotic_hankel(1, z);
    return;
  }
  cplx j0, j1, y0, y1;
  y01(z, j0, j1, y0, y1);
  h0 = j0 + kI * y0;
  h1 = j1 + kI * y1;
}

void hankel1_array(int nmax, cplx z, std::span<cplx> out) {
  check_order(nmax);
  check_finite(z);
  if (z == cplx(0.0)) throw DomainError("Hankel function evaluated at z = 0");
  const double az = std::abs(z);
  if (az >= 25.0) {
    out[0] = asymptotic_hankel(0, z);
    if (nmax >= 1) out[1] = asymptotic_hankel(1, z);
    for (int n = 1; n < nmax; ++n) out[n + 1] = (2.0 * n / z) * out[n] - out[n - 1];
    return;
  }
  // J by Miller/series, Y by forward recurrence from Y0, Y1.
  const int count = std::max(nmax, int(std::ceil(az)) + 40);
  std::vector<cplx> j(count + 1);
  cplx y0, y1;
  if (az < 2.0) {
    j_series(std::max(nmax, 1), z, j);
    cplx j0, j1;
    y01(z, j0, j1, y0, y1);
  } else {
    j_miller(count, z, j);
    y01_neumann(z, j, count + 1, y0, y1);
  }
  cplx ym = y0, yc = y1;
  out[0] = j[0] + kI * y0;
  if (nmax >= 1) out[1] = j[1] + kI * y1;
  for (int n = 1; n < nmax; ++n) {
    const cplx yn = (2.0 * n / z) * yc - ym;
    ym = yc;
    yc = yn;
    out[n + 1] = j[n + 1] + kI * yn;
  }
}

cplx bessel_j(int n, cplx z) {
  const int m = std::abs(n);
  std::vector<cplx> v(m + 1);
  bessel_j_array(m, z, v);
  return n < 0 ? sign_for(m) * v[m] : v[m];
}

cplx hankel1(int n, cplx z) {
  const int m = std::abs(n);
  std::vector<cplx> v(m + 2);
  hankel1_array(m, z, v);
  return n < 0 ? sign_for(m) * v[m] : v[m];
}

cplx bessel_y(int n, cplx z) {
  const int m = std::abs(n);
  check_order(m);
  check_finite(z);
  if (z == cplx(0.0)) throw DomainError("Bessel Y evaluated at z = 0");
  cplx y;
  if (std::abs(z) >= 25.0) {
    std::vector<cplx> h(m + 2), j(m + 2);
    hankel1_array(m, z, h);
    bessel_j_array(m, z, j);
    y = (h[m] - j[m]) / kI;
  } else {
    cplx j0, j1, y0, y1;
    y01(z, j0, j1, y0, y1);
    cplx ym = y0, yc = y1;
    if (m == 0) {
      y = y0;
    } else {
      for (int k = 1; k < m; ++k) {
        const cplx yn = (2.0 * k / z) * yc - ym;
        ym = yc;
        yc = yn;
      }
      y = yc;
    }
  }
  return n < 0 ? sign_for(m) * y : y;
}

cplx bessel_j_prime(int n, cplx z) {
  return 0.5 * (bessel_j(n - 1, z) - bessel_j(n + 1, z));
}

cplx hankel1_prime(int n, cplx z) {
  return 0.5 * (hankel1(n - 1, z) - hankel1(n + 1, z));
}

}  // namespace layerscatter::numerics
