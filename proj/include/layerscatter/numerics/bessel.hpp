#pragma once

#include <span>

#include "layerscatter/types.hpp"

namespace layerscatter::numerics {

inline constexpr int kMaxBesselOrder = 400;

cplx bessel_j(int n, cplx z);
cplx bessel_y(int n, cplx z);
cplx hankel1(int n, cplx z);

// J_0..J_nmax into out[0..nmax].
void bessel_j_array(int nmax, cplx z, std::span<cplx> out);
// H_0..H_nmax into out[0..nmax]; z = 0 is a domain error.
void hankel1_array(int nmax, cplx z, std::span<cplx> out);
void hankel1_01(cplx z, cplx& h0, cplx& h1);

cplx bessel_j_prime(int n, cplx z);
cplx hankel1_prime(int n, cplx z);

// J0, J1 and the parts of Y0, Y1 left after removing the logarithmic and
// pole terms:  Y0 = (2/pi) log(z/2) J0 + y0_reg,
//              Y1 = -2/(pi z) + (2/pi) log(z/2) J1 + y1_reg.
// Power series; intended for |z| <= 4.
struct SmallArgParts {
  cplx j0, j1, y0_reg, y1_reg;
};
SmallArgParts small_argument_parts(cplx z);

}  // namespace layerscatter::numerics
