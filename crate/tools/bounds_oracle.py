#!/usr/bin/env python3
"""Hand-computed oracle for the step-bound calculators.

Everything here is derived on paper from first principles, independently of
the Rust implementation, and printed as JSON so tests can diff against it.

Case 1: explicit descent-ascent on f(x, y) = x^2 - y^2 with tau = 1.
  F(z) = (2x, 2y), so the scaled Hessian spectrum at the origin is {-2, -2}
  and L = 2. The stability bound is
      min( min(1, tau)/L , 2|Re lambda| / (L^2 max(1, tau^-2)) )
    = min( 1/2 , 2*2/4 ) = 0.5.

Case 2: extragradient on f(x, y) = x y with tau = 1.
  The Hessian spectrum at the origin is {+i, -i}: max Re = 0, so the spectral
  cap is infinite and the bound collapses to min(1/L, tau/L) = 1 with L = 1.

Case 3: regularized Newton on f(x, y) = x^2 - y^2.
  Hessian spectrum of the signed Hessian at the origin is {-2, -2}; the
  smallest nonzero |Re| is 2 and L = 2, so phi_min = L^2 / 2 = 2.
"""

import json


def tt_gda_quad_saddle(tau=1.0):
    L = 2.0
    eigs = [-2.0, -2.0]
    escape = min(1.0, tau) / L
    denom = max(L * L, L * L / tau**2)
    spectral = min(2.0 * abs(e) for e in eigs) / denom
    return min(escape, spectral)


def geg_bilinear(tau=1.0):
    L = 1.0
    max_re = 0.0
    cap = float("inf") if max_re == 0.0 else abs(max_re) / max(L * L, L * L / tau**2)
    return min(cap, min(1.0 / L, tau / L))


def rdn_phi_min_quad_saddle():
    L = 2.0
    re_parts = [-2.0, -2.0]
    return L * L / min(abs(r) for r in re_parts if r != 0.0)


if __name__ == "__main__":
    print(
        json.dumps(
            {
                "tt_gda_quad_saddle_s_max": tt_gda_quad_saddle(),
                "geg_bilinear_s_max": geg_bilinear(),
                "rdn_quad_saddle_phi_min": rdn_phi_min_quad_saddle(),
            }
        )
    )
