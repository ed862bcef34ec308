"""Vectorized float64 midpoint-radius ball arithmetic.

Every float64 is an exact dyadic rational, so a (center, radius) pair in
float64 is a genuine dyadic ball.  Operations here keep the containment
contract by inflating radii past the worst-case IEEE rounding of the
center arithmetic: products and sums are computed round-to-nearest, each
result is off by at most 2**-52 relative, and the inflation constants
below leave a factor >= 8 of headroom over the accumulated bound.

The same formulas are mirrored, op for op, by the scalar numba kernels so
that both engines produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

# one rounding step is 2^-52 relative; EPS_TERM covers the handful of
# roundings inside a complex multiply-add, INFL covers the radius
# arithmetic's own rounding
EPS_TERM = 2.0**-48
INFL = 1.0 + 2.0**-40


def ball_mul_add(are, aim, arad, bre, bim, brad, cre, cim, crad):
    """(a*b + c) on complex balls; returns (re, im, rad) arrays/scalars."""
    pre = are * bre - aim * bim
    pim = are * bim + aim * bre
    absa = np.abs(are) + np.abs(aim)
    absb = np.abs(bre) + np.abs(bim)
    rad = (absa * brad + absb * arad + arad * brad
           + EPS_TERM * (absa * absb + np.abs(pre) + np.abs(pim))) * INFL
    rre = pre + cre
    rim = pim + cim
    rrad = (rad + crad + EPS_TERM * (np.abs(rre) + np.abs(rim))) * INFL
    return rre, rim, rrad


def poly_eval_ball(coef_re, coef_im, coef_rad, zre, zim, zrad):
    """Horner evaluation of a polynomial over complex balls.

    coef_* are 1-d arrays in ascending degree order; z* may be scalars or
    arrays.  Returns (re, im, rad) of a ball containing the exact image of
    every point of the input ball under the exact polynomial (coefficient
    balls included).
    """
    d = len(coef_re) - 1
    bre = np.full_like(np.asarray(zre, dtype=np.float64), coef_re[d])
    bim = np.full_like(bre, coef_im[d])
    brad = np.full_like(bre, coef_rad[d])
    for k in range(d - 1, -1, -1):
        bre, bim, brad = ball_mul_add(bre, bim, brad, zre, zim, zrad,
                                      coef_re[k], coef_im[k], coef_rad[k])
    return bre, bim, brad


def derivative_coeffs(coef_re, coef_im, coef_rad):
    """Coefficient arrays of the derivative polynomial (exact in float64
    up to degree 2**52, with radii scaled the same way)."""
    d = len(coef_re) - 1
    if d == 0:
        z = np.zeros(1)
        return z, z.copy(), z.copy()
    k = np.arange(1, d + 1, dtype=np.float64)
    return coef_re[1:] * k, coef_im[1:] * k, coef_rad[1:] * k


def ball_abs_bounds(re, im, rad):
    """(lo, hi) bounds on |x| over the ball; sqrt is correctly rounded so
    one directed inflation step suffices."""
    mag = np.sqrt(re * re + im * im)
    hi = (mag * (1.0 + EPS_TERM) + rad) * INFL
    lo = np.maximum(mag * (1.0 - EPS_TERM) - rad, 0.0) * (1.0 - 2.0**-40)
    return lo, hi
