"""Brent's root finder in reverse-communication form.

numba cannot cache functions that receive other jitted functions as
arguments, so instead of ``brentq(f, a, b)`` every caller drives its own
loop::

    s = brent_start(a, b, fa, fb)
    for _ in range(maxiter):
        x = brent_next(s, xtol, rtol)
        if s[8] > 0.0:
            break
        brent_feed(s, f(x))
    root = s[1]

The state vector holds a, b, c, fa, fb, fc, d, e and a done flag.  The
iteration is Brent's zeroin (inverse quadratic / secant steps with
bisection safeguards).
"""

from __future__ import annotations

import numpy as np
from numba import njit

EPS = 2.220446049250313e-16


@njit(cache=True)
def brent_start(a, b, fa, fb):
    s = np.empty(9)
    s[0] = a
    s[1] = b
    s[2] = a
    s[3] = fa
    s[4] = fb
    s[5] = fa
    s[6] = b - a
    s[7] = b - a
    s[8] = 0.0
    if fb == 0.0:
        s[8] = 1.0
    elif fa == 0.0:
        s[1] = a
        s[4] = fa
        s[8] = 1.0
    return s


@njit(cache=True)
def brent_next(s, xtol, rtol):
    """Return the next abscissa to evaluate, or flag convergence in s[8]."""
    a, b, c = s[0], s[1], s[2]
    fa, fb, fc = s[3], s[4], s[5]
    d, e = s[6], s[7]
    if (fb > 0.0 and fc > 0.0) or (fb < 0.0 and fc < 0.0):
        c = a
        fc = fa
        d = b - a
        e = d
    if abs(fc) < abs(fb):
        a = b
        b = c
        c = a
        fa = fb
        fb = fc
        fc = fa
    tol1 = 2.0 * rtol * abs(b) + 0.5 * xtol
    xm = 0.5 * (c - b)
    if abs(xm) <= tol1 or fb == 0.0:
        s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7] = a, b, c, fa, fb, fc, d, e
        s[8] = 1.0
        return b
    if abs(e) >= tol1 and abs(fa) > abs(fb):
        r3 = fb / fa
        if a == c:
            p = 2.0 * xm * r3
            q = 1.0 - r3
        else:
            q = fa / fc
            r = fb / fc
            p = r3 * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
            q = (q - 1.0) * (r - 1.0) * (r3 - 1.0)
        if p > 0.0:
            q = -q
        else:
            p = -p
        if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
            e = d
            d = p / q
        else:
            d = xm
            e = d
    else:
        d = xm
        e = d
    a = b
    fa = fb
    if abs(d) > tol1:
        b = b + d
    elif xm > 0.0:
        b = b + tol1
    else:
        b = b - tol1
    s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7] = a, b, c, fa, fb, fc, d, e
    return b


@njit(cache=True)
def brent_feed(s, fb):
    s[4] = fb
    if fb == 0.0:
        s[8] = 1.0
