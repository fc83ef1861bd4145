"""Brute-force reference computations used by the tests.

Nothing here calls the package's dual solvers or root finders except
where noted; each oracle reaches its answer by a different route.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import minimize_scalar

from rarebai.kinf import kinf_oracle


def kinf_dense_dual(values, probs, x, bound, direction, n=20001):
    """K_inf by maximizing the concave dual on a dense lambda grid plus a polish."""
    y = np.asarray(values, float)
    q = np.asarray(probs, float)
    if direction == "U":
        if x <= y @ q:
            return 0.0
        top = 1.0 / (bound - x)

        def g(lam):
            return float(np.sum(q * np.log1p(lam * (x - y))))
    else:
        if x >= y @ q:
            return 0.0
        top = 1.0 / x

        def g(lam):
            with np.errstate(divide="ignore"):
                return float(np.sum(q * np.log1p(-lam * (x - y))))
    grid = np.linspace(0.0, top, n)
    vals = np.array([g(l) for l in grid])
    vals[~np.isfinite(vals)] = -np.inf
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, n - 1)]
    res = minimize_scalar(lambda l: -g(l), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14 * max(top, 1.0)})
    best = max(vals[k], -res.fun if np.isfinite(res.fun) else -np.inf)
    return float(best)


def inner_value(instance_table, best, i, w1, wi):
    """min over x in [mu_i, mu_1] of w1 K^L(p_1, x) + wi K^U(p_i, x) by dense scan + golden refine.

    Uses the primal oracle for K_inf so the package's dual kernels are not
    involved.
    """
    t = instance_table
    y1, q1 = t.Y[best], t.Q[best]
    yi, qi = t.Y[i], t.Q[i]
    Bi = float(t.bounds[i])
    mu1, mui = float(t.means[best]), float(t.means[i])

    def f(x):
        return (w1 * kinf_oracle(y1, q1 / q1.sum(), x, max(Bi, y1.max()) + 1, "L")
                + wi * kinf_oracle(yi, qi / qi.sum(), x, Bi, "U"))

    xs = np.linspace(mui, mu1, 41)[1:-1]
    vals = [f(x) for x in xs]
    k = int(np.argmin(vals))
    lo = xs[max(k - 1, 0)]
    hi = xs[min(k + 1, len(xs) - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10 * mu1})
    return float(min(res.fun, min(vals)))


def best_weight_profile(pair_value, K, best, w1):
    """g(w1) = max over the other weights (summing to 1 - w1) of min_i P_i.

    pair_value(i, w1, wi) must be increasing in wi.  For a level V the
    cheapest wi with P_i >= V is found by root finding; V itself is set by
    sum_i wi(V) = 1 - w1.  Returns (g, weights).
    """
    from scipy.optimize import brentq

    others = [i for i in range(K) if i != best]
    room = 1.0 - w1

    def need(i, V):
        if pair_value(i, w1, room) < V:
            return np.inf
        return brentq(lambda w: pair_value(i, w1, w) - V, 0.0, room, xtol=1e-15, rtol=1e-13)

    def slack(V):
        return room - sum(need(i, V) for i in others)

    hi = min(pair_value(i, w1, room) for i in others)
    if hi <= 0:
        return 0.0, None
    V = brentq(lambda v: slack(v) if np.isfinite(slack(v)) else -room, 0.0, hi,
               xtol=1e-300, rtol=1e-13)
    w = np.zeros(K)
    w[best] = w1
    for i in others:
        w[i] = need(i, V)
    return V, w


def simplex_grid_search(pair_value, K, best, steps=(0.05, 0.005, 0.0005, 0.00005, 0.000005), radius=2):
    """Nested grid search of the max-min problem over the best arm's weight.

    The remaining coordinates are eliminated exactly by best_weight_profile,
    so the search is one-dimensional over a concave profile: each level
    scans +-radius steps of the previous level around the incumbent at the
    next finer step.  Returns (value, weights, [(step, value), ...]).
    """
    grid = np.arange(steps[0], 1.0, steps[0])
    vals = [best_weight_profile(pair_value, K, best, g)[0] for g in grid]
    k = int(np.argmax(vals))
    c, bv = grid[k], vals[k]
    levels = [(steps[0], bv)]
    prev = steps[0]
    for h in steps[1:]:
        pts = c + h * np.arange(-int(round(radius * prev / h)), int(round(radius * prev / h)) + 1)
        pts = pts[(pts > 0) & (pts < 1)]
        vs = [best_weight_profile(pair_value, K, best, g)[0] for g in pts]
        j = int(np.argmax(vs))
        if vs[j] > bv:
            c, bv = pts[j], vs[j]
        levels.append((h, bv))
        prev = h
    return bv, best_weight_profile(pair_value, K, best, c)[1], levels


def binomial_poisson_tv(n, p, lam):
    """Exact TV between Binomial(n, p) and Poisson(lam)."""
    from scipy.stats import binom, poisson
    k = np.arange(n + 1)
    return 0.5 * (np.abs(binom.pmf(k, n, p) - poisson.pmf(k, lam)).sum() + poisson.sf(n, lam))


def brute_force_load_balance(s, m):
    """Minimal max shortfall over all integer spends (tiny inputs only)."""
    best = None
    for spend in itertools.product(*[range(v + 1) for v in s]):
        if sum(spend) != m:
            continue
        short = max(a - b for a, b in zip(s, spend))
        if best is None or short < best:
            best = short
    return best


def single_atom_mean_root(a, p, mu1):
    """A solving mu1 = a p / (1 - A a)."""
    return (1.0 - a * p / mu1) / a
