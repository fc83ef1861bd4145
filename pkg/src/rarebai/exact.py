"""Exact max-min lower bound V*(p) and its optimal allocation.

The inner problem for adversary i is

    P_i(w) = inf_{x in [mu_i, mu_1]} w_1 K^L(p_1, x) + w_i K^U(p_i, x),

convex in x with derivative -w_1 lam_L(x) + w_i lam_U(x), so x* is the
root of that envelope derivative.  The outer problem fixes w_1 = 1,
sweeps the crossing mean of the runner-up arm, matches every other P_i to
the runner-up's value by a root search on log(w_i / w_1), and stops when

    sum_i K^L(p_1, x_i) / K^U(p_i, x_i) = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from ._brent import EPS, brent_feed, brent_next, brent_start
from .instance import ArmTable, as_table
from .kinf import kl_core, ku_core

_U_MAX = 700.0


class ConvergenceError(RuntimeError):
    """A solver hit its iteration cap or lost its bracket."""


@njit(cache=True)
def inner_core(y1, q1, y2, q2, B2, w1, w2):
    """Return (x*, value, lam_L, lam_U, K^L, K^U) of the inner problem."""
    mu1 = 0.0
    for j in range(y1.shape[0]):
        mu1 += y1[j] * q1[j]
    mu2 = 0.0
    for j in range(y2.shape[0]):
        mu2 += y2[j] * q2[j]
    if mu2 >= mu1:
        return mu1, 0.0, 0.0, 0.0, 0.0, 0.0
    if w1 <= 0.0:
        kl, lam_l, _, _ = kl_core(y1, q1, mu2)
        return mu2, 0.0, lam_l, 0.0, kl, 0.0
    if w2 <= 0.0:
        ku, lam_u, _, _ = ku_core(y2, q2, mu1, B2)
        return mu1, 0.0, 0.0, lam_u, 0.0, ku
    _, lam_l0, _, _ = kl_core(y1, q1, mu2)
    _, lam_u1, _, _ = ku_core(y2, q2, mu1, B2)
    f_lo = -w1 * lam_l0
    if not np.isfinite(f_lo):
        f_lo = -1.0  # mu2 = 0: only the sign of the endpoint is usable
    s = brent_start(mu2, mu1, f_lo, w2 * lam_u1)
    for _ in range(200):
        x = brent_next(s, 0.0, 2.0 * EPS)
        if s[8] > 0.0:
            break
        _, ll, _, _ = kl_core(y1, q1, x)
        _, lu, _, _ = ku_core(y2, q2, x, B2)
        brent_feed(s, w2 * lu - w1 * ll)
    x = s[1]
    kl, lam_l, _, _ = kl_core(y1, q1, x)
    ku, lam_u, _, _ = ku_core(y2, q2, x, B2)
    return x, w1 * kl + w2 * ku, lam_l, lam_u, kl, ku


@njit(cache=True)
def _match_ratio(y1, q1, yi, qi, Bi, v, u0):
    """Solve P_i(1, e^u) = v for u; returns (u, ok)."""
    step = 0.5
    ulo = u0 - step
    plo = inner_core(y1, q1, yi, qi, Bi, 1.0, math.exp(ulo))[1]
    while plo > v and ulo > -_U_MAX:
        step *= 2.0
        ulo = max(ulo - step, -_U_MAX)
        plo = inner_core(y1, q1, yi, qi, Bi, 1.0, math.exp(ulo))[1]
    step = 0.5
    uhi = u0 + step
    phi = inner_core(y1, q1, yi, qi, Bi, 1.0, math.exp(uhi))[1]
    while phi < v and uhi < _U_MAX:
        step *= 2.0
        uhi = min(uhi + step, _U_MAX)
        phi = inner_core(y1, q1, yi, qi, Bi, 1.0, math.exp(uhi))[1]
    if plo > v or phi < v:
        return u0, False
    s = brent_start(ulo, uhi, plo - v, phi - v)
    for _ in range(200):
        u = brent_next(s, 1e-14, 2.0 * EPS)
        if s[8] > 0.0:
            break
        brent_feed(s, inner_core(y1, q1, yi, qi, Bi, 1.0, math.exp(u))[1] - v)
    return s[1], True


@njit(cache=True)
def _outer_eval(Y, Q, Bs, best, adv, theta, us):
    """Sum condition at runner-up crossing x_2 = mu_2 + theta (mu_1 - mu_2).

    Updates `us` (log weight ratios, warm starts) in place.
    Returns (S, ok).
    """
    y1 = Y[best]
    q1 = Q[best]
    a2 = adv[0]
    mu1 = 0.0
    mu2 = 0.0
    for j in range(Y.shape[1]):
        mu1 += Y[best, j] * Q[best, j]
        mu2 += Y[a2, j] * Q[a2, j]
    x2 = mu2 + theta * (mu1 - mu2)
    kl, lam_l, _, _ = kl_core(y1, q1, x2)
    ku, lam_u, _, _ = ku_core(Y[a2], Q[a2], x2, Bs[a2])
    if lam_u <= 0.0 or ku <= 0.0:
        return np.inf, True
    if lam_l <= 0.0:
        return 0.0, True
    us[0] = math.log(lam_l / lam_u)
    v = kl + (lam_l / lam_u) * ku
    S = kl / ku
    ok = True
    for k in range(1, adv.shape[0]):
        i = adv[k]
        u0 = us[k] if np.isfinite(us[k]) else us[0]
        u, good = _match_ratio(y1, q1, Y[i], Q[i], Bs[i], v, u0)
        ok = ok and good
        us[k] = u
        r = inner_core(y1, q1, Y[i], Q[i], Bs[i], 1.0, math.exp(u))
        if r[5] <= 0.0:
            return np.inf, ok
        S += r[4] / r[5]
    return S, ok


@njit(cache=True)
def exact_core(Y, Q, Bs, best, adv, maxiter):
    """Return (log weight ratios per adversary, final S, iterations, status).

    status: 0 converged, 1 bracket failure, 2 iteration cap.
    """
    m = adv.shape[0]
    us = np.full(m, np.nan)
    th_lo, th_hi = 0.5, 0.5
    S_mid, ok = _outer_eval(Y, Q, Bs, best, adv, 0.5, us)
    if not ok:
        return us, S_mid, 0, 1
    if S_mid == 1.0:
        return us, S_mid, 0, 0
    f_lo = S_mid - 1.0
    f_hi = S_mid - 1.0
    n = 0
    if S_mid > 1.0:
        # S decreases in theta: push the upper end toward mu_1
        while f_hi > 0.0 and n < 60:
            th_hi = 1.0 - 0.25 * (1.0 - th_hi)
            S, ok = _outer_eval(Y, Q, Bs, best, adv, th_hi, us)
            f_hi = S - 1.0
            n += 1
    else:
        while f_lo < 0.0 and n < 60:
            th_lo = 0.25 * th_lo
            S, ok = _outer_eval(Y, Q, Bs, best, adv, th_lo, us)
            f_lo = S - 1.0
            n += 1
    if f_lo < 0.0 or f_hi > 0.0 or not ok:
        return us, f_lo + 1.0, n, 1
    s = brent_start(th_lo, th_hi, f_lo, f_hi)
    status = 2
    S = S_mid
    it = 0
    for it in range(maxiter):
        th = brent_next(s, 1e-15, 2.0 * EPS)
        if s[8] > 0.0:
            status = 0
            break
        S, ok = _outer_eval(Y, Q, Bs, best, adv, th, us)
        if not ok:
            return us, S, n + it, 1
        brent_feed(s, S - 1.0)
        if s[8] > 0.0:
            status = 0
            break
    S, ok = _outer_eval(Y, Q, Bs, best, adv, s[1], us)
    return us, S, n + it + 1, status


# ------------------------------------------------------------------ API


@dataclass(frozen=True)
class InnerSolution:
    adversary: int
    x_star: float
    value: float
    lambda_L1i: float
    lambda_Ui: float
    K_1i: float
    K_i: float
    C_1i: float
    C_i: float
    kl_best: float
    ku_adversary: float
    w1: float
    wi: float


@dataclass(frozen=True)
class MaxMinSolution:
    best: int
    weights: np.ndarray
    value: float
    inner: list
    sum_residual: float
    spread: float
    solve_seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def residuals(self) -> tuple[float, float]:
        return self.sum_residual, self.spread


def _inner_from(table: ArmTable, best: int, i: int, w1: float, wi: float) -> InnerSolution:
    x, val, ll, lu, kl, ku = inner_core(table.Y[best], table.Q[best], table.Y[i], table.Q[i],
                                        float(table.bounds[i]), float(w1), float(wi))
    return InnerSolution(
        adversary=int(i), x_star=x, value=val, lambda_L1i=ll, lambda_Ui=lu,
        K_1i=1.0 - x * ll, K_i=1.0 + x * lu,
        C_1i=ll / table.scales[best], C_i=lu / table.scales[i],
        kl_best=kl, ku_adversary=ku, w1=float(w1), wi=float(wi),
    )


def inner_exact(instance, best: int, i: int, w1: float, wi: float) -> InnerSolution:
    """Inner minimization for adversary i at weights (w1, wi)."""
    t = as_table(instance)
    if t.means[i] >= t.means[best]:
        raise ValueError("degenerate interval: adversary mean is not below the best mean")
    if w1 < 0 or wi < 0:
        raise ValueError("weights must be nonnegative")
    return _inner_from(t, best, i, w1, wi)


def envelope_gradient(inner: InnerSolution) -> tuple[float, float]:
    """(dP_i/dw_1, dP_i/dw_i) = (K^L(p_1, x*), K^U(p_i, x*))."""
    return inner.kl_best, inner.ku_adversary


def _finish(table: ArmTable, best: int, ratios: dict, t0: float, extra=None) -> MaxMinSolution:
    import time
    w = np.zeros(table.K)
    w[best] = 1.0
    for i, r in ratios.items():
        w[i] = r
    w /= w.sum()
    inner = [_inner_from(table, best, i, w[best], w[i]) for i in table.adversaries(best)]
    vals = np.array([s.value for s in inner])
    value = float(vals.min())
    S = sum(s.kl_best / s.ku_adversary for s in inner)
    spread = float((vals.max() - vals.min()) / value) if value > 0 else np.inf
    return MaxMinSolution(best=best, weights=w, value=value, inner=inner,
                          sum_residual=abs(S - 1.0), spread=spread,
                          solve_seconds=time.perf_counter() - t0, extra=extra or {})


def solve_exact_maxmin(instance, maxiter: int = 200, sum_tol: float = 1e-6,
                       spread_tol: float = 1e-6, check: bool = True) -> MaxMinSolution:
    """Optimal allocation and V*(p) for the exact problem.

    Raises ConvergenceError when the residual tolerances are not met and
    `check` is set.
    """
    import time
    t0 = time.perf_counter()
    t = as_table(instance)
    best = t.best
    adv = t.adversaries(best)
    if t.means[adv[0]] >= t.means[best]:
        raise ValueError("best arm is not unique")
    us, S, it, status = exact_core(t.Y, t.Q, t.bounds, best, adv, maxiter)
    if status == 1:
        raise ConvergenceError(f"exact solver lost its bracket (S={S:.6g})")
    sol = _finish(t, best, {int(i): math.exp(u) for i, u in zip(adv, us)}, t0,
                  {"iterations": int(it), "status": int(status)})
    if check and (sol.sum_residual > sum_tol or sol.spread > spread_tol):
        raise ConvergenceError(
            f"exact solver residuals too large: sum={sol.sum_residual:.3g}, spread={sol.spread:.3g}")
    return sol


def lower_bound_samples(solution, delta: float) -> float:
    """log(1/(2.4 delta)) / V*; accepts a solution or a raw value."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    v = solution.value if hasattr(solution, "value") else float(solution)
    return math.log(1.0 / (2.4 * delta)) / v


def min_inner_value(instance, w) -> float:
    """min_i P_i(w) for arbitrary simplex weights."""
    t = as_table(instance)
    best = t.best
    return min(_inner_from(t, best, i, w[best], w[i]).value for i in t.adversaries(best))


class ExactLowerBound(BaseEstimator):
    """Estimator wrapper: ``fit(instance)`` solves the exact max-min problem.

    Attributes after fit: ``weights_``, ``value_``, ``solution_``.
    """

    def __init__(self, maxiter: int = 200, sum_tol: float = 1e-6, spread_tol: float = 1e-6):
        self.maxiter = maxiter
        self.sum_tol = sum_tol
        self.spread_tol = spread_tol

    def fit(self, instance, y=None):
        self.solution_ = solve_exact_maxmin(instance, self.maxiter, self.sum_tol, self.spread_tol)
        self.weights_ = self.solution_.weights
        self.value_ = self.solution_.value
        return self

    def lower_bound(self, delta: float) -> float:
        from sklearn.utils.validation import check_is_fitted
        check_is_fitted(self, "value_")
        return lower_bound_samples(self.value_, delta)
