"""Poisson-approximate max-min problem.

Replacing each arm's law by independent Poisson counts per atom turns the
inner problem into

    P_{i,a} = w_1 [sum_j q_1j log(1 + c y_1j) - c x]
            + w_i [sum_j q_ij log(1 - r y_ij) + r x]

with the tilted means meeting at
x = sum_j y_1j q_1j / (1 + c y_1j) = sum_j y_ij q_ij / (1 - r y_ij) and
w_1 c = w_i r.  Everything here works on real-scale arrays (y, q, lam);
the scaled multipliers are C_1i = c / gamma^alpha_1 and C_i = r / gamma^alpha_i.

The outer solve follows the monotone cascade: pick the best-arm multiplier
against the runner-up, match every other adversary's value by a 1-D root,
and adjust until sum_i (dP_i/dw_1)/(dP_i/dw_i) = 1.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from ._brent import EPS, brent_feed, brent_next, brent_start
from .exact import ConvergenceError, _inner_from
from .instance import as_table


def poisson_kl(lam_p: float, lam_q: float) -> float:
    """KL(Poisson(lam_p), Poisson(lam_q))."""
    if lam_p < 0:
        raise ValueError("lam_p must be nonnegative")
    if lam_q <= 0:
        if lam_p > 0:
            raise ValueError("lam_q must be positive when lam_p > 0")
        return 0.0
    if lam_p == 0:
        return float(lam_q)
    return float(lam_p * math.log(lam_p / lam_q) + lam_q - lam_p)


def approx_kl(arm_p, arm_q, gamma: float) -> float:
    """gamma^alpha * sum_j [p_j log(p_j/q_j) + q_j - p_j] over a shared menu."""
    if [a for a, _ in arm_p.atoms] != [a for a, _ in arm_q.atoms] or arm_p.alpha != arm_q.alpha:
        raise ValueError("arms must share atoms and rarity")
    s = sum(poisson_kl(p, q) for (_, p), (_, q) in zip(arm_p.atoms, arm_q.atoms))
    return gamma ** arm_p.alpha * s


# ------------------------------------------------------------ kernels


@njit(cache=True)
def _mean_down(y, q, c):
    s = 0.0
    for j in range(y.shape[0]):
        s += q[j] * y[j] / (1.0 + c * y[j])
    return s


@njit(cache=True)
def _mean_up(y, q, r):
    s = 0.0
    for j in range(y.shape[0]):
        s += q[j] * y[j] / (1.0 - r * y[j])
    return s


@njit(cache=True)
def _ymax(y, q):
    m = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0 and y[j] > m:
            m = y[j]
    return m


@njit(cache=True)
def c1_of_x(y, q, x):
    """Best-arm multiplier c >= 0 with tilted mean x."""
    mu = _mean_down(y, q, 0.0)
    if x >= mu:
        return 0.0
    tot = 0.0
    for j in range(y.shape[0]):
        if y[j] > 0.0:
            tot += q[j]
    hi = tot / x
    s = brent_start(0.0, hi, mu - x, _mean_down(y, q, hi) - x)
    for _ in range(300):
        c = brent_next(s, 0.0, 2.0 * EPS)
        if s[8] > 0.0:
            break
        brent_feed(s, _mean_down(y, q, c) - x)
    return s[1]


@njit(cache=True)
def ci_of_x(y, q, B, x):
    """Adversary multiplier r in [0, 1/B] with tilted mean x.

    When the bound is not an atom and x exceeds the largest mean the
    atoms can reach (r = 1/B), r is clamped and the remaining mean sits
    on an added atom at B.
    """
    mu = _mean_up(y, q, 0.0)
    if x <= mu:
        return 0.0
    ym = _ymax(y, q)
    rcap = 1.0 / B
    if ym < B:
        if x >= _mean_up(y, q, rcap):
            return rcap
        hi = rcap
    else:
        hi = rcap
        for k in range(1, 1000):
            hi = rcap * (1.0 - 0.5**k)
            if _mean_up(y, q, hi) > x or k > 60:
                break
    s = brent_start(0.0, hi, mu - x, _mean_up(y, q, hi) - x)
    for _ in range(300):
        r = brent_next(s, 0.0, 2.0 * EPS)
        if s[8] > 0.0:
            break
        brent_feed(s, _mean_up(y, q, r) - x)
    return s[1]


@njit(cache=True)
def _psi_down(z):
    # log1p(z) - z/(1+z) >= 0
    if z < 1e-4:
        return z * z * (0.5 - z * (2.0 / 3.0 - z * 0.75))
    return math.log1p(z) - z / (1.0 + z)


@njit(cache=True)
def _psi_up(z):
    # log1p(-z) + z/(1-z) >= 0 for z in [0, 1)
    if z < 1e-4:
        return z * z * (0.5 + z * (2.0 / 3.0 + z * 0.75))
    return math.log1p(-z) + z / (1.0 - z)


@njit(cache=True)
def kl1_part(y, q, c, x):
    """sum_j q log(1 + c y) - c x, written to stay accurate for small c."""
    s = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            s += q[j] * _psi_down(c * y[j])
    return s + c * (_mean_down(y, q, c) - x)


@njit(cache=True)
def kli_part(y, q, r, x):
    """sum_j q log(1 - r y) + r x, written to stay accurate for small r."""
    s = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            s += q[j] * _psi_up(r * y[j])
    return s + r * (x - _mean_up(y, q, r))


@njit(cache=True)
def f_value(y1, q1, yi, qi, Bi, c):
    """P_{i,a} / w_1 at best-arm multiplier c; returns (f, x, r, kl1, kli)."""
    x = _mean_down(y1, q1, c)
    r = ci_of_x(yi, qi, Bi, x)
    k1 = kl1_part(y1, q1, c, x)
    ki = kli_part(yi, qi, r, x)
    if r > 0.0:
        return k1 + (c / r) * ki, x, r, k1, ki
    return k1, x, r, k1, ki


@njit(cache=True)
def match_c(y1, q1, yi, qi, Bi, target):
    """Best-arm multiplier c for adversary i with f_i(c) = target."""
    mui = _mean_up(yi, qi, 0.0)
    cmax = c1_of_x(y1, q1, mui)
    fmax = f_value(y1, q1, yi, qi, Bi, cmax)[0]
    if target >= fmax:
        return cmax, False
    s = brent_start(0.0, cmax, -target, fmax - target)
    for _ in range(300):
        c = brent_next(s, 0.0, 2.0 * EPS)
        if s[8] > 0.0:
            break
        brent_feed(s, f_value(y1, q1, yi, qi, Bi, c)[0] - target)
    return s[1], True


@njit(cache=True)
def _cascade(Y, Q, Bs, best, adv, c12, out):
    """Fill out[k] = (c, x, r, kl1, kli) for each adversary; return sum of ratios."""
    y1 = Y[best]
    q1 = Q[best]
    a2 = adv[0]
    f2, x, r, k1, ki = f_value(y1, q1, Y[a2], Q[a2], Bs[a2], c12)
    out[0, 0], out[0, 1], out[0, 2], out[0, 3], out[0, 4] = c12, x, r, k1, ki
    if ki <= 0.0:
        return np.inf, True
    S = k1 / ki
    ok = True
    for k in range(1, adv.shape[0]):
        i = adv[k]
        c, good = match_c(y1, q1, Y[i], Q[i], Bs[i], f2)
        ok = ok and good
        f, x, r, k1, ki = f_value(y1, q1, Y[i], Q[i], Bs[i], c)
        out[k, 0], out[k, 1], out[k, 2], out[k, 3], out[k, 4] = c, x, r, k1, ki
        if ki <= 0.0:
            return np.inf, ok
        S += k1 / ki
    return S, ok


@njit(cache=True)
def approx_core(Y, Q, Bs, best, adv, maxiter, sum_tol):
    """Solve the cascade; returns (out, S, status) with status 0 ok, 1 bracket, 2 cap."""
    m = adv.shape[0]
    out = np.zeros((m, 5))
    a2 = adv[0]
    mu2 = _mean_up(Y[a2], Q[a2], 0.0)
    cmax = c1_of_x(Y[best], Q[best], mu2)
    th_lo, th_hi = 0.5, 0.5
    S, ok = _cascade(Y, Q, Bs, best, adv, 0.5 * cmax, out)
    f_lo = S - 1.0
    f_hi = S - 1.0
    n = 0
    # S increases with the multiplier
    if S > 1.0:
        while f_lo > 0.0 and n < 80:
            th_lo *= 0.25
            S, ok = _cascade(Y, Q, Bs, best, adv, th_lo * cmax, out)
            f_lo = S - 1.0
            n += 1
    else:
        while f_hi < 0.0 and n < 80:
            th_hi = 1.0 - 0.25 * (1.0 - th_hi)
            S, ok = _cascade(Y, Q, Bs, best, adv, th_hi * cmax, out)
            f_hi = S - 1.0
            n += 1
    if f_lo > 0.0 or f_hi < 0.0 or not ok:
        return out, S, 1
    s = brent_start(th_lo, th_hi, f_lo, f_hi)
    status = 2
    for _ in range(maxiter):
        th = brent_next(s, 1e-16, 2.0 * EPS)
        if s[8] > 0.0:
            status = 0
            break
        S, ok = _cascade(Y, Q, Bs, best, adv, th * cmax, out)
        brent_feed(s, S - 1.0)
        if abs(S - 1.0) <= 0.01 * sum_tol:
            status = 0
            break
    S, ok = _cascade(Y, Q, Bs, best, adv, s[1] * cmax, out)
    if abs(S - 1.0) <= sum_tol:
        status = 0
    return out, S, status


# ------------------------------------------------------------------ API


@dataclass(frozen=True)
class ApproxInnerSolution:
    adversary: int
    C_1i: float
    C_i: float
    x_star_a: float
    value: float
    lam_1i: float
    lam_i: float
    kl1: float
    kli: float
    clamped: bool


@dataclass(frozen=True)
class ApproxSolution:
    best: int
    weights: np.ndarray
    value: float
    inner: list
    sum_residual: float
    spread: float
    mu2: float
    solve_seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def __iter__(self):
        # (weights, V*_a, inner) unpacking
        return iter((self.weights, self.value, self.inner))


def solve_approx_maxmin(instance, maxiter: int = 200, sum_tol: float = 1e-8,
                        check: bool = True) -> ApproxSolution:
    """Optimal allocation for the Poisson-approximate problem."""
    t0 = time.perf_counter()
    t = as_table(instance)
    best = t.best
    adv = t.adversaries(best)
    if t.means[adv[0]] >= t.means[best]:
        raise ValueError("best arm is not unique")
    out, S, status = approx_core(t.Y, t.Q, t.bounds, best, adv, maxiter, sum_tol)
    if status == 1:
        raise ConvergenceError(f"cascade bracket failure (sum condition {S:.6g})")
    if check and abs(S - 1.0) > sum_tol:
        raise ConvergenceError(f"cascade did not converge: |sum - 1| = {abs(S - 1.0):.3g}")
    w = np.zeros(t.K)
    w[best] = 1.0
    for k, i in enumerate(adv):
        c, r = out[k, 0], out[k, 2]
        w[i] = c / r if r > 0 else np.inf
    w /= w.sum()
    inner = []
    for k, i in enumerate(adv):
        c, x, r, k1, ki = out[k]
        val = w[best] * k1 + w[i] * ki
        inner.append(ApproxInnerSolution(
            adversary=int(i), C_1i=c / t.scales[best], C_i=r / t.scales[i], x_star_a=x,
            value=val, lam_1i=c, lam_i=r, kl1=k1, kli=ki,
            clamped=bool(r > 0 and abs(r * t.bounds[i] - 1.0) < 1e-15)))
    vals = np.array([s.value for s in inner])
    value = float(vals.min())
    return ApproxSolution(best=best, weights=w, value=value, inner=inner,
                          sum_residual=abs(S - 1.0),
                          spread=float((vals.max() - vals.min()) / value),
                          mu2=float(t.means[adv[0]]),
                          solve_seconds=time.perf_counter() - t0)


@njit(cache=True)
def approx_inner_core(y1, q1, yi, qi, Bi, w1, wi):
    """Approximate inner problem at fixed weights; returns (value, c, r, x)."""
    mu1 = _mean_down(y1, q1, 0.0)
    mui = _mean_up(yi, qi, 0.0)
    if w1 <= 0.0 or wi <= 0.0 or mui >= mu1:
        return 0.0, 0.0, 0.0, mu1
    # the optimal crossing satisfies w1 c(x) = wi r(x); c falls and r rises in x
    lo, hi = mui, mu1
    flo = -w1 * c1_of_x(y1, q1, lo)
    fhi = wi * ci_of_x(yi, qi, Bi, hi)
    s = brent_start(lo, hi, flo, fhi)
    for _ in range(300):
        x = brent_next(s, 0.0, 2.0 * EPS)
        if s[8] > 0.0:
            break
        brent_feed(s, wi * ci_of_x(yi, qi, Bi, x) - w1 * c1_of_x(y1, q1, x))
    x = s[1]
    c = c1_of_x(y1, q1, x)
    r = ci_of_x(yi, qi, Bi, x)
    val = w1 * kl1_part(y1, q1, c, x) + wi * kli_part(yi, qi, r, x)
    return val, c, r, x


def approx_inner(instance, best: int, i: int, w1: float, wi: float) -> float:
    t = as_table(instance)
    return approx_inner_core(t.Y[best], t.Q[best], t.Y[i], t.Q[i], float(t.bounds[i]),
                             float(w1), float(wi))[0]


def approximation_gap(instance, w) -> dict:
    """|P_i(w) - P_{i,a}(w)| for every adversary i at the same weights."""
    t = as_table(instance)
    best = t.best
    w = np.asarray(w, dtype=float)
    gaps = {}
    for i in t.adversaries(best):
        pe = _inner_from(t, best, i, w[best], w[i]).value
        pa = approx_inner(t, best, i, w[best], w[i])
        gaps[int(i)] = abs(pe - pa)
    return gaps


def approx_mean_meeting_check(solution: ApproxSolution, tol: float = 1e-8) -> bool:
    """Every crossing mean of the approximate optimum is at least mu_2."""
    return all(s.x_star_a >= solution.mu2 - tol for s in solution.inner)


class Cascade:
    """The implicit functions g_i, xi_i, h_i of the approximate problem.

    Arguments and results are in scaled units: r = C_i, s = C_12 (the
    best-arm multiplier against the runner-up), so xi_i maps C_12 to C_1i
    and h_i(s) is the ratio of the two Poisson-KL brackets at that point.
    Adversaries are addressed by arm index.
    """

    def __init__(self, instance):
        self.table = as_table(instance)
        self.best = self.table.best
        self.adv = self.table.adversaries(self.best)
        self.runner_up = int(self.adv[0])

    def _arm(self, i):
        t = self.table
        return t.Y[i], t.Q[i], float(t.bounds[i])

    def r_domain(self, i: int) -> tuple[float, float]:
        """Range of C_i whose tilted mean stays at most mu_1."""
        yi, qi, Bi = self._arm(i)
        mu1 = self.table.means[self.best]
        r_top = ci_of_x(yi, qi, Bi, mu1)
        return 0.0, r_top / self.table.scales[i]

    def s_domain(self) -> tuple[float, float]:
        y1, q1 = self.table.Y[self.best], self.table.Q[self.best]
        mu2 = self.table.means[self.runner_up]
        return 0.0, c1_of_x(y1, q1, mu2) / self.table.scales[self.best]

    def g(self, i: int, r: float) -> float:
        """C_1i whose tilted best-arm mean equals arm i's mean tilted by C_i = r."""
        yi, qi, Bi = self._arm(i)
        lo, hi = self.r_domain(i)
        if not lo <= r <= hi * (1 + 1e-12):
            raise ValueError(f"r={r} outside [{lo}, {hi}]")
        rr = r * self.table.scales[i]
        x = _mean_up(yi, qi, rr)
        if rr * Bi >= 1.0 - 1e-12 and _ymax(yi, qi) < Bi:
            # clamped at 1/B: the added atom at B carries the mean up to the domain end
            x = self.table.means[self.best]
        y1, q1 = self.table.Y[self.best], self.table.Q[self.best]
        return c1_of_x(y1, q1, x) / self.table.scales[self.best]

    def _f2(self, s: float) -> float:
        y1, q1 = self.table.Y[self.best], self.table.Q[self.best]
        y2, q2, B2 = self._arm(self.runner_up)
        return f_value(y1, q1, y2, q2, B2, s * self.table.scales[self.best])[0]

    def xi(self, i: int, s: float) -> float:
        """C_1i equalizing arm i's value with the runner-up's at C_12 = s."""
        lo, hi = self.s_domain()
        if not lo <= s <= hi:
            raise ValueError(f"s={s} outside [{lo}, {hi}]")
        if i == self.runner_up:
            return s
        y1, q1 = self.table.Y[self.best], self.table.Q[self.best]
        yi, qi, Bi = self._arm(i)
        c, ok = match_c(y1, q1, yi, qi, Bi, self._f2(s))
        if not ok:
            raise ValueError("xi undefined: target value above arm's range")
        return c / self.table.scales[self.best]

    def _parts(self, i: int, c1_scaled: float):
        y1, q1 = self.table.Y[self.best], self.table.Q[self.best]
        yi, qi, Bi = self._arm(i)
        f, x, r, k1, ki = f_value(y1, q1, yi, qi, Bi, c1_scaled * self.table.scales[self.best])
        return x, r, k1, ki

    def h(self, i: int, s: float) -> float:
        """Ratio of the best-arm and arm-i brackets (no gamma factors) at C_12 = s."""
        c = self.xi(i, s)
        _, _, k1, ki = self._parts(i, c)
        t = self.table
        return (k1 / t.scales[self.best]) / (ki / t.scales[i]) if ki > 0 else np.inf

    def sum_condition(self, s: float) -> float:
        """sum_i gamma^{alpha_1 - alpha_i} h_i(s); equals 1 at the optimum."""
        t = self.table
        return sum(t.scales[self.best] / t.scales[i] * self.h(int(i), s) for i in self.adv)

    def h_at_runner_up_zero(self, i: int) -> float:
        """h_i at the point where the runner-up's multiplier C_2 vanishes.

        There the runner-up's tilted mean is mu_2 itself and its value is
        f_2(0) = sum_j q_1j log(1 + c y_1j) - c mu_2 with c = c1_of_x(mu_2);
        arm i's multipliers follow by matching that value.
        """
        t = self.table
        y1, q1 = t.Y[self.best], t.Q[self.best]
        mu2 = t.means[self.runner_up]
        c = c1_of_x(y1, q1, mu2)
        target = kl1_part(y1, q1, c, mu2)
        yi, qi, Bi = self._arm(i)
        ci, ok = match_c(y1, q1, yi, qi, Bi, target)
        if not ok:
            raise ValueError("runner-up limit outside arm's range")
        _, _, _, k1, ki = f_value(y1, q1, yi, qi, Bi, ci)
        return (k1 / t.scales[self.best]) / (ki / t.scales[i])


class ApproxLowerBound(BaseEstimator):
    """Estimator wrapper around solve_approx_maxmin."""

    def __init__(self, maxiter: int = 200, sum_tol: float = 1e-8):
        self.maxiter = maxiter
        self.sum_tol = sum_tol

    def fit(self, instance, y=None):
        self.solution_ = solve_approx_maxmin(instance, self.maxiter, self.sum_tol)
        self.weights_ = self.solution_.weights
        self.value_ = self.solution_.value
        return self
