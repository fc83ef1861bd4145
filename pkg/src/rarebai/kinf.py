"""K_inf for finite-support distributions on [0, B].

K^U(eta, x) is the smallest KL(eta, kappa) over kappa supported in [0, B]
with mean >= x; K^L(eta, x) the same with mean <= x.  Both are computed
through their one-dimensional concave duals

    K^U = max_{0 <= lam <= 1/(B-x)} sum_j eta_j log(1 + lam (x - y_j))
    K^L = max_{0 <= lam <= 1/x}     sum_j eta_j log(1 - lam (x - y_j))

The stationarity equation is solved in the rescaled variable
t = lam (B - x) (resp. t = lam x), which lives in [0, 1] regardless of how
large the rewards are.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import minimize

from ._brent import EPS, brent_feed, brent_next, brent_start

ZERO, INTERIOR, BOUNDARY = 0, 1, 2
REGIME_NAMES = {ZERO: "interior-zero", INTERIOR: "interior-root", BOUNDARY: "boundary"}

_MAXITER = 200


@njit(cache=True)
def _dot(y, q):
    s = 0.0
    for j in range(y.shape[0]):
        s += y[j] * q[j]
    return s


@njit(cache=True)
def _phi_upper(y, q, x, bx, t):
    s = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            d = x - y[j]
            s += q[j] * d / (1.0 + t * d / bx)
    return s


@njit(cache=True)
def _val_upper(y, q, x, bx, t):
    s = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            s += q[j] * np.log1p(t * (x - y[j]) / bx)
    return s


@njit(cache=True)
def ku_core(y, q, x, B):
    """Return (value, lam, regime, mass_at_B) for K^U(eta, x)."""
    mu = _dot(y, q)
    if x <= mu:
        return 0.0, 0.0, ZERO, 0.0
    bx = B - x
    S = 0.0
    at_b = False
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            if y[j] >= B:
                at_b = True
            else:
                S += q[j] * bx / (B - y[j])
    if not at_b and S < 1.0:
        return _val_upper(y, q, x, bx, 1.0), 1.0 / bx, BOUNDARY, 1.0 - S
    lo = 0.0
    flo = x - mu
    hi = 1.0
    if at_b:
        # the derivative is -inf at t = 1, walk in until it is finite
        for k in range(1, 60):
            hi = 1.0 - 0.5**k
            if _phi_upper(y, q, x, bx, hi) < 0.0:
                break
    fhi = _phi_upper(y, q, x, bx, hi)
    if fhi >= 0.0:
        t = hi
    else:
        s = brent_start(lo, hi, flo, fhi)
        for _ in range(_MAXITER):
            tn = brent_next(s, 0.0, 2.0 * EPS)
            if s[8] > 0.0:
                break
            brent_feed(s, _phi_upper(y, q, x, bx, tn))
        t = s[1]
    return _val_upper(y, q, x, bx, t), t / bx, INTERIOR, 0.0


@njit(cache=True)
def _phi_lower(y, q, x, t):
    s = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            d = y[j] - x
            s += q[j] * d / (1.0 + t * d / x)
    return s


@njit(cache=True)
def _val_lower(y, q, x, t):
    s = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            s += q[j] * np.log1p(t * (y[j] - x) / x)
    return s


@njit(cache=True)
def kl_core(y, q, x):
    """Return (value, lam, regime, mass_at_0) for K^L(eta, x)."""
    mu = _dot(y, q)
    if x >= mu:
        return 0.0, 0.0, ZERO, 0.0
    if x <= 0.0:
        # all mass must move to 0; the multiplier is unbounded
        q0 = 0.0
        for j in range(y.shape[0]):
            if y[j] <= 0.0:
                q0 += q[j]
        v = -np.log(q0) if q0 > 0.0 else np.inf
        return v, np.inf, BOUNDARY, 1.0 - q0
    has0 = False
    S = 0.0
    for j in range(y.shape[0]):
        if q[j] > 0.0:
            if y[j] <= 0.0:
                has0 = True
            else:
                S += q[j] * x / y[j]
    if not has0 and S < 1.0:
        # no mass at 0 in eta and the optimum moves mass onto 0
        return _val_lower(y, q, x, 1.0), 1.0 / x, BOUNDARY, 1.0 - S
    lo = 0.0
    flo = mu - x
    hi = 1.0
    if has0:
        for k in range(1, 60):
            hi = 1.0 - 0.5**k
            if _phi_lower(y, q, x, hi) < 0.0:
                break
    fhi = _phi_lower(y, q, x, hi)
    if fhi >= 0.0:
        t = hi
    else:
        s = brent_start(lo, hi, flo, fhi)
        for _ in range(_MAXITER):
            tn = brent_next(s, 0.0, 2.0 * EPS)
            if s[8] > 0.0:
                break
            brent_feed(s, _phi_lower(y, q, x, tn))
        t = s[1]
    return _val_lower(y, q, x, t), t / x, INTERIOR, 0.0


@dataclass(frozen=True)
class DualSolutionU:
    value: float
    lambda_U: float
    regime: str
    mass_at_B: float
    support: np.ndarray
    kappa: np.ndarray  # primal optimizer on `support`; mass_at_B is extra


@dataclass(frozen=True)
class DualSolutionL:
    value: float
    lambda_L: float
    regime: str
    mass_at_0: float
    support: np.ndarray
    kappa: np.ndarray


def as_distribution(values, probs) -> tuple[np.ndarray, np.ndarray]:
    """Validate a finite distribution; renormalize tiny rounding drift."""
    y = np.ascontiguousarray(values, dtype=float).ravel()
    q = np.ascontiguousarray(probs, dtype=float).ravel()
    if y.shape != q.shape or y.size == 0:
        raise ValueError("values and probs must be nonempty and the same length")
    if np.any(q < 0) or not np.all(np.isfinite(q)):
        raise ValueError("probabilities must be finite and nonnegative")
    if np.any(y < 0):
        raise ValueError("support must lie in [0, B]")
    total = q.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"distribution not normalized (sum={total!r})")
    return y, q / total


def kinf_upper(values, probs, x: float, bound: float) -> DualSolutionU:
    """K^U(eta, x) with support bound `bound`."""
    y, q = as_distribution(values, probs)
    if not 0.0 < x < bound:
        raise ValueError("need 0 < x < B")
    if np.any(y > bound):
        raise ValueError("support exceeds the bound")
    val, lam, reg, mb = ku_core(y, q, float(x), float(bound))
    kappa = q / (1.0 + lam * (x - y))
    return DualSolutionU(val, lam, REGIME_NAMES[reg], mb, y, kappa)


def kinf_lower(values, probs, x: float) -> DualSolutionL:
    """K^L(eta, x); the support may gain the point 0."""
    y, q = as_distribution(values, probs)
    if x <= 0.0:
        raise ValueError("need x > 0")
    val, lam, reg, m0 = kl_core(y, q, float(x))
    kappa = q / (1.0 - lam * (x - y))
    return DualSolutionL(val, lam, REGIME_NAMES[reg], m0, y, kappa)


def kinf_oracle(values, probs, x: float, bound: float, direction: str) -> float:
    """Primal K_inf by direct constrained minimization (test oracle).

    Minimizes KL(eta, kappa) over kappa on supp(eta) plus the extreme point
    (B for "U", 0 for "L") subject to the mean constraint.  Starts from
    the feasible mixture of eta with the extreme point, then refines a few
    mixture fractions with SLSQP and keeps the best feasible answer.
    """
    y, q = as_distribution(values, probs)
    keep = q > 0
    y, q = y[keep], q[keep]
    mu = float(y @ q)
    if direction == "U":
        if x <= mu:
            return 0.0
        extra = float(bound)
    elif direction == "L":
        if x >= mu:
            return 0.0
        extra = 0.0
    else:
        raise ValueError("direction must be 'U' or 'L'")

    if np.any(y == extra):
        z = y
        w = q
    else:
        z = np.append(y, extra)
        w = np.append(q, 0.0)
    pos = w > 0
    sign = 1.0 if direction == "U" else -1.0
    zs = z / max(1.0, float(np.max(z)))
    xs = x / max(1.0, float(np.max(z)))

    def obj(k):
        with np.errstate(divide="ignore"):  # zero mass on a support atom: +inf
            return float(np.sum(w[pos] * np.log(w[pos] / k[pos])))

    def grad(k):
        g = np.zeros_like(k)
        g[pos] = -w[pos] / k[pos]
        return g

    cons = (
        {"type": "eq", "fun": lambda k: np.sum(k) - 1.0, "jac": lambda k: np.ones_like(k)},
        {"type": "ineq", "fun": lambda k: sign * (zs @ k - xs), "jac": lambda k: sign * zs},
    )
    bounds = [(1e-300, 1.0) if p else (0.0, 1.0) for p in pos]
    ext = np.flatnonzero(z == extra)[0]
    theta0 = (x - mu) / (extra - mu)
    best = np.inf
    for theta in np.unique(np.clip([theta0, 0.5 * (1 + theta0), theta0 + 1e-3], 0, 1 - 1e-9)):
        k0 = (1.0 - theta) * w
        k0[ext] += theta
        with warnings.catch_warnings():
            # SLSQP clips steps that leave the box; harmless here
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(obj, k0, jac=grad, bounds=bounds, constraints=cons,
                           method="SLSQP", options={"ftol": 1e-15, "maxiter": 1000})
        k = np.clip(res.x, 0.0, None)
        k = k / k.sum()
        if sign * (zs @ k - xs) >= -1e-10:
            best = min(best, obj(k))
    # the mixture start is itself feasible
    k0 = (1.0 - theta0) * w
    k0[ext] += theta0
    return float(min(best, obj(k0)))


def f0_threshold(spec, gamma: float) -> float:
    """Mean above which K^U of the arm puts mass on its bound.

    F_0(gamma) = B / (R^{-1} + gamma^alpha) with R = sum_j a_j p_j / (B - a_j),
    all in scaled units; gamma = 0 gives the limit used by the approximate
    problem.
    """
    a, p, bound = spec.values, spec.probs, spec.bound
    if np.any(a >= bound):
        raise ValueError("an atom sits at the bound; the threshold degenerates")
    R = float(np.sum(a * p / (bound - a)))
    if R <= 0.0:
        return 0.0
    ga = 0.0 if gamma == 0 else gamma ** spec.alpha
    return bound / (1.0 / R + ga)
