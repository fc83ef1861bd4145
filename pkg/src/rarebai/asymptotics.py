"""Small-gamma behaviour of the optimal allocation.

Weights scale as w*_i = Theta(gamma^{e_i}).  With arm 1 the best arm,
arm 2 the runner-up (largest mean among the rest) and a_max the largest
rarity exponent:

    regime 1  a_1 < a_max              e_1 = (a_max - a_1)/2, e_i = a_max - a_i
    regime 2  a_1 = a_max > a_i, i!=1  e_2 = (a_max - a_2)/2, e_i = a_max - a_i
    regime 3  a_1 = a_2 = a_max        e_i = a_max - a_i
    regime 4  a_1 = a_k = a_max > a_2, zeta > 1    e_i = a_max - a_i
    regime 5  a_1 = a_k = a_max > a_2, zeta <= 1   e_2 = (a_max - a_2)/2, e_i = a_max - a_i

zeta sums h_k over the rarest non-best arms at the point where the
runner-up's multiplier C_2 vanishes.  When zeta > 1 the rarest arms alone
can satisfy the sum condition, so C_2 stays bounded away from zero and the
runner-up's weight is of order gamma^{a_1 - a_2}; otherwise C_2 -> 0 at
rate gamma^{(a_1 - a_2)/2} exactly as in regime 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .approx import Cascade, c1_of_x, ci_of_x, kl1_part, kli_part, match_c, solve_approx_maxmin
from .instance import BanditInstance


@dataclass(frozen=True)
class RegimeReport:
    regime: int
    alpha_max: float
    exponents: np.ndarray
    best: int
    runner_up: int
    zeta: float | None = None
    flags: tuple = ()
    constants: dict = field(default_factory=dict)


def classify(instance: BanditInstance) -> RegimeReport:
    al = instance.alphas
    mu = instance.means
    best = int(np.argmax(mu))
    others = [i for i in range(instance.K) if i != best]
    ru = max(others, key=lambda i: (mu[i], -i))
    amax = float(al.max())
    a1, a2 = al[best], al[ru]
    e = amax - al
    zeta = None
    flags = []
    if a1 != amax:
        regime = 1
        e[best] = (amax - a1) / 2
    elif all(al[i] < amax for i in others):
        regime = 2
        e[ru] = (amax - a2) / 2
    elif a2 == amax:
        regime = 3
        if any(al[i] == amax for i in others if i != ru):
            flags.append("rarity tie among several non-best arms")
    else:
        cas = Cascade(instance)
        rarest = [k for k in others if al[k] == amax]
        zeta = float(sum(cas.h_at_runner_up_zero(k) for k in rarest))
        if len(rarest) > 1:
            flags.append("rarity tie among several non-best arms")
        if zeta > 1.0:
            regime = 4
        else:
            regime = 5
            e[ru] = (amax - a2) / 2
    e[best] = e[best] if regime == 1 else 0.0
    return RegimeReport(regime, amax, e, best, ru, zeta, tuple(flags))


def limiting_constants(instance: BanditInstance, report: RegimeReport | None = None) -> dict:
    """Limits of the scaled multipliers as gamma -> 0.

    A[i]     : root of mu_1 = sum_j a_ij p_ij / (1 - A a_ij) on (0, 1/max_j a_ij).
    A_eff[i] : the C_i limit as the best arm's tilt vanishes (x -> mu_1); equals
               A[i] unless A[i] >= 1/B_i, where the tilt saturates and part of
               the mass moves to the bound, giving 1/B_i.
    M[i]  : regime 1, the coefficient in sum_i M_i (w_i/w_1)^2 gamma^{a_i-a_1} = 1.
    A1[i] : regimes 2-5, limits of C_1i.
    M2    : regimes 2 and 5, lim w_2 / (w_1 gamma^{(a_1-a_2)/2}).
    """
    rep = report or classify(instance)
    t = instance.table()
    b, ru = rep.best, rep.runner_up
    sc = t.scales
    y1, q1 = t.Y[b], t.Q[b]
    mu1 = t.means[b]
    arm1 = instance.arms[b]
    m2_best = float(np.sum(arm1.values ** 2 * arm1.probs))
    out: dict = {"A": {}, "A_eff": {}, "A1": {}, "M": {}, "zeta": rep.zeta}
    for i in range(t.K):
        if i == b:
            continue
        out["A"][i] = mean_equation_root(instance.arms[i], instance.arms[b].mean)
        r = ci_of_x(t.Y[i], t.Q[i], t.bounds[i], mu1)
        out["A_eff"][i] = float(r / sc[i])
        if rep.regime == 1:
            ki = kli_part(t.Y[i], t.Q[i], r, mu1) / sc[i]
            out["M"][i] = float((r / sc[i]) ** 2 * m2_best / 2.0 / ki)
    if rep.regime in (2, 5):
        mu2 = t.means[ru]
        c = c1_of_x(y1, q1, mu2)
        target = kl1_part(y1, q1, c, mu2)
        out["A1"][ru] = float(c / sc[b])
        for i in range(t.K):
            if i in (b, ru):
                continue
            ci, ok = match_c(y1, q1, t.Y[i], t.Q[i], t.bounds[i], target)
            out["A1"][i] = float(ci / sc[b])
        arm2 = instance.arms[ru]
        m2 = float(np.sum(arm2.values ** 2 * arm2.probs))
        kl1 = target / sc[b]
        z = rep.zeta or 0.0
        a12 = c / sc[b]
        out["M2"] = float(a12) * math.sqrt((1.0 - z) * m2 / (2.0 * kl1)) if z < 1 else float("nan")
    elif rep.regime in (3, 4):
        # only arms of maximal rarity survive in the sum condition
        sol = _limit_cascade(instance, rep)
        out["A1"].update(sol)
    return out


def mean_equation_root(arm, mu1: float) -> float:
    """Root A of mu1 = sum_j a_j p_j / (1 - A a_j) in scaled units."""
    a, p = arm.values, arm.probs
    top = 1.0 / float(a.max())

    def resid(A):
        return float(np.sum(a * p / (1.0 - A * a))) - mu1

    if not arm.mean < mu1:
        raise ValueError("root outside (0, 1/max_j a_ij): arm mean is not below mu_1")
    hi = top
    for k in range(1, 200):
        hi = top * (1.0 - 2.0 ** -k)
        if resid(hi) > 0:
            break
    else:
        raise ValueError("root outside (0, 1/max_j a_ij)")
    return float(brentq(resid, 0.0, hi, xtol=1e-300, rtol=1e-15))


def _limit_cascade(instance: BanditInstance, rep: RegimeReport) -> dict:
    """C_1i limits when the sum condition keeps only the rarest arms."""
    cas = Cascade(instance)
    al = instance.alphas
    rarest = [k for k in range(instance.K) if k != rep.best and al[k] == rep.alpha_max]
    lo, hi = cas.s_domain()

    def resid(s):
        return sum(cas.h(k, s) for k in rarest) - 1.0

    a, b = hi * 1e-9, hi * (1 - 1e-9)
    if resid(a) * resid(b) > 0:
        return {}
    s = brentq(resid, a, b, xtol=1e-300, rtol=1e-15)
    return {int(i): float(cas.xi(int(i), s)) for i in cas.adv}


def verify_exponents(instance: BanditInstance, gammas) -> list[dict]:
    """Regress log w*_i on log gamma and compare with the predicted exponents."""
    g = np.asarray(sorted(gammas, reverse=True), dtype=float)
    if g.size < 3:
        raise ValueError("need at least three gamma values")
    rep = classify(instance)
    W = np.array([solve_approx_maxmin(instance.with_gamma(x)).weights for x in g])
    slopes = np.polyfit(np.log(g), np.log(W), 1)[0]
    return [{"arm": i, "slope": float(slopes[i]), "predicted": float(rep.exponents[i]),
             "error": float(abs(slopes[i] - rep.exponents[i]))} for i in range(instance.K)]
