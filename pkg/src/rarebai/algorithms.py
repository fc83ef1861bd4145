"""Fixed-confidence best-arm identification: Track-and-Stop and Successive Elimination.

TS(A) and TS(E) share one loop and differ only in the weight solver
(approximate vs exact max-min problem).  Both read rewards from per-arm
RewardTapes keyed by the trial seed, so the two algorithms see the same
k-th reward of every arm: paired runs use common random numbers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .approx import solve_approx_maxmin
from .exact import ConvergenceError, inner_core, solve_exact_maxmin
from .instance import BanditInstance, EmpiricalState, RewardTape, make_rng

DEFAULT_CAP = 10**8

# rng stream keys below the trial seed
_TAPE, _ALLOC, _SE = 0, 1, 2


def beta(t: float, delta: float, K: int) -> float:
    """Stopping threshold log((K-1)/delta) + 5 log(t+1) + 2."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return math.log((K - 1) / delta) + 5.0 * math.log(t + 1.0) + 2.0


@dataclass(frozen=True)
class StoppingRule:
    delta: float
    batch_size: int
    K: int

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.batch_size < self.K:
            raise ValueError("batch size must be at least K")

    def threshold(self, t: float) -> float:
        return beta(t, self.delta, self.K)


@dataclass
class TrialReport:
    algorithm: str
    recommended: int
    tau: int
    counts: np.ndarray
    batches: int
    solver_time: float
    wall_time: float
    seed: int
    sampling_time: float = 0.0
    solver_calls: int = 0
    z_final: float = float("nan")
    threshold_final: float = float("nan")
    z_previous: float = float("nan")
    hit_cap: bool = False
    correct: bool | None = None
    notes: list = field(default_factory=list)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["counts"] = [int(c) for c in self.counts]
        return d


class TrialAborted(RuntimeError):
    """The weight solver failed twice within one batch."""

    def __init__(self, message: str, seed: int, batch: int):
        super().__init__(f"{message} (seed={seed}, batch={batch})")
        self.seed = seed
        self.batch = batch


# ------------------------------------------------------------ statistic


def glr_statistic(state: EmpiricalState, bounds) -> tuple[float, int, int]:
    """Return (Z, k*, nearest challenger) for the empirical instance.

    Z = min_b [N_k K^L(p_k, x*) + N_b K^U(p_b, x*)] at the exact crossing
    point; Z = 0 when a challenger's empirical mean ties k*.
    """
    N = state.pulls
    if np.any(N == 0):
        raise ValueError("every arm needs at least one sample")
    t = state.table(bounds)
    k = t.best
    Z, arg = np.inf, -1
    for b in range(t.K):
        if b == k:
            continue
        v = inner_core(t.Y[k], t.Q[k], t.Y[b], t.Q[b], t.bounds[b], float(N[k]), float(N[b]))[1]
        if v < Z:
            Z, arg = v, b
    return float(Z), int(k), int(arg)


def forced_exploration_shortfall(l: int, m: int, counts) -> tuple[np.ndarray, np.ndarray]:
    """Forced-exploration targets and the samples spent on them this batch.

    Returns (s, spend) with s_i = ceil((sqrt((l+1) m) - N_i)^+).  When the
    batch cannot cover every shortfall, `spend` minimizes the largest
    remaining shortfall max_i (s_i - spend_i): the withheld amount
    D = sum(s) - m is taken off the largest shortfalls by lowering a common
    level, ties going to the lowest index.
    """
    if l < 1:
        raise ValueError("batch index starts at 1")
    N = np.asarray(counts, dtype=float)
    s = np.ceil(np.maximum(0.0, math.sqrt((l + 1) * m) - N) - 1e-9).astype(np.int64)
    s = np.maximum(s, 0)
    return s, load_balance(s, m)


def load_balance(s, m: int) -> np.ndarray:
    """Integer 0 <= spend <= s with sum min(m, sum s) minimizing max(s - spend)."""
    s = np.asarray(s, dtype=np.int64)
    total = int(s.sum())
    if total <= m:
        return s.copy()
    D = total - m
    # smallest level L with sum_i min(s_i, L) >= D
    lo, hi = 0, int(s.max())
    while lo < hi:
        mid = (lo + hi) // 2
        if int(np.minimum(s, mid).sum()) >= D:
            hi = mid
        else:
            lo = mid + 1
    L = lo
    d = np.minimum(s, L - 1)
    rem = D - int(d.sum())
    for i in np.flatnonzero(s >= L):
        if rem == 0:
            break
        d[i] += 1
        rem -= 1
    return s - d


# ------------------------------------------------------------- weights


def _solve(table, solver: str, relaxed: bool):
    if solver == "approx":
        if relaxed:
            return solve_approx_maxmin(table, maxiter=400, sum_tol=1e-5, check=False).weights
        return solve_approx_maxmin(table).weights
    if relaxed:
        return solve_exact_maxmin(table, maxiter=400, check=False).weights
    return solve_exact_maxmin(table).weights


def empirical_weights(state: EmpiricalState, bounds, solver: str = "approx",
                      relaxed: bool = False) -> tuple[np.ndarray, str]:
    """Plug-in optimal proportions for the empirical instance.

    Arms with no nonzero observation are given a pseudo-atom at their bound
    with probability 1/N_i so the problem is well posed, and receive weight
    1/K; the other weights keep the solver's proportions.  A tie for the
    empirical best mean makes the problem ill posed: uniform weights.
    """
    K = state.K
    means = state.means()
    if np.count_nonzero(means == means.max()) > 1:
        return np.full(K, 1.0 / K), "tie"
    pseudo = [i for i in range(K) if not state.has_nonzero(i)]
    table = state.table(bounds, pseudo=True)
    tm = table.means
    if np.count_nonzero(tm == tm.max()) > 1:
        return np.full(K, 1.0 / K), "tie"
    w = np.asarray(_solve(table, solver, relaxed), dtype=float)
    if pseudo:
        rest = [i for i in range(K) if i not in pseudo]
        w_rest = w[rest] / w[rest].sum()
        w = np.empty(K)
        w[pseudo] = 1.0 / K
        w[rest] = w_rest * (1.0 - len(pseudo) / K)
        return w, "pseudo"
    return w, "ok"


# ---------------------------------------------------------- track & stop


def default_batch_size(instance: BanditInstance) -> int:
    return int(math.ceil(instance.gamma ** (-float(instance.alphas.max())) - 1e-9))


def run_track_and_stop(instance: BanditInstance, delta: float, m: int | None = None,
                       seed: int = 0, solver: str = "approx", max_samples: int = DEFAULT_CAP,
                       max_batches: int | None = None, weight_fn=None) -> TrialReport:
    """Batched Track-and-Stop with forced exploration and the GLR stopping rule.

    `weight_fn(state, bounds) -> weights` replaces the plug-in solver (used
    to study tracking); `max_batches` ends the run without a stopping
    decision.
    """
    if solver not in ("approx", "exact"):
        raise ValueError("solver must be 'approx' or 'exact'")
    K = instance.K
    m = default_batch_size(instance) if m is None else int(m)
    rule = StoppingRule(delta, m, K)
    bounds = instance.real_bounds
    tapes = [RewardTape(instance.real_arm(i)[1], make_rng(seed, _TAPE, i)) for i in range(K)]
    alloc_rng = make_rng(seed, _ALLOC)
    state = EmpiricalState.for_instance(instance)
    notes: list = []
    t_start = time.perf_counter()
    t_sample = 0.0
    t_solver = 0.0
    calls = 0

    def draw(n_per_arm):
        nonlocal t_sample
        t0 = time.perf_counter()
        for i, n in enumerate(n_per_arm):
            if n > 0:
                state.add(i, tapes[i].pull(int(n)), int(n))
        t_sample += time.perf_counter() - t0

    draw([m // K] * K)
    l = 1
    z_prev = float("nan")
    hit_cap = False
    while True:
        Z, k_star, _ = glr_statistic(state, bounds)
        thr = rule.threshold(l * m)
        if l >= 2 and Z >= thr:
            break
        if max_batches is not None and l >= max_batches:
            break
        if state.total >= max_samples:
            hit_cap = True
            notes.append("sample cap reached")
            break
        z_prev = Z
        t0 = time.perf_counter()
        if weight_fn is not None:
            w = np.asarray(weight_fn(state, bounds), dtype=float)
        else:
            try:
                w, status = empirical_weights(state, bounds, solver)
            except (ConvergenceError, ValueError, FloatingPointError) as exc:
                try:
                    w, status = empirical_weights(state, bounds, solver, relaxed=True)
                    notes.append(f"batch {l}: relaxed retry after {exc}")
                except (ConvergenceError, ValueError, FloatingPointError) as exc2:
                    raise TrialAborted(f"weight solver failed: {exc2}", seed, l) from exc2
            calls += 1
        t_solver += time.perf_counter() - t0
        s, spend = forced_exploration_shortfall(l, m, state.pulls)
        rest = m - int(spend.sum())
        extra = alloc_rng.multinomial(rest, w / w.sum()) if rest > 0 else np.zeros(K, dtype=np.int64)
        draw(spend + extra)
        l += 1
    name = "tsa" if solver == "approx" else "tse"
    return TrialReport(
        algorithm=name, recommended=k_star, tau=state.total, counts=state.pulls,
        batches=l, solver_time=t_solver, wall_time=time.perf_counter() - t_start,
        seed=seed, sampling_time=t_sample, solver_calls=calls, z_final=Z,
        threshold_final=thr, z_previous=z_prev, hit_cap=hit_cap,
        correct=k_star == instance.best_arm, notes=notes)


def run_tsa(instance, delta, m=None, seed=0, **kw) -> TrialReport:
    """Track-and-Stop with weights from the approximate problem."""
    return run_track_and_stop(instance, delta, m, seed, solver="approx", **kw)


def run_tse(instance, delta, m=None, seed=0, **kw) -> TrialReport:
    """Track-and-Stop with weights from the exact problem."""
    return run_track_and_stop(instance, delta, m, seed, solver="exact", **kw)


# -------------------------------------------------- successive elimination


def run_successive_elimination(instance: BanditInstance, delta: float, seed: int = 0,
                               resolution: float = 0.01, block: int = 64,
                               max_rounds: float = 1e18) -> TrialReport:
    """Successive Elimination on rewards divided by the largest real bound.

    Rounds (one pull of every surviving arm) are simulated in bulk: the
    elimination test is evaluated on a grid of rounds spaced by
    max(1, floor(resolution * t)), with the reward sums between grid points
    drawn as multinomial atom counts.  While resolution * t < 1 every round
    is tested, so the run is exact; later an elimination is detected at the
    next grid point.  Testing at a subset of rounds keeps the union bound
    behind the confidence radius valid.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    K = instance.K
    scale = float(instance.real_bounds.max())
    rng = make_rng(seed, _SE)
    vals, pv = [], []
    for i in range(K):
        v, p = instance.real_arm(i)
        vals.append(v / scale)
        pv.append(np.append(p, max(0.0, 1.0 - p.sum())))
    alive = list(range(K))
    sums = np.zeros(K)
    rounds = np.zeros(K, dtype=np.int64)
    t = 0
    t_start = time.perf_counter()
    hit_cap = False
    while len(alive) > 1:
        steps = np.empty(block, dtype=np.int64)
        tt = t
        for j in range(block):
            steps[j] = max(1, int(resolution * tt))
            tt += steps[j]
        T = t + np.cumsum(steps)
        inc = np.empty((len(alive), block))
        for a, i in enumerate(alive):
            cnt = rng.multinomial(steps, pv[i])
            inc[a] = cnt[:, :-1] @ vals[i]
        S = sums[alive][:, None] + np.cumsum(inc, axis=1)
        M = S / T
        xi = np.sqrt(np.log(4.0 * K * T.astype(float) ** 2 / delta) / T)
        elim = (M.max(axis=0) - M) >= 2.0 * xi
        hit = np.flatnonzero(elim.any(axis=0))
        j = int(hit[0]) if hit.size else block - 1
        for a, i in enumerate(alive):
            sums[i] = S[a, j]
            rounds[i] = T[j]
        t = int(T[j])
        if hit.size:
            alive = [i for a, i in enumerate(alive) if not elim[a, j]]
        if t >= max_rounds:
            hit_cap = True
            break
    means = np.where(rounds > 0, sums / np.maximum(rounds, 1), -np.inf)
    rec = alive[0] if len(alive) == 1 else int(max(alive, key=lambda i: (means[i], -i)))
    return TrialReport(
        algorithm="se", recommended=int(rec), tau=int(rounds.sum()), counts=rounds.copy(),
        batches=t, solver_time=0.0, wall_time=time.perf_counter() - t_start, seed=seed,
        hit_cap=hit_cap, correct=rec == instance.best_arm)


# ----------------------------------------------------------- estimators


class TrackAndStop(BaseEstimator):
    """Estimator wrapper: fit(instance) runs one seeded trial."""

    def __init__(self, delta: float = 0.01, batch_size: int | None = None,
                 solver: str = "approx", seed: int = 0, max_samples: int = DEFAULT_CAP):
        self.delta = delta
        self.batch_size = batch_size
        self.solver = solver
        self.seed = seed
        self.max_samples = max_samples

    def fit(self, instance, y=None):
        self.report_ = run_track_and_stop(instance, self.delta, self.batch_size, self.seed,
                                          solver=self.solver, max_samples=self.max_samples)
        self.best_arm_ = self.report_.recommended
        self.stopping_time_ = self.report_.tau
        return self


class SuccessiveElimination(BaseEstimator):
    def __init__(self, delta: float = 0.01, seed: int = 0, resolution: float = 0.01):
        self.delta = delta
        self.seed = seed
        self.resolution = resolution

    def fit(self, instance, y=None):
        self.report_ = run_successive_elimination(instance, self.delta, self.seed, self.resolution)
        self.best_arm_ = self.report_.recommended
        self.stopping_time_ = self.report_.tau
        return self
