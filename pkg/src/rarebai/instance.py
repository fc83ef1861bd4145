"""Rare-event bandit instances, sampling, and empirical state.

Arm i pays a_ij * gamma**(-alpha_i) with probability p_ij * gamma**alpha_i
and 0 otherwise, so its mean sum_j a_ij p_ij does not depend on gamma.
Atoms and probabilities are stored in this scaled form; real-scale arrays
are produced on demand for the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MEAN_TIE_TOL = 1e-12


@dataclass(frozen=True)
class ArmSpec:
    """One arm: rarity exponent, scaled (value, prob) atoms, scaled bound."""

    alpha: float
    atoms: tuple = ()
    bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(a), float(p)) for a, p in self.atoms))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def values(self) -> np.ndarray:
        return np.array([a for a, _ in self.atoms], dtype=float)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms], dtype=float)

    @property
    def mean(self) -> float:
        return arm_mean(self)


def arm_mean(spec: ArmSpec) -> float:
    return float(sum(a * p for a, p in spec.atoms))


@dataclass(frozen=True)
class ArmTable:
    """Real-scale arrays for a set of arms, padded to a common width.

    Column 0 of every row is the zero reward.  `scales` holds gamma**alpha_i
    (ones for empirical instances) and is only used to report the scaled
    multipliers C = lambda / gamma**alpha.
    """

    Y: np.ndarray
    Q: np.ndarray
    bounds: np.ndarray
    scales: np.ndarray
    means: np.ndarray = field(init=False)
    best: int = field(init=False)

    def __post_init__(self):
        means = np.einsum("ij,ij->i", self.Y, self.Q)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "best", int(np.argmax(means)))

    @property
    def K(self) -> int:
        return self.Y.shape[0]

    def adversaries(self, best: int | None = None) -> np.ndarray:
        """Non-best arms ordered by decreasing mean (ties by index)."""
        b = self.best if best is None else best
        idx = np.array([i for i in range(self.K) if i != b], dtype=np.int64)
        order = np.lexsort((idx, -self.means[idx]))
        return idx[order]

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self.Y[i], self.Q[i]

    def nonzero_mass(self) -> np.ndarray:
        return np.where(self.Y > 0, self.Q, 0.0).sum(axis=1)


def pack_arms(rows, bounds, scales=None) -> ArmTable:
    """Build an ArmTable from per-arm (values, probs) of nonzero atoms."""
    K = len(rows)
    n = 1 + max((len(v) for v, _ in rows), default=0)
    Y = np.zeros((K, n))
    Q = np.zeros((K, n))
    for i, (v, p) in enumerate(rows):
        v = np.asarray(v, dtype=float)
        p = np.asarray(p, dtype=float)
        Y[i, 1:1 + v.size] = v
        Q[i, 1:1 + v.size] = p
        Q[i, 0] = max(0.0, 1.0 - p.sum())
    sc = np.ones(K) if scales is None else np.asarray(scales, dtype=float)
    return ArmTable(Y, Q, np.asarray(bounds, dtype=float), sc)


@dataclass(frozen=True)
class BanditInstance:
    gamma: float
    arms: tuple
    name: str = ""

    def __post_init__(self):
        arms = tuple(a if isinstance(a, ArmSpec) else ArmSpec(**a) for a in self.arms)
        object.__setattr__(self, "arms", arms)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def K(self) -> int:
        return len(self.arms)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([a.alpha for a in self.arms])

    @property
    def means(self) -> np.ndarray:
        return np.array([a.mean for a in self.arms])

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    @property
    def scales(self) -> np.ndarray:
        return self.gamma ** self.alphas

    @property
    def real_bounds(self) -> np.ndarray:
        return np.array([a.bound for a in self.arms]) / self.scales

    def real_arm(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero real-scale reward values and their probabilities."""
        arm = self.arms[i]
        s = self.gamma ** arm.alpha
        return arm.values / s, arm.probs * s

    def table(self) -> ArmTable:
        rows = [self.real_arm(i) for i in range(self.K)]
        return pack_arms(rows, self.real_bounds, self.scales)

    def with_gamma(self, gamma: float) -> "BanditInstance":
        return BanditInstance(gamma, self.arms, self.name)


def as_table(obj) -> ArmTable:
    if isinstance(obj, ArmTable):
        return obj
    if isinstance(obj, BanditInstance):
        return obj.table()
    raise TypeError(f"expected BanditInstance or ArmTable, got {type(obj).__name__}")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(instance: BanditInstance) -> ValidationReport:
    bad = []
    g = instance.gamma
    if not 0.0 < g < 1.0:
        bad.append(f"gamma={g} outside (0, 1)")
    if instance.K < 2:
        bad.append("need at least two arms")
    for i, arm in enumerate(instance.arms):
        tag = f"arm {i}"
        if not arm.alpha > 0:
            bad.append(f"{tag}: nonpositive alpha {arm.alpha}")
        if not arm.bound > 0:
            bad.append(f"{tag}: nonpositive bound {arm.bound}")
        vals, probs = arm.values, arm.probs
        if np.any(vals <= 0):
            bad.append(f"{tag}: atom values must be strictly positive")
        if len(set(vals.tolist())) != len(vals):
            bad.append(f"{tag}: duplicated atom values")
        if np.any(vals > arm.bound):
            bad.append(f"{tag}: atom exceeds bound")
        if np.any(probs <= 0):
            bad.append(f"{tag}: atom probabilities must be strictly positive")
        if 0 < g < 1 and arm.alpha > 0:
            tot = float(probs.sum() * g ** arm.alpha)
            if tot > 1.0:
                bad.append(f"{tag}: total atom probability {tot:.4g} > 1")
    mu = instance.means
    for i in range(len(mu)):
        for j in range(i + 1, len(mu)):
            if abs(mu[i] - mu[j]) <= MEAN_TIE_TOL:
                bad.append(f"arms {i} and {j}: duplicated means {mu[i]:.6g}")
    return ValidationReport(tuple(bad))


# ---------------------------------------------------------------- sampling

def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for (master seed, key path)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def sample_arm(instance: BanditInstance, arm_index: int, rng: np.random.Generator) -> float:
    if not 0 <= arm_index < instance.K:
        raise IndexError(f"arm index {arm_index} out of range")
    vals, probs = instance.real_arm(arm_index)
    u = rng.random()
    j = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return float(vals[j]) if j < vals.size else 0.0


def sample_counts(instance: BanditInstance, arm_index: int, n: int, rng) -> np.ndarray:
    """Atom counts over n pulls; the last entry counts zero rewards."""
    vals, probs = instance.real_arm(arm_index)
    return rng.multinomial(int(n), np.append(probs, max(0.0, 1.0 - probs.sum())))


def atom_count_tv(spec: ArmSpec, gamma: float, t: float, reps: int, rng) -> np.ndarray:
    """Monte Carlo total variation between atom counts and their Poisson limit.

    Draws `reps` independent blocks of ceil(t gamma^-alpha) pulls and, for
    every atom j, compares the empirical law of its count with
    Poisson(p_j t).  Returns one distance per atom.
    """
    from scipy.stats import poisson

    n = int(np.ceil(t * gamma ** (-spec.alpha) - 1e-9))
    probs = spec.probs * gamma ** spec.alpha
    counts = rng.multinomial(n, np.append(probs, max(0.0, 1.0 - probs.sum())), size=int(reps))
    out = np.empty(probs.size)
    for j, p in enumerate(spec.probs):
        freq = np.bincount(counts[:, j]) / reps
        pmf = poisson.pmf(np.arange(freq.size), p * t)
        out[j] = 0.5 * (np.abs(freq - pmf).sum() + poisson.sf(freq.size - 1, p * t))
    return out


class RewardTape:
    """The reward sequence of one arm, generated lazily and replayable.

    Nonzero rewards form a Bernoulli process of rate q = sum_j p_j gamma^alpha;
    their positions are cumulative geometric gaps and their atoms are i.i.d.
    with probabilities proportional to p_j.  Two algorithms reading the same
    tape see the same k-th reward of every arm (common random numbers).
    """

    def __init__(self, probs, rng: np.random.Generator, chunk: int = 256):
        probs = np.asarray(probs, dtype=float)
        self.n_atoms = probs.size
        self.rate = float(probs.sum())
        self.cond = probs / self.rate if self.rate > 0 else probs
        self.rng = rng
        self.chunk = chunk
        self.pos = np.zeros(0, dtype=np.int64)
        self.lab = np.zeros(0, dtype=np.int64)
        self.read = 0      # pulls consumed
        self.cursor = 0    # events consumed

    def _extend(self, upto: int) -> None:
        while self.rate > 0 and (self.pos.size == 0 or self.pos[-1] <= upto):
            k = max(self.chunk, self.pos.size)
            gaps = self.rng.geometric(self.rate, size=k).astype(np.int64)
            start = self.pos[-1] if self.pos.size else 0
            self.pos = np.concatenate([self.pos, start + np.cumsum(gaps)])
            self.lab = np.concatenate([self.lab, self.rng.choice(self.n_atoms, size=k, p=self.cond)])

    def pull(self, n: int) -> np.ndarray:
        """Advance by n pulls; return per-atom counts of the nonzero rewards."""
        end = self.read + int(n)
        self._extend(end)
        stop = int(np.searchsorted(self.pos, end, side="right")) if self.rate > 0 else 0
        counts = np.bincount(self.lab[self.cursor:stop], minlength=self.n_atoms)
        self.cursor = stop
        self.read = end
        return counts


class EmpiricalState:
    """Per-arm pull counts and reward histograms.

    Observed values are kept per arm as a fixed menu (the instance's real
    atoms, or any explicit list) so that keys compare exactly.
    """

    def __init__(self, values, counts=None, zeros=None):
        self.values = [np.asarray(v, dtype=float) for v in values]
        K = len(self.values)
        self.counts = [np.zeros(v.size, dtype=np.int64) if counts is None
                       else np.asarray(counts[i], dtype=np.int64).copy()
                       for i, v in enumerate(self.values)]
        self.zeros = np.zeros(K, dtype=np.int64) if zeros is None else np.asarray(zeros, dtype=np.int64).copy()

    @classmethod
    def for_instance(cls, instance: BanditInstance) -> "EmpiricalState":
        return cls([instance.real_arm(i)[0] for i in range(instance.K)])

    @property
    def K(self) -> int:
        return len(self.values)

    @property
    def pulls(self) -> np.ndarray:
        return np.array([self.zeros[i] + self.counts[i].sum() for i in range(self.K)], dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.pulls.sum())

    def atom_counts(self, i: int) -> dict:
        return {float(v): int(c) for v, c in zip(self.values[i], self.counts[i]) if c > 0}

    def add(self, i: int, atom_counts, n_pulls: int) -> None:
        c = np.asarray(atom_counts, dtype=np.int64)
        self.counts[i] += c
        self.zeros[i] += int(n_pulls) - int(c.sum())

    def means(self) -> np.ndarray:
        N = self.pulls
        s = np.array([self.values[i] @ self.counts[i] for i in range(self.K)])
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(N > 0, s / np.maximum(N, 1), 0.0)

    def best(self) -> int:
        """Empirical argmax, ties broken by lowest index."""
        return int(np.argmax(self.means()))

    def has_nonzero(self, i: int) -> bool:
        return bool(self.counts[i].sum() > 0)

    def table(self, bounds, pseudo: bool = False) -> ArmTable:
        """Empirical instance as an ArmTable.

        With `pseudo`, arms without a nonzero observation get one atom at
        their bound with probability 1/N_i.
        """
        rows = []
        N = self.pulls
        for i in range(self.K):
            if N[i] == 0:
                raise ValueError(f"arm {i} has no samples")
            keep = self.counts[i] > 0
            v = self.values[i][keep]
            p = self.counts[i][keep] / N[i]
            if pseudo and v.size == 0:
                v = np.array([bounds[i]])
                p = np.array([1.0 / N[i]])
            rows.append((v, p))
        return pack_arms(rows, bounds)


def empirical_distribution(state: EmpiricalState, arm_index: int) -> tuple[np.ndarray, np.ndarray]:
    """(values, probs) of the empirical law of one arm, zero reward first."""
    N = int(state.pulls[arm_index])
    if N == 0:
        raise ValueError(f"arm {arm_index} has no samples")
    keep = state.counts[arm_index] > 0
    vals = state.values[arm_index][keep]
    probs = state.counts[arm_index][keep] / N
    z = int(state.zeros[arm_index])
    if z > 0:
        vals = np.concatenate([[0.0], vals])
        probs = np.concatenate([[z / N], probs])
    return vals, probs
