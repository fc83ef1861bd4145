"""Seeded trial campaigns, lower-bound reports and their serialization."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import yaml
from scipy.stats import binomtest

from .algorithms import TrialAborted, TrialReport, run_successive_elimination, run_track_and_stop
from .approx import solve_approx_maxmin
from .asymptotics import classify
from .exact import lower_bound_samples, solve_exact_maxmin
from .instance import ArmSpec, BanditInstance, validate

ALGORITHMS = ("tsa", "tse", "se")


class InstanceFormatError(ValueError):
    """The instance document is malformed or violates the instance invariants."""


class CampaignError(RuntimeError):
    def __init__(self, message: str, trial: int, seed: int):
        super().__init__(f"trial {trial} (seed {seed}): {message}")
        self.trial = trial
        self.seed = seed


# ------------------------------------------------------------- instance io


def instance_from_dict(doc: dict, name: str = "") -> BanditInstance:
    try:
        arms = tuple(ArmSpec(alpha=float(a["alpha"]),
                             atoms=tuple((float(v), float(p)) for v, p in a.get("atoms", ())),
                             bound=float(a["bound"]))
                     for a in doc["arms"])
        return BanditInstance(float(doc["gamma"]), arms, str(doc.get("name", name)))
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"malformed instance document: {exc!r}") from exc


def instance_to_dict(instance: BanditInstance) -> dict:
    return {"name": instance.name, "gamma": instance.gamma,
            "arms": [{"alpha": a.alpha, "bound": a.bound, "atoms": [list(x) for x in a.atoms]}
                     for a in instance.arms]}


def load_instance(path: str, check: bool = True) -> BanditInstance:
    """Read a YAML (or JSON) instance document; validate unless `check` is off."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError(f"{path}: expected a mapping at top level")
    inst = instance_from_dict(doc, name=os.path.splitext(os.path.basename(path))[0])
    if check:
        rep = validate(inst)
        if not rep.ok:
            raise InstanceFormatError("; ".join(rep.violations))
    return inst


def dump_instance(instance: BanditInstance, path: str) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(instance_to_dict(instance), fh, sort_keys=False)


# ---------------------------------------------------------------- campaign


@dataclass(frozen=True)
class CampaignConfig:
    instance: str | BanditInstance
    algorithms: tuple = ("tsa", "tse")
    delta: float = 0.01
    trials: int = 100
    seed: int = 0
    batch_size: int | None = None
    tolerances: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "table"
    workers: int = 1
    record_timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.algorithms:
            raise ValueError("algorithms must be a nonempty subset of tsa, tse, se")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.format not in ("table", "structured"):
            raise ValueError("format must be 'table' or 'structured'")

    def load(self) -> BanditInstance:
        if isinstance(self.instance, BanditInstance):
            rep = validate(self.instance)
            if not rep.ok:
                raise InstanceFormatError("; ".join(rep.violations))
            return self.instance
        return load_instance(self.instance)


def trial_seed(master: int, index: int) -> int:
    """Seed of trial `index`; shared by every algorithm (paired trials)."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1, np.uint64)[0] >> 1)


def _run_one(args):
    instance, algo, delta, seed, m, tol = args
    if algo == "se":
        return run_successive_elimination(instance, delta, seed,
                                          resolution=tol.get("se_resolution", 0.01))
    return run_track_and_stop(instance, delta, m, seed, solver="approx" if algo == "tsa" else "exact",
                              max_samples=int(tol.get("max_samples", 10**8)))


def _clean(x):
    """JSON-stable scalars: numpy -> python, non-finite -> None."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


@dataclass
class CampaignSummary:
    instance: str
    delta: float
    seed: int
    batch_size: int | None
    algorithms: dict
    ratios: dict
    trials: list
    timing: dict | None = None

    def to_dict(self) -> dict:
        d = {"instance": self.instance, "delta": self.delta, "seed": self.seed,
             "batch_size": self.batch_size, "algorithms": self.algorithms,
             "ratios": self.ratios, "trials": self.trials}
        if self.timing is not None:
            d["timing"] = self.timing
        return _clean(d)

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignSummary":
        return cls(**d)


_TIMING_FIELDS = ("wall_time", "solver_time", "sampling_time")


def _algo_stats(reports: list[TrialReport]) -> dict:
    tau = np.array([r.tau for r in reports], dtype=float)
    n = len(reports)
    errors = sum(1 for r in reports if not r.correct)
    ci = binomtest(errors, n).proportion_ci(confidence_level=0.95, method="exact")
    frac = np.mean([np.asarray(r.counts, float) / max(r.tau, 1) for r in reports], axis=0)
    return {
        "trials": n,
        "mean_tau": float(tau.mean()),
        "median_tau": float(np.median(tau)),
        "stderr_tau": float(tau.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        "errors": errors,
        "error_rate": errors / n,
        "error_ci": [float(ci.low), float(ci.high)],
        "sampling_fractions": frac.tolist(),
        "solver_calls": sum(r.solver_calls for r in reports),
        "hit_cap": sum(1 for r in reports if r.hit_cap),
    }


def _algo_timing(reports: list[TrialReport]) -> dict:
    calls = sum(r.solver_calls for r in reports)
    return {
        "mean_wall_time": float(np.mean([r.wall_time for r in reports])),
        "mean_solver_time": float(np.mean([r.solver_time for r in reports])),
        "mean_sampling_time": float(np.mean([r.sampling_time for r in reports])),
        "solver_time_per_batch": (sum(r.solver_time for r in reports) / calls) if calls else 0.0,
    }


def run_campaign(config: CampaignConfig, instance: BanditInstance | None = None) -> CampaignSummary:
    """Run every algorithm on the same trial seeds; deterministic given the master seed."""
    inst = instance if instance is not None else config.load()
    jobs = []
    for k in range(config.trials):
        s = trial_seed(config.seed, k)
        for algo in config.algorithms:
            jobs.append((k, algo, (inst, algo, config.delta, s, config.batch_size, dict(config.tolerances))))

    def guard(k, job, fn):
        try:
            return fn()
        except TrialAborted as exc:
            raise CampaignError(str(exc), k, job[3]) from exc

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futs = [(k, job, pool.submit(_run_one, job)) for k, _, job in jobs]
            results = [(k, job[1], guard(k, job, f.result)) for k, job, f in futs]
    else:
        results = [(k, job[1], guard(k, job, lambda job=job: _run_one(job))) for k, _, job in jobs]

    name = inst.name or (config.instance if isinstance(config.instance, str) else "")
    by_algo: dict = {a: [] for a in config.algorithms}
    records = []
    for k, algo, rep in sorted(results, key=lambda r: (r[1], r[2].seed, r[0])):
        by_algo[algo].append(rep)
        d = rep.as_dict()
        d.pop("notes", None)
        t = {f: d.pop(f) for f in _TIMING_FIELDS}
        d.update(instance=name, trial=k)
        if config.record_timing:
            d["timing"] = t
        records.append(d)
    stats = {a: _algo_stats(by_algo[a]) for a in config.algorithms}
    timing = {a: _algo_timing(by_algo[a]) for a in config.algorithms}
    ratios = {}
    if "tsa" in by_algo and "tse" in by_algo:
        A = {r.seed: r for r in by_algo["tsa"]}
        E = {r.seed: r for r in by_algo["tse"]}
        paired = [(A[s], E[s]) for s in sorted(A) if s in E]
        ratios["tsa_samples_over_tse"] = float(np.mean([a.tau / e.tau for a, e in paired]))
        ratios["tsa_mean_samples_over_tse"] = float(np.mean([a.tau for a, _ in paired]) /
                                                    np.mean([e.tau for _, e in paired]))
        ta = timing["tsa"]["solver_time_per_batch"]
        te = timing["tse"]["solver_time_per_batch"]
        timing["tse_time_over_tsa"] = te / ta if ta > 0 else None
        timing["tse_wall_over_tsa"] = timing["tse"]["mean_wall_time"] / timing["tsa"]["mean_wall_time"]
    if "se" in by_algo and "tsa" in by_algo:
        ratios["se_samples_over_tsa"] = stats["se"]["mean_tau"] / stats["tsa"]["mean_tau"]
    summary = CampaignSummary(instance=name, delta=config.delta, seed=config.seed,
                              batch_size=config.batch_size, algorithms=stats, ratios=ratios,
                              trials=records, timing=timing if config.record_timing else None)
    if config.out:
        emit(summary, config.format, config.out)
    return summary


# ------------------------------------------------------------- lower bound


def report_lower_bound(config: CampaignConfig, instance: BanditInstance | None = None) -> dict:
    """V*, V*_a, their gap, the sample lower bound and the regime report."""
    inst = instance if instance is not None else config.load()
    ex = solve_exact_maxmin(inst)
    ap = solve_approx_maxmin(inst)
    rep = classify(inst)
    return _clean({
        "instance": inst.name,
        "gamma": inst.gamma,
        "delta": config.delta,
        "V_exact": ex.value,
        "V_approx": ap.value,
        "relative_gap": abs(ex.value - ap.value) / ex.value,
        "lower_bound_samples": lower_bound_samples(ex, config.delta),
        "regime": rep.regime,
        "alpha_max": rep.alpha_max,
        "zeta": rep.zeta,
        "flags": list(rep.flags),
        "predicted_exponents": rep.exponents.tolist(),
        "weights_exact": ex.weights.tolist(),
        "weights_approx": ap.weights.tolist(),
    })


# -------------------------------------------------------------------- emit


def _fmt(x):
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def render_table(summary: CampaignSummary) -> str:
    """One row per (instance, algorithm): samples, runtime and error columns."""
    cols = ["instance", "algorithm", "samples", "stderr", "runtime_s", "solver_s", "error_rate", "error_ci"]
    rows = [cols]
    timing = summary.timing or {}
    for algo in sorted(summary.algorithms):
        s = summary.algorithms[algo]
        t = timing.get(algo, {})
        rows.append([summary.instance, algo, _fmt(s["mean_tau"]), _fmt(s["stderr_tau"]),
                     _fmt(t.get("mean_wall_time")), _fmt(t.get("mean_solver_time")),
                     _fmt(s["error_rate"]), f"[{s['error_ci'][0]:.4f}, {s['error_ci'][1]:.4f}]"])
    width = [max(len(r[c]) for r in rows) for c in range(len(cols))]
    lines = ["  ".join(v.ljust(w) for v, w in zip(r, width)).rstrip() for r in rows]
    extra = dict(summary.ratios)
    extra.update({k: v for k, v in timing.items() if not isinstance(v, dict)})
    for k in sorted(extra):
        lines.append(f"{k}: {_fmt(extra[k])}")
    return "\n".join(lines) + "\n"


def render_mapping(d: dict) -> str:
    d = _clean(d)
    w = max(len(k) for k in d)
    return "".join(f"{k.ljust(w)}  {_fmt(v)}\n" for k, v in d.items())


def emit(summary, fmt: str, path: str | None = None) -> str:
    """Serialize a summary (or a flat report dict) as a table or as JSON."""
    if fmt == "structured":
        payload = summary.to_dict() if isinstance(summary, CampaignSummary) else _clean(summary)
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif fmt == "table":
        text = render_table(summary) if isinstance(summary, CampaignSummary) else render_mapping(summary)
    else:
        raise ValueError("format must be 'table' or 'structured'")
    if path:
        try:
            with open(path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
    return text
