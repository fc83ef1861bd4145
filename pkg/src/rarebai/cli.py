"""Command line entry point: run, bound, classify, validate."""

from __future__ import annotations

import argparse
import sys

from .algorithms import TrialAborted
from .asymptotics import classify, limiting_constants
from .exact import ConvergenceError
from .harness import (CampaignConfig, CampaignError, InstanceFormatError, emit, load_instance,
                      report_lower_bound, run_campaign)
from .instance import validate

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rarebai", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("--instance", required=True, help="instance file (YAML or JSON)")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--format", choices=("table", "structured"), default="table")

    r = sub.add_parser("run", help="run a seeded trial campaign")
    common(r)
    r.add_argument("--algos", default="tsa,tse", help="comma-separated subset of tsa,tse,se")
    r.add_argument("--delta", type=float, default=0.01)
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--batch-size", type=int, default=None)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--no-timing", action="store_true",
                   help="omit wall-clock measurements (output then depends on the seed only)")

    b = sub.add_parser("bound", help="lower-bound report")
    common(b)
    b.add_argument("--delta", type=float, default=0.01)

    c = sub.add_parser("classify", help="small-gamma regime report")
    common(c)

    v = sub.add_parser("validate", help="check an instance file")
    common(v)
    return p


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.verb == "validate":
            inst = load_instance(args.instance, check=False)
            rep = validate(inst)
            if args.format == "structured":
                text = emit({"instance": inst.name, "valid": rep.ok,
                             "violations": list(rep.violations)}, "structured")
            else:
                text = "ok\n" if rep.ok else "".join(f"violation: {v}\n" for v in rep.violations)
            _write(text, args.out)
            return EXIT_OK if rep.ok else EXIT_INVALID

        inst = load_instance(args.instance)
        if args.verb == "classify":
            rep = classify(inst)
            doc = {"instance": inst.name, "regime": rep.regime, "alpha_max": rep.alpha_max,
                   "zeta": rep.zeta, "exponents": rep.exponents.tolist(), "flags": list(rep.flags),
                   "constants": limiting_constants(inst, rep)}
            text = emit(doc, args.format)
        elif args.verb == "bound":
            cfg = CampaignConfig(instance=args.instance, delta=args.delta, trials=1)
            text = emit(report_lower_bound(cfg, inst), args.format)
        else:
            cfg = CampaignConfig(instance=args.instance,
                                 algorithms=tuple(a.strip() for a in args.algos.split(",") if a.strip()),
                                 delta=args.delta, trials=args.trials, seed=args.seed,
                                 batch_size=args.batch_size, format=args.format,
                                 workers=args.workers, record_timing=not args.no_timing)
            text = emit(run_campaign(cfg, inst), args.format)
        _write(text, args.out)
        return EXIT_OK
    except (InstanceFormatError, FileNotFoundError) as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # configuration errors (empty algorithm list, delta out of range, ...)
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ConvergenceError, TrialAborted, CampaignError) as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
