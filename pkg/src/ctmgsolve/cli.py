"""Command-line frontend.

Subcommands: validate, solve, evaluate, transform, simulate, distance,
oracle, curve.  Exit codes: 0 success, 1 domain error, 2 usage error.
Numbers are printed with 6 decimals by default (--precision overrides);
files are written atomically.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile

from . import format as fmt
from . import transform, verify
from .errors import DomainError
from .model import validate as validate_model
from .solver import SolveOptions, evaluate_scheduler, solve


def _write_atomic(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def _load_model(path: str):
    return fmt.parse_model(_read(path))


def _opts(args) -> SolveOptions:
    return SolveOptions(steps=args.steps, switch_tol=args.switch_tol, tie_tol=args.tie_tol)


def _num(args, x: float) -> str:
    return f"%.{args.precision}f" % x


def _add_solver_flags(p):
    p.add_argument("--steps", type=int, default=10000, help="grid resolution N")
    p.add_argument("--switch-tol", type=float, default=1e-9, dest="switch_tol")
    p.add_argument("--tie-tol", type=float, default=1e-12, dest="tie_tol")
    p.add_argument("--precision", type=int, default=6, help="printed decimals")


def _cmd_validate(args):
    try:
        model = _load_model(args.model)
    except DomainError as exc:
        if hasattr(exc, "report"):
            print(exc.report.render(), file=sys.stderr)
        else:
            print(str(exc), file=sys.stderr)
        return 1
    report = validate_model(model)
    print(report.render())
    return 0 if report.ok else 1


def _cmd_solve(args):
    model = _load_model(args.model)
    res = solve(model, args.objective, _opts(args))
    print(f"value {_num(args, res.value.initial_value(model.initial))}")
    for s in res.value.switch_points:
        print(f"switch {_num(args, s)}")
    if args.out:
        _write_atomic(args.out, fmt.write_scheduler_artifact(res.scheduler))
    if args.curve_out:
        _write_atomic(args.curve_out, fmt.write_value_curve(model, res.value))
    return 0


def _cmd_evaluate(args):
    model = _load_model(args.model)
    sched = fmt.read_scheduler_artifact(_read(args.scheduler))
    vf = evaluate_scheduler(model, sched, _opts(args))
    print(f"value {_num(args, vf.initial_value(model.initial))}")
    if args.curve_out:
        _write_atomic(args.curve_out, fmt.write_value_curve(model, vf))
    return 0


def _cmd_transform(args):
    model = _load_model(args.model)
    if args.op == "uniformise":
        out, mapping = transform.uniformise(model, args.rate), None
    elif args.op == "early-to-late":
        out, mapping = transform.early_to_late(model)
    elif args.op == "late-to-early":
        out, mapping = transform.late_to_early(model)
    else:
        out, mapping = transform.make_simple(model, cap=args.cap)
    text = fmt.serialize_model(out)
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if args.map_out and mapping is not None:
        _write_atomic(args.map_out, "".join(f"map {k} {v}\n" for k, v in mapping.items()))
    return 0


def _cmd_simulate(args):
    model = _load_model(args.model)
    sched = fmt.read_scheduler_artifact(_read(args.scheduler))
    res = verify.simulate(model, sched, args.runs, args.seed)
    print(
        f"estimate {_num(args, res.estimate)} runs {res.runs} "
        f"stderr {_num(args, res.standard_error)} seed {res.seed}"
    )
    return 0


def _cmd_distance(args):
    model = _load_model(args.model)
    d = fmt.read_scheduler_artifact(_read(args.scheduler_d))
    e = fmt.read_scheduler_artifact(_read(args.scheduler_e))
    dist = verify.scheduler_distance(model, d, e, _opts(args))
    print(f"distance {_num(args, dist)}")
    return 0


def _cmd_oracle(args):
    model = _load_model(args.model)
    if args.method == "grid":
        vf = verify.grid_oracle(model, args.objective, args.steps)
        print(f"value {_num(args, vf.initial_value(model.initial))}")
    elif args.method == "uniformization":
        sched = fmt.read_scheduler_artifact(_read(args.scheduler))
        if len(sched.decisions) != 1:
            raise DomainError("uniformization oracle needs a positional (single-interval) scheduler")
        from .solver import PositionalProfile

        profile = PositionalProfile(dict(sched.decisions[0].choice))
        bounds = verify.truncated_uniformization_value(model, profile, args.epsilon)
        lo = sum(model.initial.get(l, 0.0) * bounds.lower[l] for l in model.locations)
        hi = sum(model.initial.get(l, 0.0) * bounds.upper[l] for l in model.locations)
        print(f"lower {_num(args, lo)} upper {_num(args, hi)} steps {bounds.n_steps}")
    else:
        profile, value = verify.enumerate_positional(model, args.objective, _opts(args), cap=args.cap)
        items = " ".join(f"{l}={a}" for l, a in profile.items())
        print(f"value {_num(args, value)} profile {items}")
        if args.out:
            from .solver import CylindricalScheduler

            if model.time_bound == 0.0:
                sched = CylindricalScheduler((0.0,), (profile,))
            else:
                sched = CylindricalScheduler((0.0, model.time_bound), (profile,))
            _write_atomic(args.out, fmt.write_scheduler_artifact(sched))
    return 0


def _cmd_curve(args):
    model = _load_model(args.model)
    res = solve(model, args.objective, _opts(args))
    text = fmt.write_value_curve(model, res.value, include_gains=True)
    if args.out:
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctmg", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model document")
    p.add_argument("model")
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("solve", help="optimal value and scheduler")
    p.add_argument("model")
    p.add_argument("--objective", choices=["max", "min", "game"], default="max")
    _add_solver_flags(p)
    p.add_argument("--out", help="scheduler artifact path")
    p.add_argument("--curve-out", dest="curve_out", help="value curve CSV path")
    p.set_defaults(fn=_cmd_solve)

    p = sub.add_parser("evaluate", help="value of a fixed scheduler")
    p.add_argument("model")
    p.add_argument("--scheduler", required=True)
    _add_solver_flags(p)
    p.add_argument("--curve-out", dest="curve_out", help="value curve CSV path")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("transform", help="model-to-model constructions")
    p.add_argument("model")
    p.add_argument("--op", required=True,
                   choices=["early-to-late", "late-to-early", "make-simple", "uniformise"])
    p.add_argument("--rate", type=float, default=None, help="uniformisation target rate")
    p.add_argument("--cap", type=int, default=10000, help="compound action cap")
    p.add_argument("--out", help="output model path (default stdout)")
    p.add_argument("--map-out", dest="map_out", help="location map path")
    p.set_defaults(fn=_cmd_transform)

    p = sub.add_parser("simulate", help="Monte Carlo estimate for a scheduler")
    p.add_argument("model")
    p.add_argument("--scheduler", required=True)
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--precision", type=int, default=6)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("distance", help="difference-scheduler metric")
    p.add_argument("model")
    p.add_argument("scheduler_d")
    p.add_argument("scheduler_e")
    _add_solver_flags(p)
    p.set_defaults(fn=_cmd_distance)

    p = sub.add_parser("oracle", help="independent verification oracles")
    p.add_argument("model")
    p.add_argument("--method", choices=["grid", "uniformization", "enumerate"], required=True)
    p.add_argument("--objective", choices=["max", "min"], default="max")
    p.add_argument("--epsilon", type=float, default=1e-8)
    p.add_argument("--scheduler", help="positional scheduler artifact (uniformization)")
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--out", help="write the best profile as a scheduler artifact (enumerate)")
    _add_solver_flags(p)
    p.set_defaults(fn=_cmd_oracle)

    p = sub.add_parser("curve", help="value curve CSV with per-action gain columns")
    p.add_argument("model")
    p.add_argument("--objective", choices=["max", "min", "game"], default="max")
    _add_solver_flags(p)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(fn=_cmd_curve)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except DomainError as exc:
        if hasattr(exc, "report"):
            print(exc.report.render(), file=sys.stderr)
        else:
            print(str(exc), file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
