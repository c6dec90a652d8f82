"""Continuous-time Markov game model and structural validation.

A model is a finite set of locations, each either *continuous* (left via
exponentially distributed sojourns whose rates depend on the chosen action)
or *discrete* (left instantly via a probabilistic transition row), owned by
either the reachability player (maximiser) or the safety player (minimiser),
together with a goal set, a time bound and a goal mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import ModelError

CONTINUOUS = "continuous"
DISCRETE = "discrete"
REACH = "reach"
SAFE = "safe"
ABSORBING = "absorbing"
AT_DEADLINE = "at-deadline"

PROB_TOL = 1e-12
INIT_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    code: str
    location: str | None
    action: str | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...]

    def render(self) -> str:
        if self.ok:
            return "ok"
        out = []
        for v in self.violations:
            ctx = []
            if v.location is not None:
                ctx.append(f"loc={v.location}")
            if v.action is not None:
                ctx.append(f"act={v.action}")
            out.append(f"violation {v.code} {' '.join(ctx)}: {v.message}".replace("  ", " "))
        return "\n".join(out)


@dataclass(frozen=True)
class CtmgModel:
    """The game tuple plus time bound and goal mode.

    ``rates`` maps (source, action, target) -> rate (events per time unit),
    with only positive entries stored; sources must be continuous.  ``probs``
    is the full discrete transition matrix P: rows of continuous sources are
    derived from ``rates`` on construction, rows of discrete sources are given
    data.  Instances are treated as immutable; all operations are pure.
    """

    locations: tuple[str, ...]
    kind: Mapping[str, str]
    owner: Mapping[str, str]
    goal: frozenset[str]
    actions: tuple[str, ...]
    rates: Mapping[tuple[str, str, str], float]
    probs: Mapping[tuple[str, str, str], float]
    initial: Mapping[str, float]
    time_bound: float
    goal_mode: str

    def loc_index(self, loc: str) -> int:
        try:
            return self.locations.index(loc)
        except ValueError:
            raise ModelError(f"unknown location id {loc!r}") from None

    def act_index(self, act: str) -> int:
        try:
            return self.actions.index(act)
        except ValueError:
            raise ModelError(f"unknown action id {act!r}") from None

    def is_continuous(self, loc: str) -> bool:
        return self.kind[loc] == CONTINUOUS

    def players(self) -> set[str]:
        return {self.owner[l] for l in self.locations}


def _as_number(x, what):
    try:
        v = float(x)
    except (TypeError, ValueError):
        raise ModelError(f"{what} is not a number: {x!r}") from None
    return v


def build_model(
    locations: Iterable[tuple],
    rates: Mapping[tuple[str, str, str], float],
    probs: Mapping[tuple[str, str, str], float] | None = None,
    initial: Mapping[str, float] | None = None,
    time_bound: float = 0.0,
    goal_mode: str = ABSORBING,
    actions: Iterable[str] | None = None,
) -> CtmgModel:
    """Assemble a model, deriving embedded probabilities for continuous rows.

    ``locations`` is an iterable of (id, kind, owner) or (id, kind, owner,
    "goal") tuples in declaration order.  ``probs`` carries rows for discrete
    sources only.  ``actions`` fixes the global action order (the tie-break
    order); if omitted it is the order of first appearance in ``rates`` then
    ``probs``.  No validation is performed here beyond what is needed to
    assemble the object; use :func:`validate`.
    """
    probs = dict(probs or {})
    initial = dict(initial or {})
    rates = dict(rates)

    loc_ids = []
    kind = {}
    owner = {}
    goal = set()
    for entry in locations:
        if len(entry) == 4:
            lid, k, o, g = entry
            if g not in ("goal", True):
                raise ModelError(f"bad goal marker {g!r} for location {lid!r}")
            goal.add(lid)
        elif len(entry) == 3:
            lid, k, o = entry
        else:
            raise ModelError(f"bad location entry {entry!r}")
        if k not in (CONTINUOUS, DISCRETE):
            raise ModelError(f"bad kind {k!r} for location {lid!r}")
        if o not in (REACH, SAFE):
            raise ModelError(f"bad owner {o!r} for location {lid!r}")
        if lid in kind:
            raise ModelError(f"duplicate location id {lid!r}")
        loc_ids.append(lid)
        kind[lid] = k
        owner[lid] = o

    if actions is None:
        seen = []
        for (_, a, _) in list(rates) + list(probs):
            if a not in seen:
                seen.append(a)
        act_ids = tuple(seen)
    else:
        act_ids = tuple(actions)
        if len(set(act_ids)) != len(act_ids):
            raise ModelError("duplicate action ids")

    for (l, a, t), p in probs.items():
        if kind.get(l) == CONTINUOUS:
            raise ModelError(f"probability row given for continuous location {l!r}")

    # Derive P = R / exit-rate for enabled continuous rows; keep discrete rows.
    full_probs = {k: float(v) for k, v in probs.items() if v != 0.0}
    exit_sums: dict[tuple[str, str], float] = {}
    for (l, a, t), r in rates.items():
        if kind.get(l) == CONTINUOUS and float(r) > 0.0:
            exit_sums[(l, a)] = exit_sums.get((l, a), 0.0) + float(r)
    for (l, a, t), r in rates.items():
        total = exit_sums.get((l, a), 0.0)
        if kind.get(l) == CONTINUOUS and total > 0.0 and float(r) > 0.0:
            full_probs[(l, a, t)] = float(r) / total

    return CtmgModel(
        locations=tuple(loc_ids),
        kind=kind,
        owner=owner,
        goal=frozenset(goal),
        actions=act_ids,
        rates={k: float(v) for k, v in rates.items() if v != 0.0},
        probs=full_probs,
        initial={k: float(v) for k, v in initial.items() if v != 0.0},
        time_bound=_as_number(time_bound, "time bound"),
        goal_mode=goal_mode,
    )


def exit_rate(model: CtmgModel, loc: str, act: str) -> float:
    """Total rate out of a continuous location under one action."""
    if loc not in model.kind:
        raise ModelError(f"unknown location id {loc!r}")
    if act not in model.actions:
        raise ModelError(f"unknown action id {act!r}")
    if model.kind[loc] != CONTINUOUS:
        raise ModelError(f"exit rate undefined for discrete location {loc!r}")
    return sum(r for (l, a, _), r in model.rates.items() if l == loc and a == act)


def enabled_actions(model: CtmgModel, loc: str) -> tuple[str, ...]:
    """Actions usable at ``loc``, in global action order (the tie-break order).

    Continuous: actions with positive exit rate.  Discrete: actions whose
    probability row sums to one (within 1e-12).
    """
    if loc not in model.kind:
        raise ModelError(f"unknown location id {loc!r}")
    out = []
    if model.kind[loc] == CONTINUOUS:
        totals = {}
        for (l, a, _), r in model.rates.items():
            if l == loc:
                totals[a] = totals.get(a, 0.0) + r
        for a in model.actions:
            if totals.get(a, 0.0) > 0.0:
                out.append(a)
    else:
        totals = {}
        for (l, a, _), p in model.probs.items():
            if l == loc:
                totals[a] = totals.get(a, 0.0) + p
        for a in model.actions:
            if abs(totals.get(a, 0.0) - 1.0) <= PROB_TOL:
                out.append(a)
    return tuple(out)


def discrete_depth(model: CtmgModel) -> dict[str, int]:
    """Max distance from each location to the continuous ones.

    Continuous locations have depth 0; a discrete location is one deeper than
    its deepest successor over positive probability entries.  Raises
    ModelError("CYCLE...") when discrete locations form a cycle.
    """
    succ: dict[str, set[str]] = {l: set() for l in model.locations}
    for (l, a, t), p in model.probs.items():
        if l in succ and model.kind.get(l) == DISCRETE and p > 0.0:
            succ[l].add(t)

    depth: dict[str, int] = {}
    visiting: set[str] = set()

    def visit(l: str) -> int:
        if l in depth:
            return depth[l]
        if model.kind[l] == CONTINUOUS:
            depth[l] = 0
            return 0
        if l in visiting:
            raise ModelError(f"CYCLE through discrete location {l!r}")
        visiting.add(l)
        d = 1
        for t in succ[l]:
            if t in model.kind:
                d = max(d, 1 + visit(t))
        visiting.discard(l)
        depth[l] = d
        return d

    for l in model.locations:
        visit(l)
    return depth


def _check_refs(model, add):
    known_l = set(model.locations)
    known_a = set(model.actions)
    for (l, a, t) in list(model.rates) + list(model.probs):
        for loc in (l, t):
            if loc not in known_l:
                add("UNKNOWN_LOCATION", loc, a, f"undeclared location {loc!r}")
        if a not in known_a:
            add("UNKNOWN_ACTION", l, a, f"undeclared action {a!r}")
    for l in model.initial:
        if l not in known_l:
            add("UNKNOWN_LOCATION", l, None, f"undeclared location {l!r} in initial distribution")
    for l in model.goal:
        if l not in known_l:
            add("UNKNOWN_LOCATION", l, None, f"undeclared goal location {l!r}")


def validate(model: CtmgModel) -> ValidationReport:
    """Check every structural side condition; violations are data, not errors.

    Goal locations that are continuous sinks (no outgoing rates) are accepted:
    an absorbing goal needs no dynamics of its own.
    """
    violations: list[Violation] = []

    def add(code, loc, act, msg):
        violations.append(Violation(code, loc, act, msg))

    _check_refs(model, add)
    if violations:
        return _finish(model, violations)

    if not (model.time_bound >= 0.0) or model.time_bound != model.time_bound:
        add("TIME_BOUND", None, None, f"time bound must be a finite nonnegative number, got {model.time_bound}")
    if model.goal_mode not in (ABSORBING, AT_DEADLINE):
        add("GOAL_MODE", None, None, f"unknown goal mode {model.goal_mode!r}")

    # Rates: nonnegative, continuous sources only.
    for (l, a, t), r in sorted(model.rates.items(), key=lambda kv: _key(model, kv[0])):
        if model.kind[l] == DISCRETE:
            add("RATE_ON_DISCRETE", l, a, f"rate declared on discrete location {l!r}")
        if not (r >= 0.0) or r != r or r == float("inf"):
            add("NEGATIVE_RATE", l, a, f"rate R({l},{a},{t}) = {r} is not a finite nonnegative number")

    exit_sums: dict[tuple[str, str], float] = {}
    for (l, a, t), r in model.rates.items():
        if model.kind[l] == CONTINUOUS and r > 0.0:
            exit_sums[(l, a)] = exit_sums.get((l, a), 0.0) + r

    # Discrete probability rows: entries in [0,1], sums ~0 or ~1.
    row_sums: dict[tuple[str, str], float] = {}
    for (l, a, t), p in model.probs.items():
        if model.kind[l] == DISCRETE:
            row_sums[(l, a)] = row_sums.get((l, a), 0.0) + p
            if not (0.0 <= p <= 1.0):
                add("PROB_RANGE", l, a, f"P({l},{a},{t}) = {p} outside [0,1]")
    for (l, a), s in sorted(row_sums.items(), key=lambda kv: _key(model, (kv[0][0], kv[0][1], ""))):
        if abs(s) > PROB_TOL and abs(s - 1.0) > PROB_TOL:
            add("BAD_PROB_ROW", l, a, f"probability row sums to {s!r}, expected 0 or 1")

    # Embedded probabilities of continuous rows must equal R / exit rate.
    derived: dict[tuple[str, str, str], float] = {}
    for (l, a, t), r in model.rates.items():
        if model.kind[l] == CONTINUOUS and exit_sums.get((l, a), 0.0) > 0.0 and r > 0.0:
            derived[(l, a, t)] = r / exit_sums[(l, a)]
    for key in sorted(set(derived) | {k for k in model.probs if model.kind[k[0]] == CONTINUOUS}, key=lambda k: _key(model, k)):
        want = derived.get(key, 0.0)
        got = model.probs.get(key, 0.0)
        if abs(want - got) > PROB_TOL:
            l, a, t = key
            add("BAD_EMBEDDED_PROB", l, a, f"P({l},{a},{t}) = {got!r}, expected R-derived {want!r}")

    # Enabledness.  Continuous goal sinks are exempt (see docstring).
    for l in model.locations:
        acts = enabled_actions(model, l)
        if acts:
            continue
        if model.kind[l] == CONTINUOUS and l in model.goal:
            continue
        what = "positive exit rate" if model.kind[l] == CONTINUOUS else "full probability row"
        add("NO_ENABLED_ACTION", l, None, f"no action with {what} at {l!r}")

    # No cycles through discrete locations only.
    try:
        discrete_depth(model)
    except ModelError as exc:
        add("NO_DISCRETE_CYCLE", None, None, str(exc))

    # Absorbing goal region.
    if model.goal_mode == ABSORBING:
        for (l, a, t), r in sorted(model.rates.items(), key=lambda kv: _key(model, kv[0])):
            if l in model.goal and t not in model.goal and r > 0.0:
                add("GOAL_NOT_ABSORBING", l, a, f"rate {l} -> {t} leaves the goal region")
        for (l, a, t), p in sorted(model.probs.items(), key=lambda kv: _key(model, kv[0])):
            if model.kind[l] == DISCRETE and l in model.goal and t not in model.goal and p > 0.0:
                add("GOAL_NOT_ABSORBING", l, a, f"transition {l} -> {t} leaves the goal region")

    # Initial distribution.
    total = 0.0
    for l in model.locations:
        w = model.initial.get(l, 0.0)
        if w < 0.0:
            add("BAD_INIT", l, None, f"negative initial mass {w!r}")
        total += w
    if abs(total - 1.0) > INIT_TOL:
        add("INIT_SUM", None, None, f"initial distribution sums to {total!r}, expected 1")

    return _finish(model, violations)


def _key(model, key):
    l, a, t = key
    li = model.locations.index(l) if l in model.kind else -1
    ai = model.actions.index(a) if a in model.actions else -1
    ti = model.locations.index(t) if t in model.kind else -1
    return (li, ai, ti)


def _finish(model, violations):
    def order(v: Violation):
        li = model.locations.index(v.location) if v.location in model.kind else -1
        ai = model.actions.index(v.action) if v.action in model.actions else -1
        return (li, ai, v.code)

    vs = tuple(sorted(violations, key=order))
    return ValidationReport(ok=not vs, violations=vs)
