"""Plain-text model format, scheduler artifacts and CSV value curves.

Model grammar (one declaration per line, whitespace-separated tokens, ``#``
starts a comment):

    ctmg
    time-bound <number>
    goal-mode absorbing|at-deadline        # optional, default absorbing
    location <id> continuous|discrete reach|safe [goal]
    rate <loc> <action> <loc> <number>     # continuous source only
    prob <loc> <action> <loc> <number>     # discrete source only
    init <loc> <number>

Numbers accept ``3``, ``2.5`` and ``1/3``; everything is stored as double
precision.  Serialization uses 17 significant digits so doubles round-trip
exactly.  The order in which actions first appear defines the global
tie-break order, so rate/prob lines are emitted action-major.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import ArtifactError, ModelSemanticError, ModelSyntaxError
from .model import (
    ABSORBING,
    AT_DEADLINE,
    CONTINUOUS,
    DISCRETE,
    CtmgModel,
    Violation,
    ValidationReport,
    build_model,
    enabled_actions,
    validate,
)
from .solver import CylindricalScheduler, PositionalProfile, ValueFunction


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _tokenize(text: str):
    """Yield (line_no, [(col, token), ...]) skipping blanks and comments."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = []
        col = 0
        i = 0
        while i < len(line):
            if line[i].isspace():
                i += 1
                continue
            j = i
            while j < len(line) and not line[j].isspace():
                j += 1
            toks.append((i + 1, line[i:j]))
            i = j
        if toks:
            yield ln, toks


def _number(tok: str, ln: int, col: int) -> float:
    if "/" in tok:
        try:
            return float(Fraction(tok))
        except (ValueError, ZeroDivisionError):
            raise ModelSyntaxError(ln, col, f"a number, got {tok!r}") from None
    try:
        return float(tok)
    except ValueError:
        raise ModelSyntaxError(ln, col, f"a number, got {tok!r}") from None


def parse_model(text: str) -> CtmgModel:
    """Parse and validate a model document.

    Raises ModelSyntaxError for ill-formed documents and ModelSemanticError
    (wrapping the validation report) for well-formed but invalid models.
    """
    lines = list(_tokenize(text))
    if not lines:
        raise ModelSyntaxError(1, 1, "'ctmg' header")
    ln, toks = lines[0]
    if toks[0][1] != "ctmg" or len(toks) != 1:
        raise ModelSyntaxError(ln, toks[0][0], "'ctmg' header")

    time_bound = None
    goal_mode = ABSORBING
    goal_mode_seen = False
    locations = []
    loc_kind = {}
    actions: list[str] = []
    rates = {}
    probs = {}
    init = {}
    semantic: list[Violation] = []

    def want(toks, n, ln, what):
        if len(toks) != n:
            col = toks[-1][0] if len(toks) > n else (toks[-1][0] + len(toks[-1][1]) + 1)
            raise ModelSyntaxError(ln, col, what)

    for ln, toks in lines[1:]:
        col0, head = toks[0]
        if head == "time-bound":
            want(toks, 2, ln, "time-bound <number>")
            if time_bound is not None:
                raise ModelSyntaxError(ln, col0, "a single time-bound declaration")
            time_bound = _number(toks[1][1], ln, toks[1][0])
        elif head == "goal-mode":
            want(toks, 2, ln, "goal-mode absorbing|at-deadline")
            if goal_mode_seen:
                raise ModelSyntaxError(ln, col0, "a single goal-mode declaration")
            goal_mode_seen = True
            if toks[1][1] not in (ABSORBING, AT_DEADLINE):
                raise ModelSyntaxError(ln, toks[1][0], "absorbing or at-deadline")
            goal_mode = toks[1][1]
        elif head == "location":
            if len(toks) not in (4, 5):
                raise ModelSyntaxError(ln, col0, "location <id> continuous|discrete reach|safe [goal]")
            lid = toks[1][1]
            kind = toks[2][1]
            owner = toks[3][1]
            if kind not in (CONTINUOUS, DISCRETE):
                raise ModelSyntaxError(ln, toks[2][0], "continuous or discrete")
            if owner not in ("reach", "safe"):
                raise ModelSyntaxError(ln, toks[3][0], "reach or safe")
            if lid in loc_kind:
                raise ModelSyntaxError(ln, toks[1][0], f"a fresh location id, {lid!r} is already declared")
            entry = (lid, kind, owner)
            if len(toks) == 5:
                if toks[4][1] != "goal":
                    raise ModelSyntaxError(ln, toks[4][0], "'goal'")
                entry = (lid, kind, owner, "goal")
            locations.append(entry)
            loc_kind[lid] = kind
        elif head in ("rate", "prob"):
            want(toks, 5, ln, f"{head} <loc> <action> <loc> <number>")
            src, act, tgt = toks[1][1], toks[2][1], toks[3][1]
            val = _number(toks[4][1], ln, toks[4][0])
            if act not in actions:
                actions.append(act)
            store = rates if head == "rate" else probs
            if (src, act, tgt) in store:
                raise ModelSyntaxError(ln, col0, f"a single {head} declaration for ({src},{act},{tgt})")
            if head == "prob" and loc_kind.get(src) == CONTINUOUS:
                semantic.append(Violation(
                    "PROB_ON_CONTINUOUS", src, act,
                    f"prob declared on continuous location {src!r}; continuous rows are derived from rates",
                ))
            store[(src, act, tgt)] = val
        elif head == "init":
            want(toks, 3, ln, "init <loc> <number>")
            lid = toks[1][1]
            if lid in init:
                raise ModelSyntaxError(ln, toks[1][0], f"a single init declaration for {lid!r}")
            init[lid] = _number(toks[2][1], ln, toks[2][0])
        else:
            raise ModelSyntaxError(ln, col0, f"a declaration keyword, got {head!r}")

    if time_bound is None:
        raise ModelSyntaxError(lines[-1][0], 1, "a time-bound declaration")

    model = build_model(
        locations=locations,
        rates=rates,
        probs={k: v for k, v in probs.items() if loc_kind.get(k[0]) != CONTINUOUS},
        initial=init,
        time_bound=time_bound,
        goal_mode=goal_mode,
        actions=actions,
    )
    report = validate(model)
    if semantic or not report.ok:
        merged = tuple(semantic) + report.violations
        raise ModelSemanticError(ValidationReport(ok=False, violations=merged))
    return model


def serialize_model(model: CtmgModel) -> str:
    """Canonical text form; parse(serialize(m)) is structurally equal to m.

    Actions appear in the grammar only through rate/prob declarations, so an
    action used by no location cannot be expressed and is dropped.
    """
    out = ["ctmg", f"time-bound {_fmt(model.time_bound)}", f"goal-mode {model.goal_mode}"]
    for l in model.locations:
        g = " goal" if l in model.goal else ""
        out.append(f"location {l} {model.kind[l]} {model.owner[l]}{g}")
    loc_pos = {l: i for i, l in enumerate(model.locations)}
    # action-major so re-parsing reproduces the action (tie-break) order
    for a in model.actions:
        entries = [(loc_pos[l], loc_pos[t], l, t, r)
                   for (l, aa, t), r in model.rates.items() if aa == a and r != 0.0]
        for (_, _, l, t, r) in sorted(entries):
            out.append(f"rate {l} {a} {t} {_fmt(r)}")
        entries = [(loc_pos[l], loc_pos[t], l, t, p)
                   for (l, aa, t), p in model.probs.items()
                   if aa == a and p != 0.0 and model.kind[l] == DISCRETE]
        for (_, _, l, t, p) in sorted(entries):
            out.append(f"prob {l} {a} {t} {_fmt(p)}")
    for l in model.locations:
        w = model.initial.get(l, 0.0)
        if w != 0.0:
            out.append(f"init {l} {_fmt(w)}")
    return "\n".join(out) + "\n"


def write_scheduler_artifact(scheduler: CylindricalScheduler) -> str:
    """Lossless text form: `interval <lo> <hi>` then `choose <loc> <action>`."""
    out = []
    bps = scheduler.breakpoints
    if len(bps) == 1:
        spans = [(0.0, 0.0, scheduler.decisions[0])]
    else:
        spans = [(bps[i], bps[i + 1], scheduler.decisions[i]) for i in range(len(scheduler.decisions))]
    for lo, hi, prof in spans:
        out.append(f"interval {_fmt(lo)} {_fmt(hi)}")
        for l, a in prof.items():
            out.append(f"choose {l} {a}")
    return "\n".join(out) + "\n"


def read_scheduler_artifact(text: str, player: str = "both") -> CylindricalScheduler:
    spans = []
    current = None
    for ln, toks in _tokenize(text):
        head = toks[0][1]
        if head == "interval":
            if len(toks) != 3:
                raise ArtifactError(f"line {ln}: expected interval <lo> <hi>")
            lo = _read_float(toks[1][1], ln)
            hi = _read_float(toks[2][1], ln)
            current = {}
            spans.append((lo, hi, current))
        elif head == "choose":
            if len(toks) != 3:
                raise ArtifactError(f"line {ln}: expected choose <loc> <action>")
            if current is None:
                raise ArtifactError(f"line {ln}: choose before any interval")
            l, a = toks[1][1], toks[2][1]
            if l in current:
                raise ArtifactError(f"line {ln}: duplicate choice for {l!r}")
            current[l] = a
        else:
            raise ArtifactError(f"line {ln}: unknown directive {head!r}")
    if not spans:
        raise ArtifactError("empty scheduler artifact")
    if len(spans) == 1 and spans[0][0] == 0.0 and spans[0][1] == 0.0:
        return CylindricalScheduler((0.0,), (PositionalProfile(dict(spans[0][2])),), player)
    bps = [spans[0][0]]
    decisions = []
    for lo, hi, prof in spans:
        if lo != bps[-1]:
            raise ArtifactError(f"intervals not contiguous at {lo!r}")
        if not (hi > lo):
            raise ArtifactError(f"interval bounds not ascending: {lo!r} .. {hi!r}")
        bps.append(hi)
        decisions.append(PositionalProfile(dict(prof)))
    if bps[0] != 0.0:
        raise ArtifactError("first interval must start at 0")
    return CylindricalScheduler(tuple(bps), tuple(decisions), player)


def _read_float(tok, ln):
    try:
        return float(tok)
    except ValueError:
        raise ArtifactError(f"line {ln}: expected a number, got {tok!r}") from None


def write_value_curve(model: CtmgModel, vf: ValueFunction, include_gains: bool = False) -> str:
    """CSV of the value function: header `t,<loc1>,...`, times strictly
    ascending, with one exact row injected per switch point.  With
    ``include_gains`` extra `gain:<loc>:<action>` columns are emitted for
    every enabled action of every continuous location.
    """
    cols = [f"gain:{l}:{a}" for l in model.locations if model.kind[l] == CONTINUOUS
            for a in enabled_actions(model, l)] if include_gains else []
    header = "t," + ",".join(vf.locations) + ("," + ",".join(cols) if cols else "")

    rows = [(float(t), vf.values[:, j]) for j, t in enumerate(vf.grid)]
    for k, s in enumerate(vf.switch_points):
        rows.append((float(s), vf.switch_values[:, k]))
    rows.sort(key=lambda r: r[0])
    dedup = []
    for t, col in rows:
        if dedup and t == dedup[-1][0]:
            continue
        dedup.append((t, col))

    loc_pos = {l: i for i, l in enumerate(vf.locations)}
    gain_items = []
    if include_gains:
        for l in model.locations:
            if model.kind[l] == CONTINUOUS:
                for a in enabled_actions(model, l):
                    entries = [(loc_pos[t], r) for (s, aa, t), r in model.rates.items()
                               if s == l and aa == a]
                    gain_items.append((loc_pos[l], entries))

    lines = [header]
    for t, col in dedup:
        cells = [_fmt(t)] + [_fmt(v) for v in col]
        for li, entries in gain_items:
            g = sum(r * (col[ti] - col[li]) for ti, r in entries)
            cells.append(_fmt(g))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
