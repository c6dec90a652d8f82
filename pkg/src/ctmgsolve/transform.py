"""Model-to-model constructions: decision-gate splittings, pooling of
discrete cascades into compound actions, and uniformisation.

All transformations are pure, validate-preserving, and derive fresh ids
deterministically from the original ones so serialized outputs are stable.
"""

from __future__ import annotations

import itertools
from typing import Mapping

from .errors import (
    CapExceededError,
    InvalidModelError,
    MultiPlayerError,
    NotUniformError,
    RateTooLowError,
)
from .model import (
    CONTINUOUS,
    DISCRETE,
    CtmgModel,
    build_model,
    enabled_actions,
    exit_rate,
    validate,
)

UNIFORM_TOL = 1e-9


def _require_valid(model: CtmgModel):
    report = validate(model)
    if not report.ok:
        raise InvalidModelError(report)


def _fresh(base: str, used: set[str]) -> str:
    name = base
    while name in used:
        name += "'"
    used.add(name)
    return name


def _max_exit(model: CtmgModel):
    rates = []
    for l in model.locations:
        if model.kind[l] == CONTINUOUS:
            for a in enabled_actions(model, l):
                rates.append(exit_rate(model, l, a))
    return max(rates) if rates else 0.0


def uniformise(model: CtmgModel, target_rate: float | None = None) -> CtmgModel:
    """Raise self-loop rates so every enabled exit rate equals the target.

    Adding to R(l,a,l) leaves time-bounded reachability unchanged; the default
    target is the maximal exit rate, and a target below it is rejected.
    Already-uniform models are returned unchanged (as an equal model).
    """
    _require_valid(model)
    lam = _max_exit(model)
    if target_rate is None:
        target_rate = lam
    if target_rate < lam - UNIFORM_TOL:
        raise RateTooLowError(
            f"RATE_TOO_LOW: target {target_rate} is below the maximal exit rate {lam}"
        )
    rates = dict(model.rates)
    for l in model.locations:
        if model.kind[l] != CONTINUOUS:
            continue
        for a in enabled_actions(model, l):
            gap = target_rate - exit_rate(model, l, a)
            if gap > 0.0:
                rates[(l, a, l)] = rates.get((l, a, l), 0.0) + gap
    probs = {k: v for k, v in model.probs.items() if model.kind[k[0]] == DISCRETE}
    return build_model(
        locations=[(l, model.kind[l], model.owner[l], "goal") if l in model.goal
                   else (l, model.kind[l], model.owner[l]) for l in model.locations],
        rates=rates,
        probs=probs,
        initial=model.initial,
        time_bound=model.time_bound,
        goal_mode=model.goal_mode,
        actions=model.actions,
    )


def is_uniform(model: CtmgModel) -> bool:
    rates = []
    for l in model.locations:
        if model.kind[l] == CONTINUOUS:
            for a in enabled_actions(model, l):
                rates.append(exit_rate(model, l, a))
    if not rates:
        return True
    lam = max(rates)
    return all(abs(r - lam) <= UNIFORM_TOL * max(1.0, lam) for r in rates)


def early_to_late(model: CtmgModel) -> tuple[CtmgModel, dict[str, str]]:
    """Split each continuous location into a discrete decision gate plus one
    committed continuous copy per enabled action.

    The gate's action a surely enters the copy for a; the copy has only a,
    with the original rate row re-routed to successor gates.  Incoming
    transitions and initial mass move to the gate; goal membership is shared
    by gate and copies.  Solving the result under the usual (revisable)
    semantics yields the optimum over schedulers that commit an action on
    entering a location.  Continuous locations without enabled actions
    (absorbing goal sinks) are kept as they are.

    Returns (model, map original -> gate or itself).
    """
    _require_valid(model)
    used = set(model.locations)
    gate: dict[str, str] = {}
    copies: dict[str, dict[str, str]] = {}
    for l in model.locations:
        if model.kind[l] == CONTINUOUS and enabled_actions(model, l):
            gate[l] = _fresh(f"{l}^d", used)
            copies[l] = {a: _fresh(f"{l}^{a}", used) for a in enabled_actions(model, l)}

    def routed(t: str) -> str:
        return gate.get(t, t)

    locations = []
    rates = {}
    probs = {}
    for l in model.locations:
        own = model.owner[l]
        mark = (l in model.goal)
        if l in gate:
            locations.append((gate[l], DISCRETE, own, "goal") if mark else (gate[l], DISCRETE, own))
            for a, cp in copies[l].items():
                locations.append((cp, CONTINUOUS, own, "goal") if mark else (cp, CONTINUOUS, own))
                probs[(gate[l], a, cp)] = 1.0
        else:
            locations.append((l, model.kind[l], own, "goal") if mark else (l, model.kind[l], own))

    for (l, a, t), r in model.rates.items():
        if l in copies and a in copies[l]:
            rates[(copies[l][a], a, routed(t))] = rates.get((copies[l][a], a, routed(t)), 0.0) + r
        elif l not in copies:
            rates[(l, a, routed(t))] = rates.get((l, a, routed(t)), 0.0) + r
    for (l, a, t), p in model.probs.items():
        if model.kind[l] == DISCRETE:
            key = (l, a, routed(t))
            probs[key] = probs.get(key, 0.0) + p

    initial = {}
    for l, w in model.initial.items():
        initial[routed(l)] = initial.get(routed(l), 0.0) + w

    mapped = {l: gate.get(l, l) for l in model.locations}
    out = build_model(
        locations=locations,
        rates=rates,
        probs=probs,
        initial=initial,
        time_bound=model.time_bound,
        goal_mode=model.goal_mode,
        actions=model.actions,
    )
    return out, mapped


def late_to_early(model: CtmgModel) -> tuple[CtmgModel, dict[str, str]]:
    """Move the action decision into a fresh discrete location entered *after*
    each continuous sojourn.

    Requires a uniform model (equal enabled exit rates everywhere): with a
    common rate the sojourn is action-independent, so deciding at the jump
    instant is equivalent to revising continuously, and values at the original
    locations are preserved.  Returns (model, identity map on originals).
    """
    _require_valid(model)
    if not is_uniform(model):
        raise NotUniformError("NOT_UNIFORM: exit rates differ; uniformise the model first")
    lam = _max_exit(model)
    used = set(model.locations)
    dec: dict[str, str] = {}
    for l in model.locations:
        if model.kind[l] == CONTINUOUS and enabled_actions(model, l):
            dec[l] = _fresh(f"{l}^post", used)

    locations = []
    rates = {}
    probs = {}
    for l in model.locations:
        own = model.owner[l]
        mark = (l in model.goal)
        locations.append((l, model.kind[l], own, "goal") if mark else (l, model.kind[l], own))
        if l in dec:
            locations.append((dec[l], DISCRETE, own, "goal") if mark else (dec[l], DISCRETE, own))

    for l in model.locations:
        if l in dec:
            first = enabled_actions(model, l)[0]
            rates[(l, first, dec[l])] = lam
            for a in enabled_actions(model, l):
                for (src, aa, t), r in model.rates.items():
                    if src == l and aa == a:
                        key = (dec[l], a, t)
                        probs[key] = probs.get(key, 0.0) + r / lam
    for (l, a, t), p in model.probs.items():
        if model.kind[l] == DISCRETE:
            probs[(l, a, t)] = probs.get((l, a, t), 0.0) + p

    out = build_model(
        locations=locations,
        rates=rates,
        probs=probs,
        initial=model.initial,
        time_bound=model.time_bound,
        goal_mode=model.goal_mode,
        actions=model.actions,
    )
    return out, {l: l for l in model.locations}


def _discrete_reachable(model: CtmgModel, targets) -> list[str]:
    """Discrete locations reachable from the given targets before any
    continuous location, in location order."""
    seen = []
    frontier = [t for t in targets if model.kind[t] == DISCRETE]
    while frontier:
        d = frontier.pop()
        if d in seen:
            continue
        seen.append(d)
        for a in enabled_actions(model, d):
            for (l, aa, t), p in model.probs.items():
                if l == d and aa == a and p > 0.0 and model.kind[t] == DISCRETE:
                    frontier.append(t)
    order = {l: i for i, l in enumerate(model.locations)}
    return sorted(seen, key=lambda l: order[l])


def make_simple(model: CtmgModel, cap: int = 10000) -> tuple[CtmgModel, dict[str, str]]:
    """Pool every cascade through discrete locations into one compound action.

    For each continuous location and original first action, a compound action
    fixes one choice at every discrete location reachable during the cascade;
    its targets are fresh continuous locations naming the realized cascade,
    which behave exactly like the continuous location the cascade ends in.
    The result has no transition from a continuous into a discrete location.

    Only single-player models are supported, and the total number of compound
    actions is capped (default 10000): this construction is a cross-check, not
    a scaling path.  Returns (model, map of every new-model location to the
    original location whose value it carries).
    """
    _require_valid(model)
    if len(model.players()) > 1:
        raise MultiPlayerError("MULTI_PLAYER: pooling is defined for single-player models")

    cont = [l for l in model.locations if model.kind[l] == CONTINUOUS]
    plans: dict[tuple[str, str], list[dict[str, str]]] = {}
    total = 0
    for l in cont:
        for a0 in enabled_actions(model, l):
            targets = [t for (s, aa, t), r in model.rates.items() if s == l and aa == a0 and r > 0.0]
            ds = _discrete_reachable(model, targets)
            options = [[(d, b) for b in enabled_actions(model, d)] for d in ds]
            count = 1
            for o in options:
                count *= len(o)
            total += count
            if total > cap:
                raise CapExceededError(
                    f"CAP_EXCEEDED: pooling needs more than {cap} compound actions"
                )
            plans[(l, a0)] = [dict(combo) for combo in itertools.product(*options)]

    def plan_id(a0: str, plan: dict[str, str]) -> str:
        if not plan:
            return a0
        parts = sorted(plan.items(), key=lambda kv: model.locations.index(kv[0]))
        return a0 + "".join(f"+{d}:{b}" for d, b in parts)

    # realized cascades per (source, compound action): (path id tuple, end, rate)
    used = set(model.locations)
    new_actions = list(model.actions)
    path_loc: dict[tuple, str] = {}
    path_end: dict[str, str] = {}
    arcs: dict[tuple[str, str], list[tuple[str, float]]] = {}

    def walk(loc, plan, trace, weight, out):
        if model.kind[loc] == CONTINUOUS:
            out.append((tuple(trace) + (loc,), weight))
            return
        b = plan[loc]
        for (s, aa, t), p in sorted(
            ((k, v) for k, v in model.probs.items() if k[0] == loc and k[1] == b and v > 0.0),
            key=lambda kv: model.locations.index(kv[0][2]),
        ):
            walk(t, plan, trace + [loc, b], weight * p, out)

    for l in cont:
        for a0 in enabled_actions(model, l):
            for plan in plans[(l, a0)]:
                aid = plan_id(a0, plan)
                if aid not in new_actions:
                    new_actions.append(aid)
                rows: dict[tuple, float] = {}
                for (s, aa, t), r in sorted(
                    ((k, v) for k, v in model.rates.items() if k[0] == l and k[1] == a0 and v > 0.0),
                    key=lambda kv: model.locations.index(kv[0][2]),
                ):
                    out: list[tuple[tuple, float]] = []
                    walk(t, plan, [a0], r, out)
                    for trace, w in out:
                        rows[trace] = rows.get(trace, 0.0) + w
                entry = []
                for trace, w in rows.items():
                    if trace not in path_loc:
                        name = _fresh("~" + "~".join(trace), used)
                        path_loc[trace] = name
                        path_end[name] = trace[-1]
                    entry.append((path_loc[trace], w))
                arcs[(l, aid)] = entry

    locations = []
    mapped = {}
    for l in model.locations:
        mark = (l in model.goal)
        locations.append((l, model.kind[l], model.owner[l], "goal") if mark else (l, model.kind[l], model.owner[l]))
        mapped[l] = l
    for trace, name in path_loc.items():
        end = path_end[name]
        mark = (end in model.goal)
        locations.append((name, CONTINUOUS, model.owner[end], "goal") if mark else (name, CONTINUOUS, model.owner[end]))
        mapped[name] = end

    rates = {}
    for (src, aid), entry in arcs.items():
        for tgt, w in entry:
            rates[(src, aid, tgt)] = rates.get((src, aid, tgt), 0.0) + w
    # path locations copy the outgoing rows of the location their cascade ends in
    for name, end in path_end.items():
        for (src, aid), entry in arcs.items():
            if src == end:
                for tgt, w in entry:
                    rates[(name, aid, tgt)] = rates.get((name, aid, tgt), 0.0) + w

    probs = {k: v for k, v in model.probs.items() if model.kind[k[0]] == DISCRETE}
    out_model = build_model(
        locations=locations,
        rates=rates,
        probs=probs,
        initial=model.initial,
        time_bound=model.time_bound,
        goal_mode=model.goal_mode,
        actions=new_actions,
    )
    return out_model, mapped
