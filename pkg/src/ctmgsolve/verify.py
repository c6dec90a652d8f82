"""Independent oracles and statistical checks.

Everything here deliberately avoids the solver's RK4 integrator: the grid
oracle is a first-order explicit dynamic program, the uniformization oracle is
Poisson-weighted transient analysis of the embedded jump chain, enumeration
brute-forces all positional decision maps, and the simulator samples complete
timed paths with a counter-based generator (Philox4x32-10 keyed by seed and
run index, fixed for reproducibility).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _backend
from ._compile import compile_model, profile_to_row
from .errors import CapExceededError, InvalidModelError, ModelError, SchedulerError
from .model import (
    ABSORBING,
    CONTINUOUS,
    DISCRETE,
    CtmgModel,
    build_model,
    enabled_actions,
    exit_rate,
    validate,
)
from .solver import (
    CylindricalScheduler,
    PositionalProfile,
    SolveOptions,
    ValueFunction,
    check_scheduler,
    evaluate_scheduler,
)


@dataclass(frozen=True)
class ValueBounds:
    """Enclosure of a fixed profile's reachability value per location."""

    lower: Mapping[str, float]
    upper: Mapping[str, float]
    gap: float
    n_steps: int


@dataclass(frozen=True)
class SimResult:
    estimate: float
    runs: int
    standard_error: float
    seed: int


def _require_valid(model: CtmgModel):
    report = validate(model)
    if not report.ok:
        raise InvalidModelError(report)


def _poisson_tail(n: int, m: float) -> float:
    """P(N > n) for N ~ Poisson(m), summed upward from the first tail term.

    The leading term is evaluated in log space (overflow-safe for large m);
    subsequent terms follow by the ratio m/k, past the mode until negligible.
    """
    if m <= 0.0:
        return 0.0
    k = n + 1
    log_term = k * math.log(m) - m - math.lgamma(k + 1)
    if log_term < -745.0 and k > m:
        return 0.0
    term = math.exp(log_term)
    tail = 0.0
    while term > 0.0 and (k <= m or term > tail * 1e-17):
        tail += term
        k += 1
        term *= m / k
    return tail


def poisson_step_bound(lambda_max: float, horizon: float, epsilon: float) -> int:
    """Smallest n such that more than n Poisson(lambda_max*horizon) events
    have probability below epsilon."""
    m = lambda_max * horizon
    n = 0
    while _poisson_tail(n, m) >= epsilon:
        n += 1
    return n


def _cascade_targets(model, profile, states, goal_state):
    """Per location: distribution over (continuous non-goal state | GOAL)
    after instantly firing discrete locations under the profile."""
    from .model import discrete_depth

    depth = discrete_depth(model)
    order = sorted(model.locations, key=lambda l: (depth[l], model.locations.index(l)))
    dist: dict[str, dict[int, float]] = {}
    for l in order:
        if l in model.goal:
            dist[l] = {goal_state: 1.0}
        elif model.kind[l] == CONTINUOUS:
            dist[l] = {states[l]: 1.0}
        else:
            a = profile.choice.get(l)
            if a is None:
                raise SchedulerError(f"profile lacks a decision for discrete location {l!r}")
            acc: dict[int, float] = {}
            for (s, aa, t), p in model.probs.items():
                if s == l and aa == a and p > 0.0:
                    for st, q in dist[t].items():
                        acc[st] = acc.get(st, 0.0) + p * q
            dist[l] = acc
    return dist


def truncated_uniformization_value(
    model: CtmgModel, profile: PositionalProfile, epsilon: float
) -> ValueBounds:
    """Reachability enclosure for a fixed positional profile.

    Lower bound: probability of reaching the goal within the horizon in at
    most n_eps uniformized steps, where n_eps truncates the Poisson step
    count at tail mass epsilon; the true value exceeds the lower bound by
    less than epsilon.
    """
    _require_valid(model)
    if model.goal_mode != ABSORBING:
        raise ModelError("uniformization bounds are defined for absorbing goal mode")
    arrays = compile_model(model, "max")
    profile_to_row(arrays, dict(profile.choice))  # enabledness/completeness check

    lam = 0.0
    for l in model.locations:
        if model.kind[l] == CONTINUOUS:
            for a in enabled_actions(model, l):
                lam = max(lam, exit_rate(model, l, a))
    m = lam * model.time_bound
    n = poisson_step_bound(lam, model.time_bound, epsilon) if m > 0.0 else 0

    cont = [l for l in model.locations if model.kind[l] == CONTINUOUS and l not in model.goal]
    states = {l: i for i, l in enumerate(cont)}
    goal_state = len(cont)
    n_s = len(cont) + 1
    cascade = _cascade_targets(model, profile, states, goal_state)

    U = np.zeros((n_s, n_s))
    U[goal_state, goal_state] = 1.0
    for l in cont:
        i = states[l]
        a = profile.choice.get(l)
        if a is None or lam == 0.0:
            U[i, i] = 1.0
            continue
        rho = exit_rate(model, l, a)
        U[i, i] += 1.0 - rho / lam
        for (s, aa, t), r in model.rates.items():
            if s == l and aa == a and r > 0.0:
                for st, q in cascade[t].items():
                    U[i, st] += (r / lam) * q

    # pmf weights in log space, then the min(steps, n) tail correction
    if m > 0.0:
        logs = np.empty(n + 1)
        logs[0] = -m
        for k in range(1, n + 1):
            logs[k] = logs[k - 1] + math.log(m) - math.log(k)
        pmf = np.exp(logs)
    else:
        pmf = np.zeros(n + 1)
        pmf[0] = 1.0

    g = np.zeros(n_s)
    g[goal_state] = 1.0
    acc = pmf[0] * g
    for k in range(1, n + 1):
        g = U @ g
        acc = acc + pmf[k] * g
    acc = acc + max(0.0, 1.0 - float(pmf.sum())) * g

    lower = {}
    for l in model.locations:
        v = 0.0
        for st, q in cascade[l].items():
            v += q * acc[st]
        lower[l] = min(1.0, max(0.0, v))
    upper = {l: min(1.0, lower[l] + epsilon) for l in model.locations}
    gap = max(upper[l] - lower[l] for l in model.locations)
    return ValueBounds(lower=lower, upper=upper, gap=gap, n_steps=n)


def grid_oracle(model: CtmgModel, objective: str, time_steps: int) -> ValueFunction:
    """Explicit-Euler backward dynamic program on a uniform grid.

    First-order in the step size and fully independent of the RK4 kernels;
    used as a cross-check via Richardson extrapolation.
    """
    _require_valid(model)
    if time_steps < 2:
        raise ValueError("time_steps must be at least 2")
    arrays = compile_model(model, objective)
    L = arrays.n_loc
    N = time_steps
    t_max = arrays.t_max
    h = t_max / N

    sigma = np.where(arrays.maximize == 1, 1.0, -1.0)
    cont = (arrays.is_cont == 1)
    pinned = (arrays.is_goal == 1) if arrays.absorbing else np.zeros(L, dtype=bool)
    enabled = arrays.enabled == 1
    neg = np.full((L, arrays.n_act), -np.inf)

    def resolve(f):
        f = f.copy()
        f[pinned] = 1.0
        for d in arrays.disc_order:
            d = int(d)
            if pinned[d]:
                continue
            scores = np.where(enabled[d], sigma[d] * (arrays.P[d] @ f), neg[d])
            if np.any(enabled[d]):
                f[d] = sigma[d] * scores.max()
        return f

    def opt_gain(f):
        gains = np.einsum("lak,k->la", arrays.R, f) - arrays.exit_rate * f[:, None]
        scores = np.where(enabled, sigma[:, None] * gains, neg)
        out = np.where(enabled.any(axis=1), sigma * scores.max(axis=1), 0.0)
        out[~cont] = 0.0
        out[pinned] = 0.0
        return out

    values = np.empty((L, N + 1))
    f = np.where(arrays.is_goal == 1, 1.0, 0.0)
    f = resolve(f)
    values[:, N] = f
    for i in range(N, 0, -1):
        f = f + h * opt_gain(f)
        f = resolve(f)
        values[:, i - 1] = f

    grid = np.array([t_max * i / N for i in range(N + 1)])
    return ValueFunction(model.locations, grid, values, (), np.zeros((L, 0)), objective)


def enumerate_positional(
    model: CtmgModel,
    objective: str = "max",
    opts: SolveOptions | None = None,
    cap: int = 10**6,
) -> tuple[PositionalProfile, float]:
    """Evaluate every deterministic positional profile; return the arg-opt of
    the initial-distribution weighted value at time 0."""
    opts = opts or SolveOptions()
    _require_valid(model)
    if objective not in ("max", "min"):
        raise ModelError("enumeration needs objective max or min")
    arrays = compile_model(model, objective)

    slots = [l for l in model.locations if enabled_actions(model, l)]
    choices = [enabled_actions(model, l) for l in slots]
    count = 1
    for c in choices:
        count *= len(c)
    if count > cap:
        raise CapExceededError(f"CAP_EXCEEDED: {count} profiles exceed the cap {cap}")

    if model.time_bound == 0.0:
        bps = np.array([0.0, 0.0])
    else:
        bps = np.array([0.0, model.time_bound])
    init = arrays.init
    best_profile = None
    best_value = None
    sign = 1.0 if objective == "max" else -1.0
    for combo in itertools.product(*choices):
        choice = dict(zip(slots, combo))
        row = profile_to_row(arrays, choice)
        if model.time_bound == 0.0:
            from ._kernel_py import _Work, _resolve

            wk = _Work(arrays)
            y0 = [1.0 if wk.is_goal[l] else 0.0 for l in range(wk.L)]
            w = [0.0] * wk.L
            _resolve(wk, y0, w, [int(a) for a in row])
            v = float(sum(init[l] * w[l] for l in range(wk.L)))
        else:
            vals = _backend.evaluate_kernel(arrays, bps, row.reshape(1, -1), opts.steps)
            v = float(init @ vals[:, 0])
        if best_value is None or sign * v > sign * best_value:
            best_value = v
            best_profile = PositionalProfile(choice)
    return best_profile, best_value


def simulate(model: CtmgModel, scheduler: CylindricalScheduler, runs: int, seed: int) -> SimResult:
    """Monte Carlo estimate of the scheduler's value from the initial
    distribution; bit-reproducible for a fixed seed."""
    _require_valid(model)
    if runs <= 0:
        raise ValueError("runs must be positive")
    arrays = compile_model(model, "max")
    bps, rows = check_scheduler(model, scheduler, arrays)
    successes = _backend.simulate_kernel(arrays, bps, rows, runs, seed)
    est = successes / runs
    se = math.sqrt(est * (1.0 - est) / runs)
    return SimResult(estimate=est, runs=runs, standard_error=se, seed=seed)


def _merged_partition(d: CylindricalScheduler, e: CylindricalScheduler):
    bps = sorted(set(d.breakpoints) | set(e.breakpoints))
    if len(bps) == 1:
        return [0.0]
    return bps


def scheduler_distance(
    model: CtmgModel,
    d: CylindricalScheduler,
    e: CylindricalScheduler,
    opts: SolveOptions | None = None,
) -> float:
    """Upper bound on |value(d) - value(e)| via the difference construction.

    A fresh continuous goal g is added; wherever the two schedulers disagree
    (per location, on the merged interval partition) the combined action jumps
    to g with the two exit rates summed (discrete disagreements jump surely).
    Old goal locations become absorbing non-goal sinks.  The distance is the
    probability of reaching g within the horizon under the combined scheduler.
    """
    opts = opts or SolveOptions()
    _require_valid(model)
    if d.t_max != e.t_max:
        raise SchedulerError(f"mismatched time bounds: {d.t_max} vs {e.t_max}")
    if d.t_max != model.time_bound:
        raise SchedulerError("scheduler horizon does not match the model time bound")
    arrays = compile_model(model, "max")
    check_scheduler(model, d, arrays)
    check_scheduler(model, e, arrays)

    g = "g"
    while g in model.kind:
        g += "'"

    bps = _merged_partition(d, e)
    n_int = 1 if len(bps) == 1 else len(bps) - 1

    # per interval, per location: agreed action or combined pair
    pairs_used: list[tuple[str, str]] = []
    combined_at: dict[tuple[str, str, str], None] = {}
    profiles = []
    for i in range(n_int):
        prof = {}
        for l in model.locations:
            if not enabled_actions(model, l):
                continue
            if l in model.goal:
                continue  # old goals become sinks
            t_probe = bps[i + 1] if len(bps) > 1 else 0.0
            ad = d.decisions[d.interval_index(t_probe)].choice[l]
            ae = e.decisions[e.interval_index(t_probe)].choice[l]
            if ad == ae:
                prof[l] = ad
            else:
                pair = (ad, ae)
                if pair not in pairs_used:
                    pairs_used.append(pair)
                combined_at[(l, ad, ae)] = None
                prof[l] = f"{ad}|{ae}"
        profiles.append(PositionalProfile(prof))

    pair_order = {}
    for ad, ae in sorted(pairs_used, key=lambda p: (model.actions.index(p[0]), model.actions.index(p[1]))):
        pair_order[(ad, ae)] = f"{ad}|{ae}"

    locations = [(l, model.kind[l], model.owner[l]) for l in model.locations]
    locations.append((g, CONTINUOUS, "reach", "goal"))
    rates = {}
    probs = {}
    for (l, a, t), r in model.rates.items():
        if l not in model.goal:
            rates[(l, a, t)] = r
    for (l, a, t), p in model.probs.items():
        if model.kind[l] == DISCRETE and l not in model.goal:
            probs[(l, a, t)] = p
    for (l, ad, ae) in combined_at:
        cid = pair_order[(ad, ae)]
        if model.kind[l] == CONTINUOUS:
            rates[(l, cid, g)] = exit_rate(model, l, ad) + exit_rate(model, l, ae)
        else:
            probs[(l, cid, g)] = 1.0

    delta_model = build_model(
        locations=locations,
        rates=rates,
        probs=probs,
        initial=model.initial,
        time_bound=model.time_bound,
        goal_mode=ABSORBING,
        actions=list(model.actions) + [pair_order[p] for p in sorted(pairs_used, key=lambda p: (model.actions.index(p[0]), model.actions.index(p[1])))],
    )
    if len(bps) == 1:
        delta_sched = CylindricalScheduler((0.0,), tuple(profiles))
    else:
        delta_sched = CylindricalScheduler(tuple(bps), tuple(profiles))
    vf = evaluate_scheduler(delta_model, delta_sched, opts, _validated=True)
    return vf.initial_value(delta_model.initial)
