"""Optimal values and schedulers by backward integration of the optimality
equations, plus evaluation of fixed schedulers and equilibrium checking.

For continuous locations the value satisfies
``-df(l,t)/dt = opt_a sum_l' R(l,a,l') (f(l',t) - f(l,t))`` with opt = max at
reachability-owned and min at safety-owned locations; discrete locations
satisfy the algebraic layer ``f(l,t) = opt_a sum_l' P(l,a,l') f(l',t)``,
resolved in increasing depth order.  Integration is classical fixed-step RK4
backward in time, with the optimizing action re-selected at every stage; when
the optimizing action at some location changes between step endpoints the
crossing of the two gain curves is bisected and the policy switch recorded.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _backend
from ._compile import ModelArrays, compile_model, profile_to_row
from .errors import GameObjectiveError, InvalidModelError, ModelError, SchedulerError
from .model import CONTINUOUS, REACH, SAFE, CtmgModel, enabled_actions, validate


@dataclass(frozen=True)
class SolveOptions:
    """Grid resolution and the solver's two tolerances.

    ``tie_tol`` is the gain margin below which the incumbent action is kept
    (and simultaneous entrants are resolved by action order); ``switch_tol``
    is the bisection tolerance for switch times.
    """

    steps: int = 10000
    switch_tol: float = 1e-9
    tie_tol: float = 1e-12

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("steps must be at least 2")
        if not (self.switch_tol > 0.0 and self.tie_tol > 0.0):
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class PositionalProfile:
    """Deterministic location -> action decision map.

    Locations without enabled actions (absorbing sinks) carry no entry.
    """

    choice: Mapping[str, str]

    def __getitem__(self, loc):
        return self.choice[loc]

    def items(self):
        return self.choice.items()


@dataclass(frozen=True)
class CylindricalScheduler:
    """Finite partition of [0, t_max] with one positional profile per piece.

    ``breakpoints`` is (0, t_1, ..., t_max); interval i is (t_i, t_{i+1}]
    except the first, which is [0, t_1].  The decision at a breakpoint is the
    decision of the interval below it.  A zero-horizon scheduler has a single
    breakpoint (0.0,) and one profile.
    """

    breakpoints: tuple[float, ...]
    decisions: tuple[PositionalProfile, ...]
    player: str = "both"

    def __post_init__(self):
        bp = self.breakpoints
        if len(bp) == 1:
            if len(self.decisions) != 1 or bp[0] != 0.0:
                raise SchedulerError("degenerate scheduler must be a single profile at time 0")
            return
        if len(bp) != len(self.decisions) + 1:
            raise SchedulerError("breakpoint/decision count mismatch")
        if bp[0] != 0.0:
            raise SchedulerError("breakpoints must start at 0")
        for a, b in zip(bp, bp[1:]):
            if not (b > a):
                raise SchedulerError("breakpoints must be strictly ascending")

    @property
    def t_max(self) -> float:
        return self.breakpoints[-1]

    def interval_index(self, t: float) -> int:
        if len(self.breakpoints) == 1:
            return 0
        if not (0.0 <= t <= self.t_max):
            raise SchedulerError(f"time {t} outside [0, {self.t_max}]")
        return max(0, bisect.bisect_left(self.breakpoints, t) - 1)

    def decision_at(self, loc: str, t: float) -> str:
        return self.decisions[self.interval_index(t)][loc]

    def restricted(self, locations, player: str | None = None) -> "CylindricalScheduler":
        """Projection onto a location subset, merging now-identical intervals."""
        locs = set(locations)
        player = player if player is not None else self.player
        profs = [{l: a for l, a in p.items() if l in locs} for p in self.decisions]
        if len(self.breakpoints) == 1:
            return CylindricalScheduler((0.0,), (PositionalProfile(profs[0]),), player)
        bps = [self.breakpoints[0]]
        kept = [profs[0]]
        for i in range(1, len(profs)):
            if profs[i] != kept[-1]:
                bps.append(self.breakpoints[i])
                kept.append(profs[i])
        bps.append(self.breakpoints[-1])
        return CylindricalScheduler(tuple(bps), tuple(PositionalProfile(p) for p in kept), player)


@dataclass
class ValueFunction:
    """Per-location reachability probabilities sampled on a time grid.

    ``values[i, j]`` is the value of ``locations[i]`` at ``grid[j]``;
    ``switch_points`` are the times where the optimizing action of some
    location changes, with the exact state recorded in ``switch_values``.
    """

    locations: tuple[str, ...]
    grid: np.ndarray
    values: np.ndarray
    switch_points: tuple[float, ...]
    switch_values: np.ndarray
    objective: str
    _interp: dict = field(default_factory=dict, repr=False, compare=False)

    def row(self, loc: str) -> np.ndarray:
        try:
            i = self.locations.index(loc)
        except ValueError:
            raise ModelError(f"unknown location id {loc!r}") from None
        return self.values[i]

    def value_at(self, loc: str, t):
        """Monotone piecewise-cubic interpolation; exact at grid points."""
        lo, hi = float(self.grid[0]), float(self.grid[-1])
        ts = np.asarray(t, dtype=np.float64)
        if np.any(ts < lo - 1e-12) or np.any(ts > hi + 1e-12):
            raise ValueError(f"time {t} outside [{lo}, {hi}]")
        row = self.row(loc)
        if len(self.grid) == 1:
            out = np.full_like(ts, row[0], dtype=np.float64)
            return float(out) if out.ndim == 0 else out
        if loc not in self._interp:
            from scipy.interpolate import PchipInterpolator

            self._interp[loc] = PchipInterpolator(self.grid, row, extrapolate=True)
        out = np.asarray(self._interp[loc](np.clip(ts, lo, hi)))
        # stored values take precedence where t hits the grid exactly
        idx = np.searchsorted(self.grid, ts)
        idx = np.minimum(idx, len(self.grid) - 1)
        exact = self.grid[idx] == ts
        out = np.where(exact, row[idx], out)
        return float(out) if out.ndim == 0 else out

    def initial_value(self, initial: Mapping[str, float]) -> float:
        """Initial-distribution weighted value at time 0."""
        return float(sum(w * self.values[self.locations.index(l), 0] for l, w in initial.items()))


@dataclass(frozen=True)
class SolveResult:
    value: ValueFunction
    scheduler: CylindricalScheduler
    schedulers: Mapping[str, CylindricalScheduler]


@dataclass(frozen=True)
class NashReport:
    """Residuals of the coupled optimality equations on the grid."""

    ode_residual: float
    discrete_residual: float
    profile_residual: float
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.ode_residual, self.discrete_residual, self.profile_residual)

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tol


def _require_valid(model: CtmgModel):
    report = validate(model)
    if not report.ok:
        raise InvalidModelError(report)


def _check_objective(model: CtmgModel, objective: str):
    if objective not in ("max", "min", "game"):
        raise ModelError(f"unknown objective {objective!r}")
    if objective == "game" and len(model.players()) < 2:
        raise GameObjectiveError("GAME_ON_SINGLE_PLAYER: model is owned by a single player")


def _grid(t_max: float, steps: int) -> np.ndarray:
    return np.array([t_max * i / steps for i in range(steps + 1)], dtype=np.float64)


def _profiles_from_rows(arrays: ModelArrays, rows) -> tuple[PositionalProfile, ...]:
    out = []
    for row in rows:
        choice = {}
        for l in range(arrays.n_loc):
            a = int(row[l])
            if a >= 0:
                choice[arrays.loc_ids[l]] = arrays.act_ids[a]
        out.append(PositionalProfile(choice))
    return tuple(out)


def _degenerate_solution(model, arrays, objective):
    from ._kernel_py import _Work, _pick_initial, _resolve

    wk = _Work(arrays)
    y0 = [1.0 if wk.is_goal[l] else 0.0 for l in range(wk.L)]
    w = [0.0] * wk.L
    _resolve(wk, y0, w, None)
    values = np.asarray(w, dtype=np.float64).reshape(-1, 1)
    prof = _pick_initial(wk, w, 1e-12)
    vf = ValueFunction(model.locations, np.zeros(1), values, (), np.zeros((wk.L, 0)), objective)
    sched = CylindricalScheduler((0.0,), _profiles_from_rows(arrays, [prof]))
    return vf, sched


def solve(model: CtmgModel, objective: str = "max", opts: SolveOptions | None = None) -> SolveResult:
    """Optimal value function and a minimal cylindrical scheduler.

    For ``objective`` 'max' or 'min' every location is optimised in that
    direction; 'game' optimises per owner and returns one scheduler per
    player in ``result.schedulers`` alongside the combined one.
    """
    opts = opts or SolveOptions()
    _require_valid(model)
    _check_objective(model, objective)
    arrays = compile_model(model, objective)

    if model.time_bound == 0.0:
        vf, sched = _degenerate_solution(model, arrays, objective)
    else:
        values, bps, rows, sw_times, sw_vals = _backend.solve_kernel(
            arrays, opts.steps, opts.switch_tol, opts.tie_tol
        )
        vf = ValueFunction(
            model.locations,
            _grid(model.time_bound, opts.steps),
            values,
            tuple(sw_times),
            sw_vals,
            objective,
        )
        sched = CylindricalScheduler(tuple(bps), _profiles_from_rows(arrays, rows))

    if objective == "game":
        schedulers = {
            REACH: sched.restricted([l for l in model.locations if model.owner[l] == REACH], REACH),
            SAFE: sched.restricted([l for l in model.locations if model.owner[l] == SAFE], SAFE),
        }
    else:
        schedulers = {"both": sched}
    return SolveResult(value=vf, scheduler=sched, schedulers=schedulers)


def check_scheduler(model: CtmgModel, scheduler: CylindricalScheduler, arrays: ModelArrays | None = None):
    """Rows/breakpoints of a scheduler against a model; raises SchedulerError."""
    arrays = arrays or compile_model(model, "max")
    if scheduler.t_max != model.time_bound:
        raise SchedulerError(
            f"scheduler horizon {scheduler.t_max} does not match time bound {model.time_bound}"
        )
    rows = []
    try:
        for prof in scheduler.decisions:
            rows.append(profile_to_row(arrays, dict(prof.choice)))
    except ModelError as exc:
        raise SchedulerError(str(exc)) from None
    if len(scheduler.breakpoints) == 1:
        bps = np.array([0.0, 0.0])
    else:
        bps = np.asarray(scheduler.breakpoints, dtype=np.float64)
    return bps, np.asarray(rows, dtype=np.int32)


def evaluate_scheduler(
    model: CtmgModel,
    scheduler: CylindricalScheduler,
    opts: SolveOptions | None = None,
    _validated: bool = False,
) -> ValueFunction:
    """Value function of a fixed scheduler (linear equations per interval)."""
    opts = opts or SolveOptions()
    if not _validated:
        _require_valid(model)
    arrays = compile_model(model, "max")
    bps, rows = check_scheduler(model, scheduler, arrays)
    if model.time_bound == 0.0:
        from ._kernel_py import _Work, _resolve

        wk = _Work(arrays)
        y0 = [1.0 if wk.is_goal[l] else 0.0 for l in range(wk.L)]
        w = [0.0] * wk.L
        _resolve(wk, y0, w, [int(a) for a in rows[-1]])
        values = np.asarray(w, dtype=np.float64).reshape(-1, 1)
        return ValueFunction(model.locations, np.zeros(1), values, (), np.zeros((wk.L, 0)), "fixed")
    values = _backend.evaluate_kernel(arrays, bps, rows, opts.steps)
    return ValueFunction(
        model.locations,
        _grid(model.time_bound, opts.steps),
        values,
        (),
        np.zeros((arrays.n_loc, 0)),
        "fixed",
    )


def gain(model: CtmgModel, snapshot: Mapping[str, float], loc: str, act: str) -> float:
    """sum_l' R(l,a,l') (snapshot(l') - snapshot(l)) for a enabled at l."""
    if model.kind.get(loc) != CONTINUOUS:
        raise ModelError(f"gain is defined on continuous locations, got {loc!r}")
    if act not in enabled_actions(model, loc):
        raise ModelError(f"action {act!r} is not enabled at {loc!r}")
    base = snapshot[loc]
    total = 0.0
    for (l, a, t), r in model.rates.items():
        if l == loc and a == act:
            total += r * (snapshot[t] - base)
    return total


def _discrete_value(model, snapshot, loc, act):
    return sum(p * snapshot[t] for (l, a, t), p in model.probs.items() if l == loc and a == act)


def local_improvement(
    model: CtmgModel,
    snapshot: Mapping[str, float],
    objective: str = "game",
    tie_tol: float = 1e-12,
    order=None,
) -> PositionalProfile:
    """Strategy-improvement fixpoint on a fixed value snapshot.

    Starting from the action-order-minimal profile, locations whose owner has
    a strictly better action (by more than ``tie_tol``) switch to it until the
    per-owner optimality equations hold at the snapshot.  The sweep ``order``
    does not affect the fixpoint.
    """
    _check_objective(model, objective)
    locs = list(order) if order is not None else list(model.locations)
    sigma = {}
    for l in model.locations:
        if objective == "game":
            sigma[l] = 1.0 if model.owner[l] == REACH else -1.0
        else:
            sigma[l] = 1.0 if objective == "max" else -1.0

    def score(l, a):
        if model.kind[l] == CONTINUOUS:
            return sigma[l] * gain(model, snapshot, l, a)
        return sigma[l] * _discrete_value(model, snapshot, l, a)

    choice = {}
    for l in model.locations:
        acts = enabled_actions(model, l)
        if acts:
            choice[l] = acts[0]

    changed = True
    sweeps = 0
    while changed:
        changed = False
        sweeps += 1
        if sweeps > len(model.locations) * len(model.actions) + 2:
            break
        for l in locs:
            if l not in choice:
                continue
            acts = enabled_actions(model, l)
            cur = score(l, choice[l])
            best_a, best = choice[l], cur
            for a in acts:
                v = score(l, a)
                if v > best + tie_tol:
                    best_a, best = a, v
            if best_a != choice[l]:
                choice[l] = best_a
                changed = True
    return PositionalProfile(choice)


def check_nash(
    model: CtmgModel,
    vf: ValueFunction,
    scheduler: CylindricalScheduler,
    tol: float,
) -> NashReport:
    """Residuals of the equilibrium equations for a solve result.

    Uses second-order finite differences of the grid values against the
    owner-optimal gains (grid points whose difference stencil straddles a
    switch point are skipped), checks the discrete-location algebraic
    equations, and checks that the scheduler's decisions attain the optimum
    on their intervals.
    """
    arrays = compile_model(model, vf.objective if vf.objective in ("max", "min", "game") else "max")
    grid = vf.grid
    n = len(grid) - 1
    if n < 2:
        return NashReport(0.0, 0.0, 0.0, tol)
    h = float(grid[1] - grid[0])
    vals = vf.values
    sigma = np.where(arrays.maximize == 1, 1.0, -1.0)

    def opt_scores(j):
        w = vals[:, j]
        best = np.full(arrays.n_loc, -np.inf)
        for a in range(arrays.n_act):
            en = arrays.enabled[:, a] == 1
            g = arrays.R[:, a, :] @ w - arrays.exit_rate[:, a] * w
            m = arrays.P[:, a, :] @ w
            score = np.where(arrays.is_cont == 1, g, m) * sigma
            best = np.where(en, np.maximum(best, score), best)
        return best

    switch_like = sorted(set(float(s) for s in vf.switch_points))

    def near_switch(t, radius):
        for s in switch_like:
            if abs(t - s) <= radius:
                return True
        return False

    ode_res = 0.0
    disc_res = 0.0
    prof_res = 0.0
    cont = [l for l in range(arrays.n_loc) if arrays.is_cont[l] and arrays.n_enabled[l] > 0
            and not (arrays.absorbing and arrays.is_goal[l])]
    disc = [int(d) for d in arrays.disc_order
            if not (arrays.absorbing and arrays.is_goal[d]) and arrays.n_enabled[d] > 0]
    rows = [profile_to_row(arrays, dict(p.choice)) for p in scheduler.decisions]
    bps = scheduler.breakpoints

    for j in range(n + 1):
        t = float(grid[j])
        best = opt_scores(j)
        w = vals[:, j]
        for d in disc:
            disc_res = max(disc_res, abs(w[d] - sigma[d] * best[d]))
        if near_switch(t, 1.5 * h):
            continue
        # -df/dt from grid values vs owner-optimal gain
        if 0 < j < n:
            mdot = (vals[:, j - 1] - vals[:, j + 1]) / (2.0 * h)
        elif j == 0:
            mdot = -(-3.0 * vals[:, 0] + 4.0 * vals[:, 1] - vals[:, 2]) / (2.0 * h)
        else:
            mdot = -(3.0 * vals[:, n] - 4.0 * vals[:, n - 1] + vals[:, n - 2]) / (2.0 * h)
        for l in cont:
            ode_res = max(ode_res, abs(mdot[l] - sigma[l] * best[l]))
        # the scheduler's decisions attain the optimum on their intervals
        k = 0 if len(bps) == 1 else max(0, bisect.bisect_left(bps, t) - 1)
        row = rows[min(k, len(rows) - 1)]
        for l in cont + disc:
            a = int(row[l])
            if a < 0:
                continue
            g = float(arrays.R[l, a, :] @ w - arrays.exit_rate[l, a] * w[l]) if arrays.is_cont[l] \
                else float(arrays.P[l, a, :] @ w)
            prof_res = max(prof_res, abs(sigma[l] * g - best[l]))

    return NashReport(ode_res, disc_res, prof_res, tol)
