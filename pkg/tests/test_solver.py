import math

import numpy as np
import pytest

from ctmgsolve import (
    CylindricalScheduler,
    GameObjectiveError,
    InvalidModelError,
    ModelError,
    PositionalProfile,
    SchedulerError,
    SolveOptions,
    build_model,
    check_nash,
    evaluate_scheduler,
    gain,
    local_improvement,
    solve,
)

from conftest import (
    T_SWITCH,
    T_SWITCH_MIN,
    V_ALWAYS_A,
    V_ALWAYS_B,
    V_MIN,
    V_OPT,
    fb_curve,
)
from corpus import all_profiles, random_model

FAST = SolveOptions(steps=2000)


def always(model, mapping):
    return CylindricalScheduler((0.0, model.time_bound), (PositionalProfile(mapping),))


class TestSolveRace:
    def test_single_switch_at_closed_form_time(self, fig1):
        res = solve(fig1, "max")
        assert len(res.value.switch_points) == 1
        assert abs(res.value.switch_points[0] - T_SWITCH) <= 1e-4
        # action b above the switch, a below
        sched = res.scheduler
        assert sched.decision_at("A", 0.9) == "b"
        assert sched.decision_at("A", 0.1) == "a"
        assert sched.decision_at("A", sched.breakpoints[1]) == "a"  # left environment

    def test_optimal_value_closed_form(self, fig1):
        res = solve(fig1, "max")
        assert abs(res.value.values[0, 0] - V_OPT) <= 1e-6

    def test_min_objective_closed_form(self, fig1):
        res = solve(fig1, "min", FAST)
        assert len(res.value.switch_points) == 1
        assert abs(res.value.switch_points[0] - T_SWITCH_MIN) <= 1e-6
        assert abs(res.value.values[0, 0] - V_MIN) <= 1e-6

    def test_relay_location_curve(self, fig1):
        res = solve(fig1, "max", FAST)
        for t in (0.0, 0.5, 0.9):
            assert abs(res.value.value_at("B", t) - fb_curve(t)) <= 1e-6

    def test_goal_location_pinned(self, fig1):
        res = solve(fig1, "max", FAST)
        assert res.value.value_at("C", 0.5) == 1.0
        assert np.all(res.value.row("C") == 1.0)

    def test_values_at_horizon(self, fig1):
        res = solve(fig1, "max", FAST)
        assert res.value.value_at("A", 1.0) == 0.0
        assert res.value.value_at("B", 1.0) == 0.0

    def test_monotone_in_time(self, fig1):
        res = solve(fig1, "max", FAST)
        for l in fig1.locations:
            row = res.value.row(l)
            assert np.all(np.diff(row) <= 1e-12)

    def test_values_within_unit_interval(self, fig1):
        for objective in ("max", "min"):
            res = solve(fig1, objective, FAST)
            assert np.all(res.value.values >= -1e-12)
            assert np.all(res.value.values <= 1.0 + 1e-12)

    def test_value_at_out_of_range(self, fig1):
        res = solve(fig1, "max", FAST)
        with pytest.raises(ValueError):
            res.value.value_at("A", 1.5)
        with pytest.raises(ValueError):
            res.value.value_at("A", -0.1)


def test_zero_horizon_solution(fig1):
    m = build_model(
        locations=[(l, fig1.kind[l], fig1.owner[l], "goal") if l in fig1.goal
                   else (l, fig1.kind[l], fig1.owner[l]) for l in fig1.locations],
        rates=fig1.rates,
        initial=fig1.initial,
        time_bound=0.0,
        actions=fig1.actions,
    )
    res = solve(m, "max")
    assert res.value.switch_points == ()
    assert res.value.value_at("C", 0.0) == 1.0
    assert res.value.value_at("A", 0.0) == 0.0
    assert res.scheduler.breakpoints == (0.0,)


def test_invalid_model_rejected():
    m = build_model(
        locations=[("A", "continuous", "reach"), ("C", "continuous", "reach", "goal")],
        rates={("C", "a", "A"): 1.0, ("A", "a", "C"): 1.0},
        initial={"A": 1.0},
        time_bound=1.0,
        actions=["a"],
    )
    with pytest.raises(InvalidModelError):
        solve(m, "max")


def test_game_on_single_player_rejected(fig1):
    with pytest.raises(GameObjectiveError):
        solve(fig1, "game")


class TestEvaluateScheduler:
    def test_always_b(self, fig1):
        vf = evaluate_scheduler(fig1, always(fig1, {"A": "b", "B": "a"}), FAST)
        assert abs(vf.values[0, 0] - V_ALWAYS_B) <= 1e-6

    def test_always_a(self, fig1):
        vf = evaluate_scheduler(fig1, always(fig1, {"A": "a", "B": "a"}), FAST)
        assert abs(vf.values[0, 0] - V_ALWAYS_A) <= 1e-6

    def test_extracted_optimal_scheduler(self, fig1):
        res = solve(fig1, "max")
        vf = evaluate_scheduler(fig1, res.scheduler)
        assert abs(vf.values[0, 0] - V_OPT) <= 1e-6
        assert float(np.max(np.abs(vf.values - res.value.values))) <= 1e-6

    def test_disabled_decision_rejected(self, fig1):
        with pytest.raises(SchedulerError):
            evaluate_scheduler(fig1, always(fig1, {"A": "a", "B": "b"}), FAST)

    def test_incomplete_decisions_rejected(self, fig1):
        with pytest.raises(SchedulerError):
            evaluate_scheduler(fig1, always(fig1, {"A": "a"}), FAST)

    def test_horizon_mismatch_rejected(self, fig1):
        bad = CylindricalScheduler((0.0, 0.5), (PositionalProfile({"A": "a", "B": "a"}),))
        with pytest.raises(SchedulerError):
            evaluate_scheduler(fig1, bad, FAST)


class TestGain:
    def test_gains_at_horizon(self, fig1):
        snap = {"A": 0.0, "B": 0.0, "C": 1.0}
        assert gain(fig1, snap, "A", "b") == 2.0
        assert gain(fig1, snap, "A", "a") == 0.0

    def test_gains_equal_at_switch(self, fig1):
        res = solve(fig1, "max", FAST)
        t = res.value.switch_points[0]
        snap = {l: res.value.value_at(l, t) for l in fig1.locations}
        assert abs(gain(fig1, snap, "A", "a") - gain(fig1, snap, "A", "b")) <= 1e-6

    def test_constant_snapshot_has_zero_gain(self, fig1):
        snap = {"A": 0.4, "B": 0.4, "C": 0.4}
        assert gain(fig1, snap, "A", "a") == 0.0

    def test_disabled_action_rejected(self, fig1):
        with pytest.raises(ModelError):
            gain(fig1, {"A": 0, "B": 0, "C": 1}, "B", "b")


class TestLocalImprovement:
    def test_race_near_horizon_prefers_direct_jump(self, fig1):
        prof = local_improvement(fig1, {"A": 0.0, "B": 0.0, "C": 1.0}, "max")
        assert prof["A"] == "b"

    def test_race_far_from_horizon_prefers_relay(self, fig1):
        res = solve(fig1, "max", FAST)
        snap = {l: res.value.value_at(l, 0.1) for l in fig1.locations}
        prof = local_improvement(fig1, snap, "max")
        assert prof["A"] == "a"

    def test_single_action_model_immediate(self, fig1):
        m = build_model(
            locations=[("B", "continuous", "reach"), ("C", "continuous", "reach", "goal")],
            rates={("B", "a", "C"): 4.0},
            initial={"B": 1.0},
            time_bound=1.0,
            actions=["a"],
        )
        prof = local_improvement(m, {"B": 0.0, "C": 1.0}, "max")
        assert dict(prof.choice) == {"B": "a"}

    def test_sweep_order_does_not_matter(self, relay_game):
        res = solve(relay_game, "game", FAST)
        snap = {l: res.value.value_at(l, 0.3) for l in relay_game.locations}
        fwd = local_improvement(relay_game, snap, "game", order=list(relay_game.locations))
        rev = local_improvement(relay_game, snap, "game", order=list(reversed(relay_game.locations)))
        assert fwd == rev

    def test_safety_first_equals_reach_first(self, relay_game):
        res = solve(relay_game, "game", FAST)
        snap = {l: res.value.value_at(l, 0.7) for l in relay_game.locations}
        safe_first = [l for l in relay_game.locations if relay_game.owner[l] == "safe"] + \
                     [l for l in relay_game.locations if relay_game.owner[l] == "reach"]
        reach_first = list(reversed(safe_first))
        assert local_improvement(relay_game, snap, "game", order=safe_first) == \
            local_improvement(relay_game, snap, "game", order=reach_first)


class TestCheckNash:
    def test_solve_output_passes(self, relay_game):
        opts = SolveOptions(steps=4000)
        res = solve(relay_game, "game", opts)
        h = relay_game.time_bound / opts.steps
        rep = check_nash(relay_game, res.value, res.scheduler, tol=10 * h)
        assert rep.passed, rep

    def test_flipped_decision_fails(self, relay_game):
        opts = SolveOptions(steps=4000)
        res = solve(relay_game, "game", opts)
        h = relay_game.time_bound / opts.steps
        sched = res.scheduler
        flipped = []
        for prof in sched.decisions:
            d = dict(prof.choice)
            d["R"] = "b" if d["R"] == "a" else "a"  # reachability location
            flipped.append(PositionalProfile(d))
        bad = CylindricalScheduler(sched.breakpoints, tuple(flipped))
        rep = check_nash(relay_game, res.value, bad, tol=10 * h)
        assert not rep.passed
        assert rep.profile_residual > 10 * h

    def test_goal_only_model_trivially_passes(self):
        m = build_model(
            locations=[("G", "continuous", "reach", "goal")],
            rates={},
            initial={"G": 1.0},
            time_bound=1.0,
        )
        res = solve(m, "max", FAST)
        rep = check_nash(m, res.value, res.scheduler, tol=1e-3)
        assert rep.passed
        assert rep.max_residual == 0.0


class TestDomination:
    def test_all_positional_profiles_dominated_on_race(self, fig1):
        vmax = solve(fig1, "max", FAST).value.values
        vmin = solve(fig1, "min", FAST).value.values
        for prof in all_profiles(fig1):
            vals = evaluate_scheduler(fig1, always(fig1, dict(prof.choice)), FAST).values
            assert np.all(vals <= vmax + 1e-5)
            assert np.all(vals >= vmin - 1e-5)

    def test_random_cylindrical_schedulers_dominated(self):
        from corpus import random_scheduler

        rng = np.random.default_rng(77)
        for seed in range(8):
            m = random_model(seed + 300)
            vmax = solve(m, "max", FAST).value.values
            vmin = solve(m, "min", FAST).value.values
            for _ in range(3):
                s = random_scheduler(rng, m)
                vals = evaluate_scheduler(m, s, FAST).values
                assert np.all(vals <= vmax + 1e-5)
                assert np.all(vals >= vmin - 1e-5)


def test_grid_convergence_fourth_order(fig1):
    # total error at t=0 shrinks at least 8x per doubling (away from the
    # switch the integrator is fourth order)
    errs = []
    for steps in (250, 500, 1000):
        res = solve(fig1, "max", SolveOptions(steps=steps))
        errs.append(abs(res.value.values[0, 0] - V_OPT))
    assert errs[1] <= errs[0] / 8.0
    assert errs[2] <= errs[1] / 8.0


def test_switch_points_stable_under_refinement(fig1):
    opts = SolveOptions(steps=4000)
    a = solve(fig1, "max", opts).value.switch_points
    b = solve(fig1, "max", SolveOptions(steps=8000)).value.switch_points
    assert len(a) == len(b) == 1
    assert abs(a[0] - b[0]) <= 10 * opts.switch_tol


def test_scheduler_restriction_merges_intervals(relay_game):
    res = solve(relay_game, "game", SolveOptions(steps=3000))
    safe_locs = [l for l in relay_game.locations if relay_game.owner[l] == "safe"]
    restricted = res.schedulers["safe"]
    assert set().union(*(set(p.choice) for p in restricted.decisions)) <= set(safe_locs)
    for a, b in zip(restricted.decisions, restricted.decisions[1:]):
        assert a != b  # minimality


def test_at_deadline_mode():
    # G leaks back to A: staying in G until the deadline is not guaranteed
    m = build_model(
        locations=[("A", "continuous", "reach"), ("G", "continuous", "reach", "goal")],
        rates={("A", "a", "G"): 2.0, ("G", "a", "A"): 1.0},
        initial={"A": 1.0},
        time_bound=1.0,
        goal_mode="at-deadline",
        actions=["a"],
    )
    res = solve(m, "max", FAST)
    assert res.value.value_at("G", 1.0) == 1.0
    assert res.value.value_at("G", 0.0) < 1.0  # can drift out before the deadline
    # two-state chain: P(in G at deadline) from the explicit solution of the
    # 2x2 generator (stationary mass 2/3 on G, relaxation rate 3)
    assert abs(res.value.value_at("A", 0.0) - (2.0 / 3.0) * (1.0 - math.exp(-3.0))) <= 1e-6
    assert abs(res.value.value_at("G", 0.0) - (1.0 / 3.0) * (2.0 + math.exp(-3.0))) <= 1e-6


def test_discrete_layer_values(discrete_chain):
    res = solve(discrete_chain, "max", FAST)
    # d2 best action x jumps straight to the goal: value 1 at all times
    assert np.all(np.abs(res.value.row("d2") - 1.0) <= 1e-9)
    assert np.all(np.abs(res.value.row("d1") - 1.0) <= 1e-9)
    # c races to d1 at rate 2: value 1 - exp(-2(1-t))
    for t in (0.0, 0.5):
        assert abs(res.value.value_at("c", t) - (1.0 - math.exp(-2.0 * (1.0 - t)))) <= 1e-6
