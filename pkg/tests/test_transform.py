import numpy as np
import pytest

from ctmgsolve import (
    MultiPlayerError,
    NotUniformError,
    RateTooLowError,
    SolveOptions,
    build_model,
    enabled_actions,
    enumerate_positional,
    exit_rate,
    solve,
    validate,
)
from ctmgsolve.transform import early_to_late, is_uniform, late_to_early, make_simple, uniformise
from ctmgsolve.errors import CapExceededError

from conftest import V_ALWAYS_A, V_OPT
from corpus import random_model

FAST = SolveOptions(steps=1500)


class TestUniformise:
    def test_default_target_adds_self_loop(self, fig1):
        u = uniformise(fig1)
        assert u.rates[("A", "b", "A")] == 2.0
        assert u.rates[("A", "a", "B")] == 4.0
        assert exit_rate(u, "A", "b") == 4.0
        assert is_uniform(u)
        assert validate(u).ok

    def test_already_uniform_is_fixed_point(self, fig1):
        u = uniformise(fig1)
        assert uniformise(u) == u

    def test_target_below_max_rejected(self, fig1):
        with pytest.raises(RateTooLowError):
            uniformise(fig1, target_rate=3.0)

    def test_larger_target_allowed(self, fig1):
        u = uniformise(fig1, target_rate=6.0)
        assert exit_rate(u, "A", "a") == 6.0
        assert exit_rate(u, "B", "a") == 6.0
        assert validate(u).ok

    def test_values_preserved_on_race(self, fig1):
        before = solve(fig1, "max", FAST)
        after = solve(uniformise(fig1), "max", FAST)
        assert float(np.max(np.abs(before.value.values - after.value.values))) <= 1e-6

    def test_values_preserved_on_corpus(self):
        for seed in range(8):
            m = random_model(seed, max_loc=4)
            u = uniformise(m)
            for objective in ("max", "min"):
                a = solve(m, objective, FAST).value.values
                b = solve(u, objective, FAST).value.values
                assert float(np.max(np.abs(a - b))) <= 1e-6

    def test_values_preserved_on_games(self):
        for seed in range(6):
            m = random_model(seed + 40, max_loc=4, two_player=True)
            u = uniformise(m)
            a = solve(m, "game", FAST).value.values
            b = solve(u, "game", FAST).value.values
            assert float(np.max(np.abs(a - b))) <= 1e-6


class TestEarlyToLate:
    def test_race_structure_gate_plus_copies(self, fig1):
        out, mapping = early_to_late(fig1)
        assert mapping["A"] == "A^d"
        assert out.kind["A^d"] == "discrete"
        assert set(enabled_actions(out, "A^d")) == {"a", "b"}
        assert enabled_actions(out, "A^a") == ("a",)
        assert enabled_actions(out, "A^b") == ("b",)
        # committed copy keeps the original rate row, re-routed to gates
        assert out.rates[("A^a", "a", "B^d")] == 4.0
        assert out.rates[("A^b", "b", "C")] == 2.0  # goal sink kept unsplit
        assert out.initial == {"A^d": 1.0}
        assert validate(out).ok

    def test_no_continuous_location_keeps_a_choice(self):
        for seed in range(10):
            out, _ = early_to_late(random_model(seed))
            for l in out.locations:
                if out.kind[l] == "continuous":
                    assert len(enabled_actions(out, l)) <= 1

    def test_single_action_locations_preserve_values(self, fig1):
        res = solve(fig1, "max", FAST)
        out, mapping = early_to_late(fig1)
        res2 = solve(out, "max", FAST)
        # B has one action: committing on entry loses nothing
        b_orig = res.value.row("B")
        b_gate = res2.value.row(mapping["B"])
        assert float(np.max(np.abs(b_orig - b_gate))) <= 1e-6

    def test_gate_value_is_commitment_optimum(self, fig1):
        # committing on entry to A forfeits the in-sojourn revision: the gate
        # carries the best positional value, strictly below the revising one
        out, mapping = early_to_late(fig1)
        res2 = solve(out, "max", FAST)
        gate0 = float(res2.value.row(mapping["A"])[0])
        _, best_positional = enumerate_positional(fig1, "max", FAST)
        assert abs(gate0 - best_positional) <= 1e-6
        assert abs(best_positional - V_ALWAYS_A) <= 1e-6
        assert gate0 < V_OPT - 5e-3

    def test_gate_values_bounded_by_revising_optimum(self):
        for seed in range(6):
            m = random_model(seed + 10, max_loc=4)
            out, mapping = early_to_late(m)
            up = solve(m, "max", FAST)
            down = solve(m, "min", FAST)
            res2max = solve(out, "max", FAST)
            res2min = solve(out, "min", FAST)
            for l in m.locations:
                g = mapping[l]
                assert float(res2max.value.row(g)[0]) <= float(up.value.row(l)[0]) + 1e-6
                assert float(res2min.value.row(g)[0]) >= float(down.value.row(l)[0]) - 1e-6

    def test_transform_preserves_validity(self):
        for seed in range(10):
            out, _ = early_to_late(random_model(seed + 20))
            assert validate(out).ok


class TestLateToEarly:
    def test_requires_uniform(self, fig1):
        with pytest.raises(NotUniformError):
            late_to_early(fig1)

    def test_uniformised_race(self, fig1):
        u = uniformise(fig1)
        out, mapping = late_to_early(u)
        assert validate(out).ok
        # one fresh discrete decision location per continuous location
        decs = [l for l in out.locations if out.kind[l] == "discrete"]
        conts_with_choice = [l for l in u.locations if u.kind[l] == "continuous" and enabled_actions(u, l)]
        assert len(decs) == len(conts_with_choice)
        for l in out.locations:
            if out.kind[l] == "continuous":
                assert len(enabled_actions(out, l)) <= 1

    def test_values_preserved_after_uniformisation(self, fig1):
        u = uniformise(fig1)
        out, mapping = late_to_early(u)
        a = solve(u, "max", FAST)
        b = solve(out, "max", FAST)
        for l in u.locations:
            assert float(np.max(np.abs(a.value.row(l) - b.value.row(mapping[l])))) <= 1e-6

    def test_values_preserved_on_corpus(self):
        for seed in range(6):
            m = uniformise(random_model(seed + 60, max_loc=4))
            out, mapping = late_to_early(m)
            for objective in ("max", "min"):
                a = solve(m, objective, FAST)
                b = solve(out, objective, FAST)
                for l in m.locations:
                    assert float(np.max(np.abs(a.value.row(l) - b.value.row(mapping[l])))) <= 1e-6

    def test_single_location_uniform_model_exact(self):
        m = build_model(
            locations=[("A", "continuous", "reach"), ("G", "continuous", "reach", "goal")],
            rates={("A", "a", "G"): 3.0},
            initial={"A": 1.0},
            time_bound=1.0,
            actions=["a"],
        )
        out, mapping = late_to_early(m)
        a = solve(m, "max", FAST)
        b = solve(out, "max", FAST)
        assert float(np.max(np.abs(a.value.row("A") - b.value.row("A")))) <= 1e-9


class TestMakeSimple:
    def test_no_discrete_locations_pools_arcs(self, fig1):
        out, mapping = make_simple(fig1)
        assert validate(out).ok
        # each continuous-to-continuous arc turns into a one-step path location
        new_locs = [l for l in out.locations if l not in fig1.locations]
        assert sorted(new_locs) == ["~a~B", "~a~C", "~b~C"]
        assert mapping["~a~B"] == "B"
        res_a = solve(fig1, "max", FAST)
        res_b = solve(out, "max", FAST)
        for l in fig1.locations:
            assert float(np.max(np.abs(res_a.value.row(l) - res_b.value.row(l)))) <= 1e-6

    def test_chain_has_four_compound_actions(self, discrete_chain):
        out, _ = make_simple(discrete_chain)
        compound = [a for a in out.actions if a not in discrete_chain.actions]
        assert len(compound) == 4
        assert compound == [
            "go+d1:x+d2:x",
            "go+d1:x+d2:y",
            "go+d1:y+d2:x",
            "go+d1:y+d2:y",
        ]
        assert validate(out).ok

    def test_no_continuous_to_discrete_transitions(self, discrete_chain):
        out, _ = make_simple(discrete_chain)
        for (l, a, t), r in out.rates.items():
            if r > 0.0:
                assert out.kind[t] == "continuous"

    def test_values_preserved(self, discrete_chain):
        out, mapping = make_simple(discrete_chain)
        for objective in ("max", "min"):
            a = solve(discrete_chain, objective, FAST)
            b = solve(out, objective, FAST)
            for new_l, old_l in mapping.items():
                assert float(np.max(np.abs(b.value.row(new_l) - a.value.row(old_l)))) <= 1e-6, (
                    objective, new_l, old_l)

    def test_values_preserved_on_corpus(self):
        for seed in range(8):
            m = random_model(seed + 80, max_loc=4)
            out, mapping = make_simple(m, cap=2000)
            for objective in ("max", "min"):
                a = solve(m, objective, FAST)
                b = solve(out, objective, FAST)
                for l in m.locations:
                    assert float(np.max(np.abs(b.value.row(l) - a.value.row(l)))) <= 1e-6

    def test_multi_player_rejected(self, relay_game):
        with pytest.raises(MultiPlayerError):
            make_simple(relay_game)

    def test_cap_enforced(self, discrete_chain):
        with pytest.raises(CapExceededError):
            make_simple(discrete_chain, cap=3)
