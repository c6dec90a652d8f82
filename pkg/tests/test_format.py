import math

import pytest

from ctmgsolve import (
    ArtifactError,
    CylindricalScheduler,
    ModelSemanticError,
    ModelSyntaxError,
    PositionalProfile,
    SolveOptions,
    parse_model,
    read_scheduler_artifact,
    serialize_model,
    solve,
    write_scheduler_artifact,
    write_value_curve,
)
from ctmgsolve.transform import uniformise

from conftest import T_SWITCH
from corpus import random_model


def test_parse_fig1(fig1_text, fig1):
    m = parse_model(fig1_text)
    assert m.locations == ("A", "B", "C")
    assert m.actions == ("a", "b")
    assert m.time_bound == 1.0
    assert m.goal == frozenset({"C"})
    assert m == fig1


def test_round_trip_fig1(fig1):
    assert parse_model(serialize_model(fig1)) == fig1


def test_serialize_idempotent(fig1):
    once = serialize_model(fig1)
    assert serialize_model(parse_model(once)) == once


def test_round_trip_uniformised(fig1):
    u = uniformise(fig1)
    assert parse_model(serialize_model(u)) == u


def test_round_trip_random_models():
    for seed in range(30):
        m = random_model(seed)
        assert parse_model(serialize_model(m)) == m


def test_action_order_preserved_across_round_trip():
    # action z is used only at a discrete location, y only at a continuous one
    text = """ctmg
time-bound 1
location d discrete reach
location c continuous reach
location g continuous reach goal
prob d z c 1
rate c y g 2
init d 1
"""
    m = parse_model(text)
    assert m.actions == ("z", "y")
    assert parse_model(serialize_model(m)).actions == ("z", "y")


def test_fraction_and_decimal_literals():
    text = """ctmg
time-bound 1/2
location c continuous reach
location g continuous reach goal
rate c a g 1/3
rate c a c 2.5
init c 1
"""
    m = parse_model(text)
    assert m.time_bound == 0.5
    assert m.rates[("c", "a", "g")] == pytest.approx(1.0 / 3.0, abs=0)
    # 17 significant digits: the fraction round-trips bit-exactly
    assert "0.33333333333333331" in serialize_model(m)
    assert parse_model(serialize_model(m)) == m


def test_empty_document_is_syntax_error():
    with pytest.raises(ModelSyntaxError):
        parse_model("")


def test_missing_time_bound_is_syntax_error():
    with pytest.raises(ModelSyntaxError):
        parse_model("ctmg\nlocation c continuous reach goal\n")


def test_unknown_directive_is_error():
    with pytest.raises(ModelSyntaxError) as err:
        parse_model("ctmg\ntime-bound 1\nfrobnicate c\n")
    assert err.value.line == 3


def test_rate_on_discrete_is_semantic_error():
    text = """ctmg
time-bound 1
location d discrete reach
location g continuous reach goal
rate d a g 1
prob d a g 1
init d 1
"""
    with pytest.raises(ModelSemanticError) as err:
        parse_model(text)
    assert any(v.code == "RATE_ON_DISCRETE" for v in err.value.report.violations)


def test_prob_on_continuous_is_semantic_error():
    text = """ctmg
time-bound 1
location c continuous reach
location g continuous reach goal
rate c a g 1
prob c a g 1
init c 1
"""
    with pytest.raises(ModelSemanticError) as err:
        parse_model(text)
    assert any(v.code == "PROB_ON_CONTINUOUS" for v in err.value.report.violations)


def test_comments_and_blank_lines_ignored(fig1_text, fig1):
    text = "# header comment\n" + fig1_text.replace("rate A a B 4", "rate A a B 4  # fast hop\n")
    assert parse_model(text) == fig1


def test_parser_rejects_invalid_model():
    text = """ctmg
time-bound 1
location c continuous reach
location g continuous reach goal
rate c a g 1
init c 0.25
"""
    with pytest.raises(ModelSemanticError) as err:
        parse_model(text)
    assert any(v.code == "INIT_SUM" for v in err.value.report.violations)


def test_scheduler_artifact_round_trip_single_interval():
    s = CylindricalScheduler((0.0, 1.0), (PositionalProfile({"A": "b"}),))
    text = write_scheduler_artifact(s)
    assert text == "interval 0 1\nchoose A b\n"
    assert read_scheduler_artifact(text) == s


def test_scheduler_artifact_round_trip_solved(fig1):
    res = solve(fig1, "max", SolveOptions(steps=2000))
    text = write_scheduler_artifact(res.scheduler)
    back = read_scheduler_artifact(text)
    assert back == res.scheduler
    assert len(back.decisions) == 2
    assert abs(back.breakpoints[1] - T_SWITCH) < 1e-4


def test_scheduler_artifact_full_precision(fig1):
    res = solve(fig1, "max", SolveOptions(steps=2000))
    back = read_scheduler_artifact(write_scheduler_artifact(res.scheduler))
    assert back.breakpoints == res.scheduler.breakpoints  # bit-exact


def test_scheduler_artifact_unordered_rejected():
    text = "interval 0 0.5\nchoose A a\ninterval 0.4 1\nchoose A b\n"
    with pytest.raises(ArtifactError):
        read_scheduler_artifact(text)


def test_scheduler_artifact_bad_bounds_rejected():
    with pytest.raises(ArtifactError):
        read_scheduler_artifact("interval 0.5 0.5\nchoose A a\n")
    with pytest.raises(ArtifactError):
        read_scheduler_artifact("choose A a\n")
    with pytest.raises(ArtifactError):
        read_scheduler_artifact("")


def test_value_curve_csv(fig1):
    res = solve(fig1, "max", SolveOptions(steps=500))
    text = write_value_curve(fig1, res.value, include_gains=True)
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["t", "A", "B", "C"]
    assert "gain:A:a" in header and "gain:A:b" in header and "gain:B:a" in header
    times = [float(r.split(",")[0]) for r in lines[1:]]
    assert times == sorted(times)
    assert all(b > a for a, b in zip(times, times[1:]))
    # every switch point appears as an exact row
    for s in res.value.switch_points:
        assert any(t == s for t in times)


def test_value_curve_gain_columns_cross_once(fig1):
    res = solve(fig1, "max", SolveOptions(steps=500))
    text = write_value_curve(fig1, res.value, include_gains=True)
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    ia = header.index("gain:A:a")
    ib = header.index("gain:A:b")
    diffs = []
    for row in lines[1:]:
        cells = row.split(",")
        diffs.append((float(cells[0]), float(cells[ia]) - float(cells[ib])))
    signs = [d > 0 for _, d in diffs if abs(d) > 1e-9]
    crossings = sum(1 for x, y in zip(signs, signs[1:]) if x != y)
    assert crossings == 1
    # the sign change happens at the switch row
    t_star = res.value.switch_points[0]
    below = [d for t, d in diffs if t < t_star - 1e-9]
    above = [d for t, d in diffs if t > t_star + 1e-9]
    assert all(d > 0 for d in below)  # action a better below the switch
    assert all(d < 0 for d in above)
