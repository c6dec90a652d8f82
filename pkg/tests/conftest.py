import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ctmgsolve import build_model, parse_model
from ctmgsolve.samples import RELAY_GAME, TWO_CHOICE_RACE

# Closed forms for the two-choice race (rates 4/2/4, horizon 1), derived by
# solving the piecewise linear equations segment by segment.
T_SWITCH = 1.0 - 0.5 * math.log(2.0)            # 0.6534264097200273
V_OPT = 1.0 + math.exp(-4.0) * (2.0 * math.log(2.0) - 6.0)   # 0.9154970335793553
V_ALWAYS_A = 1.0 - 5.0 * math.exp(-4.0)         # 0.9084218055563291
V_ALWAYS_B = 1.0 - math.exp(-2.0)               # 0.8646647167633873
T_SWITCH_MIN = 0.75
V_MIN = 1.0 - 2.0 * math.exp(-2.5)              # 0.8358302009310397


def fb_curve(t: float) -> float:
    """Value of the single-action relay location B at time t."""
    return 1.0 - math.exp(-4.0 * (1.0 - t))


@pytest.fixture(scope="session")
def fig1():
    return parse_model(TWO_CHOICE_RACE)


@pytest.fixture(scope="session")
def fig1_text():
    return TWO_CHOICE_RACE


@pytest.fixture(scope="session")
def relay_game():
    return parse_model(RELAY_GAME)


@pytest.fixture(scope="session")
def discrete_chain():
    """c -> d1 -> d2 -> c' with two actions at each discrete location."""
    return build_model(
        locations=[
            ("c", "continuous", "reach"),
            ("d1", "discrete", "reach"),
            ("d2", "discrete", "reach"),
            ("cg", "continuous", "reach", "goal"),
        ],
        rates={("c", "go", "d1"): 2.0},
        probs={
            ("d1", "x", "d2"): 1.0,
            ("d1", "y", "d2"): 1.0,
            ("d2", "x", "cg"): 1.0,
            ("d2", "y", "c"): 0.5,
            ("d2", "y", "cg"): 0.5,
        },
        initial={"c": 1.0},
        time_bound=1.0,
        actions=["go", "x", "y"],
    )
