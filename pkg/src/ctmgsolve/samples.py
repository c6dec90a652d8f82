"""Small built-in models used by the benchmark, docs and tests."""

# Two-choice race: committing to the slow direct jump is best late, the fast
# two-hop route is best early; the optimal policy switches once.
TWO_CHOICE_RACE = """\
ctmg
time-bound 1
location A continuous reach
location B continuous reach
location C continuous reach goal
rate A a B 4
rate A b C 2
rate B a C 4
init A 1
"""

# A small two-player game: the safety player owns the relay location.
RELAY_GAME = """\
ctmg
time-bound 2
location S continuous safe
location R continuous reach
location D discrete reach
location G continuous reach goal
rate S a R 2
rate S b G 1
rate R a G 3
rate R b S 1
rate R b G 1
prob D a R 0.5
prob D a S 0.5
prob D b R 1
init D 1
"""
