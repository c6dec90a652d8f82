"""Seeded random models and schedulers for property and acceptance tests."""

from __future__ import annotations

import numpy as np

from ctmgsolve import CylindricalScheduler, PositionalProfile, build_model, enabled_actions


def random_model(
    seed,
    max_loc: int = 5,
    max_act: int = 3,
    rate_hi: float = 10.0,
    t_max_hi: float = 3.0,
    two_player: bool = False,
    p_discrete: float = 0.3,
    max_targets: int = 2,
):
    """A valid absorbing-goal model: the last location is a continuous goal
    sink, discrete locations only reach strictly later ones (acyclic)."""
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    n_loc = int(rng.integers(3, max_loc + 1))
    names = [f"l{i}" for i in range(n_loc - 1)] + ["goal"]

    kinds = {}
    for i, nm in enumerate(names):
        if i == 0 or i == n_loc - 1:
            kinds[nm] = "continuous"
        else:
            kinds[nm] = "discrete" if rng.random() < p_discrete else "continuous"

    owners = {nm: "reach" for nm in names}
    if two_player:
        for nm in names:
            owners[nm] = "reach" if rng.random() < 0.5 else "safe"
        owners[names[0]] = "reach"
        owners[names[1]] = "safe"

    n_act = int(rng.integers(1, max_act + 1))
    actions = [f"a{j}" for j in range(n_act)]
    rates = {}
    probs = {}
    for i, nm in enumerate(names[:-1]):
        chosen = sorted(int(j) for j in rng.choice(n_act, size=int(rng.integers(1, n_act + 1)), replace=False))
        if kinds[nm] == "continuous":
            for j in chosen:
                n_t = int(rng.integers(1, max_targets + 1))
                tg = rng.choice(n_loc, size=min(n_t, n_loc), replace=False)
                for t in sorted(int(x) for x in tg):
                    rates[(nm, actions[j], names[t])] = round(float(rng.uniform(0.3, rate_hi)), 3)
        else:
            pool = sorted(
                {k for k in range(i + 1, n_loc)} | {k for k, nm2 in enumerate(names) if kinds[nm2] == "continuous"}
            )
            pool = [k for k in pool if names[k] != nm]
            for j in chosen:
                n_t = int(rng.integers(1, min(max_targets, len(pool)) + 1))
                idx = sorted(int(x) for x in rng.choice(len(pool), size=n_t, replace=False))
                ws = rng.uniform(0.1, 1.0, size=n_t)
                ws = ws / ws.sum()
                acc = 0.0
                for q, k in enumerate(idx):
                    p = float(ws[q]) if q < n_t - 1 else 1.0 - acc
                    probs[(nm, actions[j], names[pool[k]])] = p
                    acc += float(ws[q])

    used = {a for (_, a, _) in rates} | {a for (_, a, _) in probs}
    actions = [a for a in actions if a in used]

    locations = []
    for nm in names:
        entry = (nm, kinds[nm], owners[nm])
        if nm == "goal":
            entry = (nm, kinds[nm], owners[nm], "goal")
        locations.append(entry)

    # initial mass on the first location, occasionally split with a second one
    initial = {names[0]: 1.0}
    if n_loc > 3 and rng.random() < 0.3:
        w = round(float(rng.uniform(0.2, 0.8)), 6)
        initial = {names[0]: w, names[1]: 1.0 - w}

    return build_model(
        locations=locations,
        rates=rates,
        probs=probs,
        initial=initial,
        time_bound=round(float(rng.uniform(0.4, t_max_hi)), 3),
        goal_mode="absorbing",
        actions=actions,
    )


def random_profile(rng, model) -> PositionalProfile:
    choice = {}
    for l in model.locations:
        acts = enabled_actions(model, l)
        if acts:
            choice[l] = acts[int(rng.integers(0, len(acts)))]
    return PositionalProfile(choice)


def random_scheduler(rng, model, max_intervals: int = 3) -> CylindricalScheduler:
    t_max = model.time_bound
    k = int(rng.integers(1, max_intervals + 1))
    cuts = sorted(set(round(float(x), 6) for x in rng.uniform(0.05, 0.95, size=k - 1) * t_max))
    cuts = [c for c in cuts if 0.0 < c < t_max]
    bps = tuple([0.0] + cuts + [t_max])
    decisions = tuple(random_profile(rng, model) for _ in range(len(bps) - 1))
    return CylindricalScheduler(bps, decisions)


def all_profiles(model):
    """Every deterministic positional profile, in action order."""
    import itertools

    slots = [l for l in model.locations if enabled_actions(model, l)]
    choices = [enabled_actions(model, l) for l in slots]
    for combo in itertools.product(*choices):
        yield PositionalProfile(dict(zip(slots, combo)))
