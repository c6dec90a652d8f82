"""Dense numeric view of a model, shared by the compiled and Python kernels."""

from __future__ import annotations

import numpy as np

from .errors import ModelError
from .model import ABSORBING, CONTINUOUS, REACH, CtmgModel, discrete_depth, enabled_actions


class ModelArrays:
    """Index-based arrays: locations and actions become dense integer ids.

    ``maximize[l]`` is 1 where the optimisation direction at ``l`` is max.
    ``disc_order`` lists discrete location indices by increasing depth so the
    algebraic layer can be resolved in one pass.
    """

    __slots__ = (
        "loc_ids", "act_ids", "loc_index", "act_index", "n_loc", "n_act",
        "is_cont", "is_goal", "maximize", "enabled", "n_enabled",
        "R", "exit_rate", "P", "disc_order", "absorbing", "t_max", "init",
    )

    def __init__(self, model: CtmgModel, objective: str):
        self.loc_ids = list(model.locations)
        self.act_ids = list(model.actions)
        self.loc_index = {l: i for i, l in enumerate(self.loc_ids)}
        self.act_index = {a: i for i, a in enumerate(self.act_ids)}
        L = self.n_loc = len(self.loc_ids)
        A = self.n_act = len(self.act_ids)

        self.is_cont = np.zeros(L, dtype=np.uint8)
        self.is_goal = np.zeros(L, dtype=np.uint8)
        self.maximize = np.zeros(L, dtype=np.uint8)
        for l, lid in enumerate(self.loc_ids):
            self.is_cont[l] = 1 if model.kind[lid] == CONTINUOUS else 0
            self.is_goal[l] = 1 if lid in model.goal else 0
            if objective == "max":
                self.maximize[l] = 1
            elif objective == "min":
                self.maximize[l] = 0
            elif objective == "game":
                self.maximize[l] = 1 if model.owner[lid] == REACH else 0
            else:
                raise ModelError(f"unknown objective {objective!r}")

        self.R = np.zeros((L, A, L), dtype=np.float64)
        self.P = np.zeros((L, A, L), dtype=np.float64)
        for (l, a, t), r in model.rates.items():
            self.R[self.loc_index[l], self.act_index[a], self.loc_index[t]] = r
        for (l, a, t), p in model.probs.items():
            self.P[self.loc_index[l], self.act_index[a], self.loc_index[t]] = p
        self.exit_rate = self.R.sum(axis=2)

        self.enabled = np.zeros((L, A), dtype=np.uint8)
        for l, lid in enumerate(self.loc_ids):
            for a in enabled_actions(model, lid):
                self.enabled[l, self.act_index[a]] = 1
        self.n_enabled = self.enabled.sum(axis=1).astype(np.int32)

        depth = discrete_depth(model)
        disc = [l for l in range(L) if not self.is_cont[l]]
        disc.sort(key=lambda l: (depth[self.loc_ids[l]], l))
        self.disc_order = np.asarray(disc, dtype=np.int32)

        self.absorbing = 1 if model.goal_mode == ABSORBING else 0
        self.t_max = float(model.time_bound)
        self.init = np.zeros(L, dtype=np.float64)
        for l, w in model.initial.items():
            self.init[self.loc_index[l]] = w


def compile_model(model: CtmgModel, objective: str) -> ModelArrays:
    return ModelArrays(model, objective)


def profile_to_row(arrays: ModelArrays, choice: dict[str, str]) -> np.ndarray:
    """Encode a decision map as an int32 row; -1 marks sink locations."""
    row = np.full(arrays.n_loc, -1, dtype=np.int32)
    for lid, aid in choice.items():
        if lid not in arrays.loc_index:
            raise ModelError(f"unknown location id {lid!r}")
        if aid not in arrays.act_index:
            raise ModelError(f"unknown action id {aid!r}")
        l = arrays.loc_index[lid]
        a = arrays.act_index[aid]
        if not arrays.enabled[l, a]:
            raise ModelError(f"action {aid!r} is not enabled at {lid!r}")
        row[l] = a
    for l in range(arrays.n_loc):
        if row[l] < 0 and arrays.n_enabled[l] > 0:
            raise ModelError(f"no decision for location {arrays.loc_ids[l]!r}")
    return row
