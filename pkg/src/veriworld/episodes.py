"""Episode wrapper: one sampled world run as an episodic POMDP.

The wrapper owns action decoding, the answer/stop/horizon bookkeeping, and
the last-K windows of states and observations. It returns observations and
done flags only; reward assignment lives in veriworld.rewards so the same
trajectory can be scored under any reward specification.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from veriworld import cartpole as cp
from veriworld import gridworld as gw
from veriworld.worlds import WorldInstance

DEFAULT_WINDOW = 5
GRID_HORIZON = 100
CARTPOLE_HORIZON = 200


def default_horizon(env_id: str) -> int:
    return CARTPOLE_HORIZON if env_id == "cartpole" else GRID_HORIZON


def action_names(env_id: str, include_stop: bool = False) -> tuple:
    if env_id == "cartpole":
        return cp.action_names(include_stop)
    return gw.action_names(env_id, include_stop)


def observation_length(env_id: str) -> int:
    if env_id == "cartpole":
        return cp.observation_length()
    return gw.observation_length(env_id)


@dataclass(eq=False)
class Observation:
    """Encoded state plus the visible hypothesis token sequence."""

    vec: np.ndarray
    tokens: tuple


class Episode:
    """Deterministic episode over one WorldInstance."""

    def __init__(self, world: WorldInstance, horizon: Optional[int] = None,
                 include_stop: bool = False, window: int = DEFAULT_WINDOW):
        self.world = world
        self.horizon = default_horizon(world.env_id) if horizon is None else horizon
        self.window = window
        self.actions = action_names(world.env_id, include_stop)
        self._action_ids = {name: i for i, name in enumerate(self.actions)}
        self.reset()

    # -- lifecycle -------------------------------------------------------------

    def reset(self) -> Observation:
        world = self.world
        self.state = (cp.init_state(world) if world.env_id == "cartpole"
                      else gw.init_state(world))
        self.obs = self._encode(self.state)
        self.state_window = deque([self.state], maxlen=self.window)
        self.obs_window = deque([self.obs], maxlen=self.window)
        self.action_log = []
        self.state_log = [self.state]
        self.transitions = []  # (state, world action, next state)
        self.done = False
        self.answer: Optional[bool] = None
        self.stopped = False
        self.step_count = 0
        return self.obs

    def _encode(self, state) -> Observation:
        vec = cp.encode(state) if self.world.env_id == "cartpole" else gw.encode(state)
        return Observation(vec, self.world.visible.tokens)

    def action_id(self, name: str) -> int:
        return self._action_ids[name]

    def action_name(self, action) -> str:
        if isinstance(action, str):
            if action not in self._action_ids:
                raise gw.UnknownAction(action)
            return action
        if not 0 <= action < len(self.actions):
            raise gw.UnknownAction(f"action id {action} out of range")
        return self.actions[action]

    def step(self, action) -> tuple:
        """Advance one step. Returns (observation, done, info)."""
        if self.done:
            raise RuntimeError("episode is already done")
        name = self.action_name(action)
        info = {}

        if name == "answer_true" or name == "answer_false":
            self.answer = name == "answer_true"
            self.done = True
        elif name == "stop":
            self.stopped = True
            self.done = True
        else:
            prev = self.state
            if self.world.env_id == "cartpole":
                self.state = cp.apply_action(self.state, name)
                if cp.fallen(self.state):
                    self.done = True
                    info["terminated"] = "fell"
            else:
                self.state = gw.apply_action(self.state, self.world.ruleset, name)
            self.obs = self._encode(self.state)
            self.state_window.append(self.state)
            self.obs_window.append(self.obs)
            self.state_log.append(self.state)
            self.transitions.append((prev, name, self.state))

        self.action_log.append(name)
        self.step_count += 1
        if self.step_count >= self.horizon and not self.done:
            self.done = True
            info["terminated"] = "horizon"
        return self.obs, self.done, info

    # -- convenience views ---------------------------------------------------------

    def window_transitions(self) -> list:
        """Transitions between the states currently inside the last-K window."""
        return self.transitions[-(len(self.state_window) - 1):] if self.transitions else []

    @property
    def label(self) -> bool:
        return self.world.label

    def correct(self) -> Optional[bool]:
        """Whether the episode's answer matches the label; None if unanswered."""
        if self.answer is None:
            return None
        return self.answer == self.label
