"""Classic cartpole with colored track zones that modify the physics.

Inside the causal zone the gravity constant is scaled or a constant
horizontal wind force is added; decoy zones change nothing. Integration is
semi-implicit Euler (velocities update before positions) with the
conventional classic-control constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from veriworld.grammar import library
from veriworld.worlds import (
    CartpoleLayout,
    RuleSet,
    TRACK_LIMIT,
    WorldInstance,
)

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
POLE_HALF_LENGTH = 0.5
POLE_MASS_LENGTH = MASS_POLE * POLE_HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12 * 2 * math.pi / 360

N_SEGMENTS = 12  # track discretization for the zone one-hot block

WORLD_ACTIONS = ("left", "right")
ANSWER_ACTIONS = ("answer_true", "answer_false")
STOP_ACTION = "stop"


def action_names(include_stop: bool = False) -> tuple:
    base = WORLD_ACTIONS + ANSWER_ACTIONS
    return base + (STOP_ACTION,) if include_stop else base


@dataclass(frozen=True)
class ZoneEffect:
    kind: str        # "gravity" or "wind"
    color: str
    magnitude: float  # gravity multiplier, or signed wind force

    @classmethod
    def from_ruleset(cls, ruleset: RuleSet) -> "ZoneEffect":
        from veriworld.worlds import WIND_FORCE
        for kind, (color, value) in ruleset.causal_bindings.items():
            if kind == "gravity":
                return cls("gravity", color, value)
            return cls("wind", color, value * WIND_FORCE)
        raise ValueError("ruleset has no zone effect")


@dataclass(frozen=True)
class CartpoleState:
    x: float
    x_dot: float
    theta: float
    theta_dot: float
    zones: tuple            # ((color, lo, hi), ...)
    effect: ZoneEffect      # the causal binding; hidden from observations
    step_count: int = 0

    def zone_of(self, color: str) -> tuple:
        for name, lo, hi in self.zones:
            if name == color:
                return (lo, hi)
        raise KeyError(color)

    def in_zone(self, color: str) -> bool:
        lo, hi = self.zone_of(color)
        return lo <= self.x <= hi

    def gravity_multiplier(self) -> float:
        e = self.effect
        if e.kind == "gravity" and self.inside(e.color):
            return e.magnitude
        return 1.0

    def wind(self) -> float:
        e = self.effect
        if e.kind == "wind" and self.inside(e.color):
            return e.magnitude
        return 0.0

    def inside(self, color: str) -> bool:
        """Zone membership that treats an absent color as outside."""
        try:
            return self.in_zone(color)
        except KeyError:
            return False


def init_state(world: WorldInstance) -> CartpoleState:
    layout: CartpoleLayout = world.layout
    x, x_dot, theta, theta_dot = layout.init_state
    return CartpoleState(x, x_dot, theta, theta_dot, layout.zones,
                         ZoneEffect.from_ruleset(world.ruleset))


def accelerations(state: CartpoleState, force: float) -> tuple:
    """(x_acc, theta_acc) for the given applied horizontal force, with the
    zone modifiers active at the current cart position."""
    g = GRAVITY * state.gravity_multiplier()
    force = force + state.wind()
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = (force + POLE_MASS_LENGTH * state.theta_dot ** 2 * sin_t) / TOTAL_MASS
    theta_acc = (g * sin_t - cos_t * temp) / (
        POLE_HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t ** 2 / TOTAL_MASS))
    x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    return x_acc, theta_acc


def apply_action(state: CartpoleState, action: str) -> CartpoleState:
    if action not in WORLD_ACTIONS:
        raise ValueError(f"{action!r} is not a cartpole world action")
    force = FORCE_MAG if action == "right" else -FORCE_MAG
    x_acc, theta_acc = accelerations(state, force)
    x_dot = state.x_dot + TAU * x_acc
    x = state.x + TAU * x_dot
    theta_dot = state.theta_dot + TAU * theta_acc
    theta = state.theta + TAU * theta_dot
    return replace(state, x=x, x_dot=x_dot, theta=theta, theta_dot=theta_dot,
                   step_count=state.step_count + 1)


def fallen(state: CartpoleState) -> bool:
    return abs(state.theta) > THETA_LIMIT or abs(state.x) > TRACK_LIMIT


# -- observation encoding ---------------------------------------------------------

def observation_length() -> int:
    colors = library("cartpole").slot_domains["COLOR"]
    return 4 + N_SEGMENTS * len(colors) + len(colors)


def encode(state: CartpoleState) -> np.ndarray:
    """Dynamics 4-vector, zone location/color one-hot over track segments,
    and a per-color cart-inside indicator."""
    colors = library("cartpole").slot_domains["COLOR"]
    seg = np.zeros((N_SEGMENTS, len(colors)), dtype=np.float32)
    width = 2 * TRACK_LIMIT / N_SEGMENTS
    for ci, color in enumerate(colors):
        try:
            lo, hi = state.zone_of(color)
        except KeyError:
            continue
        for k in range(N_SEGMENTS):
            mid = -TRACK_LIMIT + (k + 0.5) * width
            if lo <= mid <= hi:
                seg[k, ci] = 1.0
    inside = np.array(
        [1.0 if (state.inside(color)) else 0.0 for color in colors], dtype=np.float32)
    head = np.array([state.x, state.x_dot, state.theta, state.theta_dot], dtype=np.float32)
    return np.concatenate([head, seg.reshape(-1), inside])


# -- inverse dynamics (used by the oracles) -----------------------------------------

def observed_accelerations(state: CartpoleState, next_state: CartpoleState) -> tuple:
    """Recover the accelerations that produced a transition; exact under
    semi-implicit Euler."""
    return ((next_state.x_dot - state.x_dot) / TAU,
            (next_state.theta_dot - state.theta_dot) / TAU)


def infer_forces(state: CartpoleState, action_force: float,
                 next_state: CartpoleState) -> tuple:
    """(effective_gravity, external_force) implied by one observed transition.

    effective_gravity is None when the pole is too close to vertical for the
    gravity term to be identifiable.
    """
    x_acc, theta_acc = observed_accelerations(state, next_state)
    cos_t = math.cos(state.theta)
    sin_t = math.sin(state.theta)
    temp = x_acc + POLE_MASS_LENGTH * theta_acc * cos_t / TOTAL_MASS
    total_force = temp * TOTAL_MASS - POLE_MASS_LENGTH * state.theta_dot ** 2 * sin_t
    external = total_force - action_force
    g_eff = None
    if abs(sin_t) > 1e-3:
        l43 = POLE_HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos_t ** 2 / TOTAL_MASS)
        g_eff = (theta_acc * l43 + cos_t * temp) / sin_t
    return g_eff, external


# -- balance / travel controller ---------------------------------------------------

def controller_action(state: CartpoleState, target_x: Optional[float] = None) -> str:
    """Bang-bang balance controller with an optional travel set point.

    Leaning the pole slightly toward the target makes the balancing pushes
    drift the cart that way.
    """
    lean = 0.0
    if target_x is not None:
        dx = target_x - state.x
        lean = max(-0.09, min(0.09, 0.09 * dx - 0.15 * state.x_dot))
    u = (state.theta - lean) + 0.45 * state.theta_dot
    return "right" if u > 0 else "left"
