"""5x5 grid engine: colorswitch, pushblock, and crafting dynamics.

States are frozen (hashable) so exhaustive search over the reachable state
graph can deduplicate. All dynamics are pure: apply_action returns a new
state and never mutates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from veriworld.grammar import library
from veriworld.worlds import DOOR_CELL, GRID_SIZE, GridLayout, RuleSet, WorldInstance

MOVES = {"up": (-1, 0), "down": (1, 0), "left": (0, -1), "right": (0, 1)}

# action names per environment, answers last so new world actions slot in front
WORLD_ACTIONS = {
    "colorswitch": ("up", "down", "left", "right", "toggle"),
    "pushblock": ("up", "down", "left", "right"),
    "crafting": ("up", "down", "left", "right", "pickup", "craft"),
}
ANSWER_ACTIONS = ("answer_true", "answer_false")
STOP_ACTION = "stop"

REGION_ROWS = {"top": (0, 1), "bottom": (GRID_SIZE - 2, GRID_SIZE - 1)}
REGION_COLS = {"left": (0, 1), "right": (GRID_SIZE - 2, GRID_SIZE - 1)}


class UnknownAction(ValueError):
    pass


def action_names(env_id: str, include_stop: bool = False) -> tuple:
    base = WORLD_ACTIONS[env_id] + ANSWER_ACTIONS
    return base + (STOP_ACTION,) if include_stop else base


def cell_in_region(cell, region: str) -> bool:
    """Region membership: top/bottom are the outer two rows, left/right the
    outer two columns."""
    r, c = cell
    if region in REGION_ROWS:
        return r in REGION_ROWS[region]
    if region in REGION_COLS:
        return c in REGION_COLS[region]
    raise ValueError(f"unknown region {region!r}")


@dataclass(frozen=True)
class GridState:
    env_id: str
    agent: tuple
    switches: tuple = ()       # ((color, cell, on), ...) sorted by color
    block: Optional[tuple] = None
    items: tuple = ()          # ((item, cell), ...) ground items, sorted
    table: Optional[tuple] = None
    inventory: tuple = ()      # ((item, count), ...) sorted
    door_open: Optional[bool] = None
    step_count: int = 0

    def switch_on(self, color: str) -> bool:
        for name, _, on in self.switches:
            if name == color:
                return on
        raise KeyError(color)

    def switch_colors(self) -> tuple:
        return tuple(name for name, _, _ in self.switches)

    def inventory_count(self, item: str) -> int:
        for name, count in self.inventory:
            if name == item:
                return count
        return 0

    def item_at(self, cell) -> Optional[str]:
        for item, where in self.items:
            if where == cell:
                return item
        return None


def _door_open(ruleset: RuleSet, switches: tuple = (), block=None) -> bool:
    cause = ruleset.binding("door")
    if ruleset.env_id == "colorswitch":
        color, pos = cause
        for name, _, on in switches:
            if name == color:
                return on == (pos == "on")
        return False  # bound switch absent: door stays shut
    return cell_in_region(block, cause[0])


def init_state(world: WorldInstance) -> GridState:
    layout: GridLayout = world.layout
    env = world.env_id
    if env == "colorswitch":
        return GridState(
            env, agent=layout.agent, switches=layout.switches,
            door_open=_door_open(world.ruleset, switches=layout.switches))
    if env == "pushblock":
        return GridState(
            env, agent=layout.agent, block=layout.block,
            door_open=_door_open(world.ruleset, block=layout.block))
    if env == "crafting":
        items = tuple(sorted((item, cell) for item, cell in layout.items))
        return GridState(env, agent=layout.agent, items=items, table=layout.table)
    raise ValueError(f"{env} is not a gridworld")


def _move_cell(cell, direction):
    dr, dc = MOVES[direction]
    r, c = cell[0] + dr, cell[1] + dc
    if 0 <= r < GRID_SIZE and 0 <= c < GRID_SIZE:
        return (r, c)
    return None


def _bump_inventory(inventory: tuple, item: str, delta: int = 1) -> tuple:
    counts = dict(inventory)
    counts[item] = counts.get(item, 0) + delta
    return tuple(sorted(counts.items()))


def apply_action(state: GridState, ruleset: RuleSet, action: str) -> GridState:
    """One world-dynamics step. Answer/stop actions are handled by the
    episode wrapper, not here."""
    env = state.env_id
    if action not in WORLD_ACTIONS[env]:
        raise UnknownAction(f"{action!r} not a {env} world action")
    next_state = state

    if action in MOVES:
        dest = _move_cell(state.agent, action)
        if dest is None:
            pass
        elif env == "pushblock" and dest == state.block:
            behind = _move_cell(dest, action)
            if behind is not None and behind != DOOR_CELL:
                door = _door_open(ruleset, block=behind)
                next_state = replace(state, agent=dest, block=behind, door_open=door)
        elif env != "crafting" and dest == DOOR_CELL and not state.door_open:
            pass  # closed door blocks
        else:
            next_state = replace(state, agent=dest)

    elif action == "toggle":
        target = None
        if any(cell == state.agent for _, cell, _ in state.switches):
            target = state.agent
        else:
            for direction in ("up", "down", "left", "right"):
                adj = _move_cell(state.agent, direction)
                if adj is not None and any(cell == adj for _, cell, _ in state.switches):
                    target = adj
                    break
        if target is not None:
            switches = tuple(
                (name, cell, (not on) if cell == target else on)
                for name, cell, on in state.switches)
            door = _door_open(ruleset, switches=switches)
            next_state = replace(state, switches=switches, door_open=door)

    elif action == "pickup":
        item = state.item_at(state.agent)
        if item is not None:
            items = tuple(e for e in state.items if e[1] != state.agent)
            inventory = _bump_inventory(state.inventory, item)
            next_state = replace(state, items=items, inventory=inventory)

    elif action == "craft":
        if state.agent == state.table:
            for made, (ingredient, _, _) in ruleset.causal_bindings.items():
                if state.inventory_count(ingredient) > 0:
                    # ingredients are not consumed
                    next_state = replace(
                        state, inventory=_bump_inventory(state.inventory, made))

    return replace(next_state, step_count=state.step_count + 1)


# -- observation encoding ---------------------------------------------------------

def _cell_classes(env_id: str) -> list:
    lib = library(env_id)
    if env_id == "colorswitch":
        return ["empty"] + [f"switch_{c}_{s}" for c in lib.slot_domains["COLOR"]
                            for s in ("on", "off")]
    if env_id == "pushblock":
        return ["empty", "block"]
    if env_id == "crafting":
        return ["empty"] + list(lib.slot_domains["CRAFTING_ITEM"]) + ["craftingtable"]
    raise ValueError(env_id)


def _inventory_classes(env_id: str) -> list:
    if env_id != "crafting":
        return []
    lib = library(env_id)
    return list(lib.slot_domains["CRAFTING_ITEM"]) + list(lib.slot_domains["CREATED_ITEM"])


def observation_length(env_id: str) -> int:
    n = GRID_SIZE * GRID_SIZE
    length = n * len(_cell_classes(env_id)) + n  # item planes + agent plane
    length += 2 if env_id in ("colorswitch", "pushblock") else 0
    length += len(_inventory_classes(env_id))
    return length


def encode(state: GridState) -> np.ndarray:
    """Per-cell one-hot over entity classes, agent plane, door bits,
    inventory presence bits."""
    classes = _cell_classes(state.env_id)
    index = {name: i for i, name in enumerate(classes)}
    n = GRID_SIZE * GRID_SIZE
    grid = np.zeros((n, len(classes)), dtype=np.float32)
    grid[:, index["empty"]] = 1.0

    def mark(cell, name):
        flat = cell[0] * GRID_SIZE + cell[1]
        grid[flat, index["empty"]] = 0.0
        grid[flat, index[name]] = 1.0

    for color, cell, on in state.switches:
        mark(cell, f"switch_{color}_{'on' if on else 'off'}")
    if state.block is not None:
        mark(state.block, "block")
    for item, cell in state.items:
        mark(cell, item)
    if state.table is not None:
        mark(state.table, "craftingtable")

    agent = np.zeros(n, dtype=np.float32)
    agent[state.agent[0] * GRID_SIZE + state.agent[1]] = 1.0

    parts = [grid.reshape(-1), agent]
    if state.door_open is not None:
        parts.append(np.array([1.0, 0.0] if state.door_open else [0.0, 1.0], dtype=np.float32))
    inv_classes = _inventory_classes(state.env_id)
    if inv_classes:
        parts.append(np.array(
            [1.0 if state.inventory_count(item) > 0 else 0.0 for item in inv_classes],
            dtype=np.float32))
    return np.concatenate(parts)


def render_ascii(state: GridState) -> str:
    """Debug view: agent @, switches by color initial (upper=on), block #,
    items by initial, table T, door D/d (open/closed) drawn on its wall cell."""
    rows = []
    for r in range(GRID_SIZE):
        row = []
        for c in range(GRID_SIZE):
            cell = (r, c)
            ch = "."
            if state.env_id != "crafting" and cell == DOOR_CELL:
                ch = "D" if state.door_open else "d"
            for color, where, on in state.switches:
                if where == cell:
                    ch = color[0].upper() if on else color[0]
            if state.block == cell:
                ch = "#"
            for item, where in state.items:
                if where == cell:
                    ch = item[0]
            if state.table == cell:
                ch = "T"
            if state.agent == cell:
                ch = "@"
            row.append(ch)
        rows.append(" ".join(row))
    if state.env_id == "crafting":
        inv = ", ".join(f"{k}x{v}" for k, v in state.inventory) or "empty"
        rows.append(f"inventory: {inv}")
    return "\n".join(rows)
