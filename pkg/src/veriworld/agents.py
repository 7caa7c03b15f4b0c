"""Scripted agents: the oracle predictor, a planning oracle policy, and the
chance baselines (random actions, answer immediately).

The oracle machinery is built on rule elimination. Starting from every rule
expressible over the world's spawned entities, each observed state or
transition discards the rules it contradicts; the true rule is never
discarded, so whenever the survivors agree on the hypothesis the verdict is
sound. The predictor applies this to the last-K window only; the policy
keeps episode-long evidence and plans actions that split the surviving
rules.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from random import Random
from typing import Optional

from veriworld import cartpole as cp
from veriworld import gridworld as gw
from veriworld.episodes import Episode
from veriworld.grammar import SemanticForm
from veriworld.truth import build_claim, claim_true
from veriworld.worlds import DOOR_CELL, GRID_SIZE, WorldInstance, candidate_rulesets

CARTPOLE_MIN_READINGS = 3  # in-zone acceleration readings before answering
_TOL = 1e-6


@dataclass(frozen=True)
class AgentVerdict:
    """Answer plus the evidence that produced it; answer None means unknown."""

    answer: Optional[bool]
    basis: tuple = ()

    def __post_init__(self):
        if self.answer is not None and not self.basis:
            raise ValueError("a non-unknown verdict needs a non-empty basis")

    @property
    def known(self) -> bool:
        return self.answer is not None


UNKNOWN = AgentVerdict(None)


# -- rule elimination ----------------------------------------------------------------

class RuleFilter:
    """Tracks which candidate rules remain consistent with the evidence."""

    def __init__(self, world: WorldInstance):
        self.world = world
        self.env_id = world.env_id
        spawned = self._spawned()
        self.rules = []
        for rule in candidate_rulesets(self.env_id):
            subject = next(iter(rule.causal_bindings.values()))[0]
            if self.env_id == "pushblock" or subject in spawned:
                self.rules.append(rule)
        self.informative_readings = 0

    def _spawned(self) -> set:
        layout = self.world.layout
        if self.env_id == "colorswitch":
            return {c for c, _, _ in layout.switches}
        if self.env_id == "crafting":
            return {i for i, _ in layout.items}
        if self.env_id == "cartpole":
            return {c for c, _, _ in layout.zones}
        return set()

    def observe_state(self, state) -> None:
        if self.env_id == "colorswitch":
            self.rules = [r for r in self.rules if self._cs_fits(r, state)]
        elif self.env_id == "pushblock":
            self.rules = [r for r in self.rules if self._pb_fits(r, state)]

    def observe_transition(self, state, action: str, next_state) -> None:
        self.observe_state(state)
        self.observe_state(next_state)
        if self.env_id == "crafting" and action == "craft":
            self.rules = [r for r in self.rules
                          if self._craft_fits(r, state, next_state)]
        elif self.env_id == "cartpole" and action in cp.WORLD_ACTIONS:
            force = cp.FORCE_MAG if action == "right" else -cp.FORCE_MAG
            g_eff, external = cp.infer_forces(state, force, next_state)
            self.rules = [r for r in self.rules
                          if self._zone_fits(r, state, g_eff, external)]
            if g_eff is not None and any(state.inside(c) for c, _, _ in state.zones):
                self.informative_readings += 1

    @staticmethod
    def _cs_fits(rule, state) -> bool:
        color, pos = rule.binding("door")
        return state.door_open == (state.switch_on(color) == (pos == "on"))

    @staticmethod
    def _pb_fits(rule, state) -> bool:
        return state.door_open == gw.cell_in_region(state.block, rule.binding("door")[0])

    @staticmethod
    def _craft_fits(rule, state, next_state) -> bool:
        if state.agent != state.table:
            return True
        (made, (ingredient, _, _)), = rule.causal_bindings.items()
        expected = made if state.inventory_count(ingredient) > 0 else None
        gained = [name for name, count in next_state.inventory
                  if count > state.inventory_count(name)]
        return (gained[0] if gained else None) == expected

    @staticmethod
    def _zone_fits(rule, state, g_eff, external) -> bool:
        (effect, (color, value)), = rule.causal_bindings.items()
        inside = state.inside(color)
        g_pred = cp.GRAVITY * (value if effect == "gravity" and inside else 1.0)
        from veriworld.worlds import WIND_FORCE
        wind_pred = value * WIND_FORCE if effect == "wind" and inside else 0.0
        if abs(external - wind_pred) > _TOL:
            return False
        return g_eff is None or abs(g_eff - g_pred) <= _TOL * cp.GRAVITY

    def verdict(self, form: SemanticForm) -> AgentVerdict:
        """Settled iff every surviving rule gives the hypothesis the same
        truth value."""
        if not self.rules:
            return UNKNOWN
        claim = build_claim(form)
        outcomes = {claim_true(claim, r) for r in self.rules}
        if len(outcomes) != 1:
            return UNKNOWN
        basis = tuple(f"consistent rule {r.causal_bindings}" for r in self.rules)
        return AgentVerdict(outcomes.pop(), basis)

    def best_guess(self, form: SemanticForm) -> bool:
        """Majority truth value among survivors; ties answer true."""
        claim = build_claim(form)
        votes = [claim_true(claim, r) for r in self.rules]
        return votes.count(True) >= votes.count(False)


def oracle_predictor(states, actions, form: SemanticForm,
                     world: WorldInstance) -> AgentVerdict:
    """Answer from a (state, action) window alone; unknown unless the window
    contains evidence that settles the hypothesis.

    `states` is the last-K state window and `actions` the world actions
    between them (len(actions) == len(states) - 1).
    """
    flt = RuleFilter(world)
    states = list(states)
    actions = list(actions)
    if len(actions) != len(states) - 1:
        raise ValueError("window must interleave K states with K-1 actions")
    for s in states:
        flt.observe_state(s)
    for s, a, s2 in zip(states, actions, states[1:]):
        flt.observe_transition(s, a, s2)
    if world.env_id == "cartpole" and flt.informative_readings < CARTPOLE_MIN_READINGS:
        return UNKNOWN
    return flt.verdict(form)


# -- path and push planning ------------------------------------------------------------

def _grid_path(start, goal, avoid=()) -> Optional[list]:
    """Shortest move sequence between cells; None if unreachable."""
    if start == goal:
        return []
    frontier = deque([start])
    came = {start: None}
    while frontier:
        cell = frontier.popleft()
        for action, (dr, dc) in gw.MOVES.items():
            nxt = (cell[0] + dr, cell[1] + dc)
            if not (0 <= nxt[0] < GRID_SIZE and 0 <= nxt[1] < GRID_SIZE):
                continue
            if nxt in avoid or nxt in came:
                continue
            came[nxt] = (cell, action)
            if nxt == goal:
                path = []
                while came[nxt] is not None:
                    nxt, action = came[nxt]
                    path.append(action)
                return path[::-1]
            frontier.append(nxt)
    return None


def _push_search(state, ruleset):
    """All reachable (agent, block) placements with the action sequences
    reaching them."""
    start = (state.agent, state.block)
    plans = {start: []}
    frontier = deque([state])
    while frontier:
        s = frontier.popleft()
        base = plans[(s.agent, s.block)]
        for action in gw.WORLD_ACTIONS["pushblock"]:
            nxt = gw.apply_action(s, ruleset, action)
            key = (nxt.agent, nxt.block)
            if key not in plans:
                plans[key] = base + [action]
                frontier.append(nxt)
    return plans


# -- agents ---------------------------------------------------------------------

class Agent:
    """Per-episode scripted controller."""

    name = "agent"

    def begin(self, episode: Episode, rng: Random) -> None:
        raise NotImplementedError

    def act(self, episode: Episode) -> str:
        raise NotImplementedError

    def info(self) -> dict:
        return {}


class RandomAgent(Agent):
    """Uniform over the full action set, answers included."""

    name = "random"

    def begin(self, episode, rng):
        self.rng = rng

    def act(self, episode):
        return episode.actions[self.rng.randrange(len(episode.actions))]


class NoActAgent(Agent):
    """Stops at t=0: with nothing observed there is no evidence, so the
    answer is a fair coin."""

    name = "no_act"

    def begin(self, episode, rng):
        self.rng = rng

    def act(self, episode):
        return "answer_true" if self.rng.randrange(2) else "answer_false"


class OracleAgent(Agent):
    """Plans experiments that settle the visible hypothesis, then answers.

    The answer comes from the windowed oracle predictor when it is settled,
    falling back to the episode-long evidence; if even that cannot settle
    (for instance a wall-stuck pushblock) the agent flags the episode
    infeasible and answers its best inference.
    """

    name = "oracle"

    def begin(self, episode, rng):
        self.rng = rng
        self.filter = RuleFilter(episode.world)
        self.filter.observe_state(episode.state)
        self._synced = 0
        self.plan = deque()
        self.infeasible = False
        self._experiments = None
        self._toggled = False

    def info(self):
        return {"infeasible": self.infeasible}

    def _sync(self, episode):
        while self._synced < len(episode.transitions):
            self.filter.observe_transition(*episode.transitions[self._synced])
            self._synced += 1

    def _answer(self, episode, settled: bool) -> str:
        if settled:
            verdict = oracle_predictor(
                list(episode.state_window), [a for _, a, _ in episode.window_transitions()],
                episode.world.visible.form, episode.world)
            answer = verdict.answer
            if answer is None:
                answer = self.filter.verdict(episode.world.visible.form).answer
        else:
            self.infeasible = True
            answer = self.filter.best_guess(episode.world.visible.form)
        return "answer_true" if answer else "answer_false"

    def act(self, episode):
        self._sync(episode)
        form = episode.world.visible.form
        env = episode.world.env_id
        if env == "colorswitch":
            return self._act_colorswitch(episode, form)
        if env == "pushblock":
            return self._act_pushblock(episode, form)
        if env == "crafting":
            return self._act_crafting(episode, form)
        return self._act_cartpole(episode, form)

    # colorswitch: toggling the claimed switch once settles every claim
    def _act_colorswitch(self, episode, form):
        if self.filter.verdict(form).known and self._toggled:
            return self._answer(episode, settled=True)
        if self.plan:
            return self.plan.popleft()
        if self._toggled:  # evidence gathered but unsettled: should not happen
            return self._answer(episode, settled=self.filter.verdict(form).known)
        color = build_claim(form).args[0]
        target = next(cell for c, cell, _ in episode.state.switches if c == color)
        path = _grid_path(episode.state.agent, target, avoid=(DOOR_CELL,))
        self.plan.extend(path + ["toggle"])
        self._toggled = True
        return self.plan.popleft()

    # pushblock: push the block to cells that split the surviving rules
    def _act_pushblock(self, episode, form):
        verdict = self.filter.verdict(form)
        if verdict.known:
            return self._answer(episode, settled=True)
        if self.plan:
            return self.plan.popleft()
        plans = _push_search(episode.state, episode.world.ruleset)
        regions = [r.binding("door")[0] for r in self.filter.rules]
        informative = []
        for (agent, block), actions in plans.items():
            memberships = {gw.cell_in_region(block, region) for region in regions}
            if len(memberships) > 1:
                informative.append((len(actions), actions))
        if not informative:
            return self._answer(episode, settled=False)
        self.plan.extend(min(informative)[1])
        return self.plan.popleft()

    # crafting: run the recipe with exactly the candidate ingredient held
    def _act_crafting(self, episode, form):
        if self.filter.verdict(form).known:
            return self._answer(episode, settled=True)
        if self.plan:
            return self.plan.popleft()
        if self._experiments is None:
            claim = build_claim(form)
            fields = dict(claim.args)
            spawned = sorted(i for i, _ in episode.world.layout.items)
            self._experiments = deque(
                [fields["item"]] if "item" in fields else spawned)
        if not self._experiments:
            return self._answer(episode, settled=self.filter.verdict(form).known)
        item = self._experiments.popleft()
        state = episode.state
        item_cell = next(cell for name, cell in state.items if name == item)
        to_item = _grid_path(state.agent, item_cell)
        to_table = _grid_path(item_cell, state.table)
        self.plan.extend(to_item + ["pickup"] + to_table + ["craft"])
        return self.plan.popleft()

    # cartpole: ride into the claimed zone and read the physics
    def _act_cartpole(self, episode, form):
        settled = (self.filter.verdict(form).known
                   and self.filter.informative_readings >= CARTPOLE_MIN_READINGS)
        if settled:
            return self._answer(episode, settled=True)
        if episode.step_count >= episode.horizon - 2:
            return self._answer(episode, settled=False)
        color = build_claim(form).args[0]
        lo, hi = episode.state.zone_of(color)
        return cp.controller_action(episode.state, (lo + hi) / 2.0)


AGENTS = {"random": RandomAgent, "no_act": NoActAgent, "oracle": OracleAgent}


def make_agent(name: str) -> Agent:
    try:
        return AGENTS[name]()
    except KeyError:
        raise ValueError(f"unknown agent {name!r}; choose from {sorted(AGENTS)}") from None
