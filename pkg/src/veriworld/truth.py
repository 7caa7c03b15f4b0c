"""Hypothesis semantics: condition predicates, the ground-truth function,
and an independent simulation oracle.

ground_truth answers from the hidden ruleset directly. truth_by_simulation
answers the same question the way an agent would have to: by exhaustively
exploring the world's reachable states (gridworlds) or by driving the cart
into the named zone and reading the physics back off the trajectory
(cartpole). The two routes share nothing but the claim structure, so their
agreement is a meaningful check.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from veriworld import cartpole as cp
from veriworld import gridworld as gw
from veriworld.grammar import SemanticForm, library, template_slots
from veriworld.worlds import (
    GRAVITY_MULTIPLIERS,
    RuleSet,
    WIND_SIGNS,
    WorldInstance,
)


class MissingEntityError(KeyError):
    """A predicate references an entity the state does not contain."""


class NonTripletHypothesis(ValueError):
    pass


class SimulationInconclusive(RuntimeError):
    """The oracle could not gather the evidence it needs (for instance the
    pre-condition is unreachable within budget); distinct from False."""


# -- claims --------------------------------------------------------------------

@dataclass(frozen=True)
class Claim:
    """Normalized meaning of a hypothesis, ready to compare against a rule."""

    env_id: str
    kind: str
    args: tuple = ()


def _flip_position(pos: str) -> str:
    return "off" if pos == "on" else "on"


def _opposite_multiplier(mult: str) -> str:
    return "increased" if mult == "decreased" else "decreased"


def _opposite_direction(direction: str) -> str:
    return "right" if direction == "left" else "left"


def build_claim(form: SemanticForm) -> Claim:
    """Map a parsed hypothesis onto its causal claim.

    Negations complement the stated condition (an odd number of 'not's flips
    the switch position); independence statements claim the named entity has
    no causal binding; templates that omit a slot claim only the parts they
    mention.
    """
    env = form.env_id
    lib = library(env)
    template = lib.template_text(form.template_id)
    words = template.split()
    slots = form.slots

    if env == "colorswitch":
        color = slots["COLOR"]
        if "independent" in words:
            return Claim(env, "independent", (color,))
        if "ON_OFF_SWITCHSTATE" not in template_slots(template):
            return Claim(env, "controls", (color,))
        pos = slots["ON_OFF_SWITCHSTATE"]
        if words.count("not") % 2 == 1:
            pos = _flip_position(pos)
        return Claim(env, "door_binding", (color, pos))

    if env == "pushblock":
        region = slots["PUSHBLOCK_POSITION"]
        if "independent" in words:
            return Claim(env, "independent", (region,))
        return Claim(env, "door_region", (region,))

    if env == "crafting":
        fields = {"output": slots["CREATED_ITEM"]}
        if "CRAFTING_ITEM" in slots:
            fields["item"] = slots["CRAFTING_ITEM"]
        if "LOCATION" in slots:
            fields["location"] = slots["LOCATION"]
        if "CRAFTING_ACTION" in slots:
            fields["action"] = slots["CRAFTING_ACTION"]
        kind = "not_recipe" if "not" in words else "recipe"
        return Claim(env, kind, tuple(sorted(fields.items())))

    if env == "cartpole":
        color = slots["COLOR"]
        if "independent" in words:
            if "DIRECTION" in slots:
                return Claim(env, "wind_dir_independent",
                             (color, WIND_SIGNS[slots["DIRECTION"]]))
            if "gravity" in words:
                return Claim(env, "gravity_independent", (color,))
            return Claim(env, "wind_independent", (color,))
        if "opposite" in words:
            if "MULTIPLIER" in slots:
                mult = _opposite_multiplier(slots["MULTIPLIER"])
                return Claim(env, "gravity_zone", (color, GRAVITY_MULTIPLIERS[mult]))
            direction = _opposite_direction(slots["DIRECTION"])
            return Claim(env, "wind_zone", (color, WIND_SIGNS[direction]))
        if "MULTIPLIER" in slots and "not" in words:
            return Claim(env, "gravity_changed_other",
                         (color, GRAVITY_MULTIPLIERS[slots["MULTIPLIER"]]))
        if "MULTIPLIER" in slots:
            return Claim(env, "gravity_zone",
                         (color, GRAVITY_MULTIPLIERS[slots["MULTIPLIER"]]))
        return Claim(env, "wind_zone", (color, WIND_SIGNS[slots["DIRECTION"]]))

    raise ValueError(f"unknown environment {env!r}")


def claim_true(claim: Claim, ruleset: RuleSet) -> bool:
    bindings = ruleset.causal_bindings
    env = claim.env_id

    if env == "colorswitch":
        color, pos = bindings["door"]
        if claim.kind == "door_binding":
            return claim.args == (color, pos)
        if claim.kind == "controls":
            return claim.args[0] == color
        return claim.args[0] != color  # independent

    if env == "pushblock":
        region = bindings["door"][0]
        if claim.kind == "door_region":
            return claim.args[0] == region
        return claim.args[0] != region  # independent

    if env == "crafting":
        (made, (item, location, action)), = bindings.items()
        actual = {"output": made, "item": item, "location": location, "action": action}
        match = all(actual[name] == value for name, value in claim.args)
        return match if claim.kind == "recipe" else not match

    if env == "cartpole":
        (effect, (color, value)), = bindings.items()
        if claim.kind == "gravity_zone":
            return effect == "gravity" and (color, value) == claim.args
        if claim.kind == "wind_zone":
            return effect == "wind" and (color, value) == claim.args
        if claim.kind == "gravity_independent":
            return not (effect == "gravity" and color == claim.args[0])
        if claim.kind == "wind_independent":
            return not (effect == "wind" and color == claim.args[0])
        if claim.kind == "wind_dir_independent":
            return not (effect == "wind" and (color, value) == claim.args)
        if claim.kind == "gravity_changed_other":
            return effect == "gravity" and color == claim.args[0] and value != claim.args[1]

    raise ValueError(f"cannot evaluate {claim}")


def ground_truth(form: SemanticForm, ruleset: RuleSet) -> bool:
    """The ground-truth function: does the world's hidden rule make the
    hypothesis true?"""
    if form.env_id != ruleset.env_id:
        raise ValueError("hypothesis and ruleset belong to different environments")
    return claim_true(build_claim(form), ruleset)


# -- conditions -------------------------------------------------------------------

@dataclass(frozen=True)
class Condition:
    """Boolean predicate over a single world state."""

    env_id: str
    kind: str
    args: tuple = ()


@dataclass(frozen=True)
class ActionSeqPredicate:
    """Boolean predicate over a (state, action) window; None action name
    means the empty predicate that any window satisfies."""

    env_id: str
    action: Optional[str] = None

    def holds(self, actions) -> bool:
        return self.action is None or self.action in actions


def eval_condition(cond: Condition, state) -> bool:
    env = cond.env_id
    if getattr(state, "env_id", "cartpole") != env:
        raise ValueError("condition and state belong to different environments")

    if cond.kind == "switch_at":
        color, pos = cond.args
        try:
            return state.switch_on(color) == (pos == "on")
        except KeyError:
            raise MissingEntityError(f"no {color} switch in state") from None
    if cond.kind == "door_open":
        return bool(state.door_open)
    if cond.kind == "block_in":
        return gw.cell_in_region(state.block, cond.args[0])
    if cond.kind == "has_at":
        item, location = cond.args
        assert location == "craftingtable"
        return state.inventory_count(item) > 0 and state.agent == state.table
    if cond.kind == "has_item":
        return state.inventory_count(cond.args[0]) > 0
    if cond.kind == "in_zone":
        try:
            return state.in_zone(cond.args[0])
        except KeyError:
            raise MissingEntityError(f"no {cond.args[0]} zone in state") from None
    if cond.kind == "gravity_is":
        return state.gravity_multiplier() == cond.args[0]
    if cond.kind == "wind_is":
        return state.wind() == cond.args[0]
    raise ValueError(f"unknown condition kind {cond.kind!r}")


def triplet_conditions(form: SemanticForm):
    """(pre-condition, action predicate, post-condition) of a triplet
    hypothesis."""
    if form.kind != "triplet":
        raise NonTripletHypothesis(form.template_id)
    env = form.env_id
    slots = form.slots
    if env == "colorswitch":
        return (Condition(env, "switch_at", (slots["COLOR"], slots["ON_OFF_SWITCHSTATE"])),
                ActionSeqPredicate(env),
                Condition(env, "door_open"))
    if env == "pushblock":
        return (Condition(env, "block_in", (slots["PUSHBLOCK_POSITION"],)),
                ActionSeqPredicate(env),
                Condition(env, "door_open"))
    if env == "crafting":
        return (Condition(env, "has_at", (slots["CRAFTING_ITEM"], slots["LOCATION"])),
                ActionSeqPredicate(env, slots["CRAFTING_ACTION"]),
                Condition(env, "has_item", (slots["CREATED_ITEM"],)))
    if env == "cartpole":
        pre = Condition(env, "in_zone", (slots["COLOR"],))
        if "MULTIPLIER" in slots:
            post = Condition(env, "gravity_is", (GRAVITY_MULTIPLIERS[slots["MULTIPLIER"]],))
        else:
            post = Condition(env, "wind_is", (WIND_SIGNS[slots["DIRECTION"]],))
        return pre, ActionSeqPredicate(env), post
    raise ValueError(env)


def condition_changed(cond: Condition, window) -> bool:
    """True iff the predicate differs between some consecutive pair of
    states inside the window."""
    states = list(window)
    if not states:
        raise ValueError("empty state window")
    values = [eval_condition(cond, s) for s in states]
    return any(a != b for a, b in zip(values, values[1:]))


# -- simulation oracle ---------------------------------------------------------------

def _claim_entities(claim: Claim) -> tuple:
    """World entities the claim mentions (its pre-condition subjects)."""
    if claim.env_id in ("colorswitch", "cartpole"):
        return (claim.args[0],)
    if claim.env_id == "crafting":
        fields = dict(claim.args)
        return (fields["item"],) if "item" in fields else ()
    return ()


def _spawned_entities(world: WorldInstance) -> tuple:
    if world.env_id == "colorswitch":
        return tuple(c for c, _, _ in world.layout.switches)
    if world.env_id == "crafting":
        return tuple(i for i, _ in world.layout.items)
    if world.env_id == "cartpole":
        return tuple(c for c, _, _ in world.layout.zones)
    return ()


def _canonical(state):
    """Search key: step counter dropped, inventory counts clamped to
    presence (the dynamics only ever test presence, so the clamped graph is
    faithful and finite)."""
    from dataclasses import replace

    inventory = tuple((item, 1) for item, count in state.inventory if count > 0)
    return replace(state, step_count=0, inventory=inventory)


def _explore_grid(world: WorldInstance, budget: int):
    """Breadth-first sweep of the reachable state graph."""
    start = _canonical(gw.init_state(world))
    seen = {start}
    frontier = deque([start])
    expanded = 0
    while frontier:
        state = frontier.popleft()
        expanded += 1
        if expanded > budget:
            raise SimulationInconclusive(f"search budget {budget} exhausted")
        for action in gw.WORLD_ACTIONS[world.env_id]:
            nxt = _canonical(gw.apply_action(state, world.ruleset, action))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


class SimulationOracle:
    """Empirical hypothesis verdicts for one world.

    The reachability sweep (gridworlds) and the per-zone physics probes
    (cartpole) are computed once and shared across every hypothesis asked
    about this world.
    """

    def __init__(self, world: WorldInstance, budget: int = 200_000):
        self.world = world
        self.budget = budget
        self._summary = None
        self._zone_effects = {}

    # -- shared evidence ---------------------------------------------------

    def _grid_summary(self):
        if self._summary is None:
            states = _explore_grid(self.world, self.budget)
            env = self.world.env_id
            if env == "colorswitch":
                doors = {}
                for s in states:
                    doors[tuple((c, on) for c, _, on in s.switches)] = s.door_open
                self._summary = doors
            elif env == "pushblock":
                self._summary = {s.block: s.door_open for s in states}
            elif env == "crafting":
                spawned = set(_spawned_entities(self.world))
                # controlled experiment: craft at the table holding exactly
                # one ingredient and nothing else
                outcomes = {}
                for s in states:
                    if s.agent != s.table or len(s.inventory) != 1:
                        continue
                    (item, _), = s.inventory
                    if item not in spawned:
                        continue
                    after = gw.apply_action(s, self.world.ruleset, "craft")
                    gained = [name for name, count in after.inventory
                              if count > s.inventory_count(name)]
                    outcomes[item] = gained[0] if gained else None
                missing = spawned - outcomes.keys()
                if missing:
                    raise SimulationInconclusive(
                        f"never crafted holding only {sorted(missing)}")
                self._summary = outcomes
        return self._summary

    def _zone_effect(self, color: str):
        if color not in self._zone_effects:
            self._zone_effects[color] = _probe_zone(self.world, color,
                                                    min(self.budget, 400))
        return self._zone_effects[color]

    # -- verdicts ------------------------------------------------------------

    def verdict(self, form: SemanticForm) -> bool:
        claim = build_claim(form)
        spawned = _spawned_entities(self.world)
        for entity in _claim_entities(claim):
            if entity not in spawned:
                raise MissingEntityError(f"{entity} not present in this world")
        env = self.world.env_id
        if env == "colorswitch":
            return self._colorswitch(claim)
        if env == "pushblock":
            return self._pushblock(claim)
        if env == "crafting":
            return self._crafting(claim)
        if env == "cartpole":
            return self._cartpole(claim)
        raise ValueError(env)

    def consistent_rules(self) -> list:
        """Every candidate ruleset that explains all gathered observations.
        The true rule is never eliminated, so unanimity over this set is a
        sound verdict."""
        from veriworld.worlds import candidate_rulesets

        env = self.world.env_id
        summary = self._grid_summary()
        spawned = set(_spawned_entities(self.world))
        rules = []
        for rule in candidate_rulesets(env):
            if env == "colorswitch":
                color, pos = rule.binding("door")
                if color not in spawned:
                    continue
                want = pos == "on"
                ok = all(dict(a)[color] == want if door else dict(a)[color] != want
                         for a, door in summary.items())
            elif env == "pushblock":
                region = rule.binding("door")[0]
                ok = all(gw.cell_in_region(cell, region) == door
                         for cell, door in summary.items())
            else:  # crafting
                (made, (item, _, _)), = rule.causal_bindings.items()
                if item not in spawned:
                    continue
                ok = summary[item] == made
            if ok:
                rules.append(rule)
        return rules

    def _settle(self, claim: Claim) -> bool:
        candidates = self.consistent_rules()
        if not candidates:
            raise SimulationInconclusive("no candidate rule fits the observations")
        outcomes = {claim_true(claim, rule) for rule in candidates}
        if len(outcomes) > 1:
            raise SimulationInconclusive(
                "reachable states cannot distinguish rules "
                + ", ".join(sorted(str(r.causal_bindings) for r in candidates)))
        return outcomes.pop()

    def _colorswitch(self, claim: Claim) -> bool:
        return self._settle(claim)

    def _pushblock(self, claim: Claim) -> bool:
        return self._settle(claim)

    def _crafting(self, claim: Claim) -> bool:
        return self._settle(claim)

    def _cartpole(self, claim: Claim) -> bool:
        effect = self._zone_effect(claim.args[0])
        if claim.kind == "gravity_zone":
            return effect is not None and effect[0] == "gravity" and \
                abs(effect[1] - claim.args[1]) < 1e-6
        if claim.kind == "wind_zone":
            return effect == ("wind", claim.args[1])
        if claim.kind == "gravity_independent":
            return not (effect is not None and effect[0] == "gravity")
        if claim.kind == "wind_independent":
            return not (effect is not None and effect[0] == "wind")
        if claim.kind == "wind_dir_independent":
            return effect != ("wind", claim.args[1])
        if claim.kind == "gravity_changed_other":
            return effect is not None and effect[0] == "gravity" and \
                abs(effect[1] - claim.args[1]) > 1e-6
        raise ValueError(claim)


def _probe_zone(world: WorldInstance, color: str, budget: int):
    """Drive the cart into the colored zone and read the local physics off
    the observed accelerations. Returns ('gravity', multiplier),
    ('wind', direction sign) or None for an inert zone.
    """
    from veriworld.worlds import WIND_FORCE

    state = cp.init_state(world)
    lo, hi = state.zone_of(color)
    target = (lo + hi) / 2.0
    gravity_readings, wind_readings = [], []
    for _ in range(budget):
        action = cp.controller_action(state, target)
        nxt = cp.apply_action(state, action)
        if lo <= state.x <= hi:
            force = cp.FORCE_MAG if action == "right" else -cp.FORCE_MAG
            g_eff, external = cp.infer_forces(state, force, nxt)
            wind_readings.append(external)
            if g_eff is not None:
                gravity_readings.append(g_eff)
        if len(gravity_readings) >= 3 and len(wind_readings) >= 3:
            break
        if cp.fallen(nxt):
            raise SimulationInconclusive("pole fell before the zone was measured")
        state = nxt
    if len(gravity_readings) < 3 or len(wind_readings) < 3:
        raise SimulationInconclusive(f"could not gather zone evidence for {color}")

    tol = 1e-6
    g_ratio = sum(gravity_readings) / len(gravity_readings) / cp.GRAVITY
    wind = sum(wind_readings) / len(wind_readings)
    if any(abs(g / cp.GRAVITY - g_ratio) > tol for g in gravity_readings):
        raise SimulationInconclusive("inconsistent gravity readings")
    if any(abs(w - wind) > tol for w in wind_readings):
        raise SimulationInconclusive("inconsistent wind readings")
    if abs(wind) > tol:
        # report the sign convention rulesets use; magnitude is fixed
        if abs(abs(wind) - WIND_FORCE) > 1e-3:
            raise SimulationInconclusive(f"unexpected wind magnitude {wind}")
        return ("wind", 1.0 if wind > 0 else -1.0)
    if abs(g_ratio - 1.0) > tol:
        return ("gravity", g_ratio)
    return None


def truth_by_simulation(form: SemanticForm, world: WorldInstance,
                        budget: int = 200_000) -> bool:
    """Empirical verdict on a hypothesis, obtained purely by acting in the
    world. Raises SimulationInconclusive when the required experiment is out
    of reach (for instance a wall-stuck pushblock), which is distinct from a
    False verdict."""
    return SimulationOracle(world, budget).verdict(form)
