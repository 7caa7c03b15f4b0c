"""World construction: rulesets, layouts, and the five-step sampler.

A world is built by (1) drawing a true hypothesis, (2) drawing a false one,
(3) constructing the hidden ruleset from the true hypothesis, (4) spawning
the agent and every entity mentioned by either hypothesis, and (5) flipping
a fair coin to pick which hypothesis the agent gets to see. The coin comes
strictly after layout construction so the initial observation carries no
information about the label.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from random import Random
from typing import Optional

from veriworld.grammar import Hypothesis, SemanticForm, TemplateLibrary, library

GRID_SIZE = 5
DOOR_CELL = (0, 2)  # fixed boundary cell; never holds an item or the block

TRACK_LIMIT = 2.4
ZONE_WIDTH = 0.8

GRAVITY_MULTIPLIERS = {"decreased": 0.5, "increased": 2.0}
WIND_SIGNS = {"left": -1.0, "right": 1.0}
WIND_FORCE = 5.0

RETRY_BUDGET = 100


class SamplingError(RuntimeError):
    """Rejection-sampling retry budget exhausted; carries the seed when known."""


class UnsatisfiableHypothesis(ValueError):
    """No candidate ruleset makes the hypothesis true."""


@dataclass(frozen=True)
class RuleSet:
    """The hidden law of one world: which cause produces which effect."""

    env_id: str
    causal_bindings: dict
    decoy_entities: tuple = ()

    def binding(self, effect: str):
        return self.causal_bindings[effect]


@dataclass(frozen=True)
class GridLayout:
    env_id: str
    agent: tuple
    # ((color, cell, initially_on), ...) for colorswitch, sorted by color
    switches: tuple = ()
    block: Optional[tuple] = None
    # ((item_type, cell), ...) for crafting ground items, sorted by type
    items: tuple = ()
    table: Optional[tuple] = None
    door: Optional[tuple] = None


@dataclass(frozen=True)
class CartpoleLayout:
    env_id: str
    # ((color, lo, hi), ...) sorted by color; non-overlapping intervals
    zones: tuple
    init_state: tuple  # (x, x_dot, theta, theta_dot)


@dataclass(frozen=True)
class WorldInstance:
    env_id: str
    seed: Optional[int]
    ruleset: RuleSet
    layout: object
    visible: Hypothesis
    label: bool
    hidden_true: Hypothesis
    hidden_false: Hypothesis


# -- kind mixes ---------------------------------------------------------------

#: named hypothesis-kind mixes: sequence of (kind, probability)
NAMED_MIXES = {
    "triplet": (("triplet", 1.0),),
    "nontriplet": (("nontriplet", 1.0),),
    "general": (("general", 1.0),),
    "special": (("special", 1.0),),
    # adaptation regime: even split between triplet and everything else
    "even": (("triplet", 0.5), ("nontriplet", 0.5)),
}


def parse_mix(spec) -> tuple:
    """A mix is a name from NAMED_MIXES or 'kind:p,kind:p' with p summing to 1."""
    if not isinstance(spec, str):
        return tuple(spec)
    if spec in NAMED_MIXES:
        return NAMED_MIXES[spec]
    entries = []
    for part in spec.split(","):
        kind, _, prob = part.partition(":")
        entries.append((kind.strip(), float(prob)))
    total = sum(p for _, p in entries)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"mix probabilities sum to {total}, want 1")
    return tuple(entries)


def draw_kind(mix: tuple, rng: Random) -> str:
    u = rng.random()
    acc = 0.0
    for kind, prob in mix:
        acc += prob
        if u < acc:
            return kind
    return mix[-1][0]


def sample_hypothesis(lib: TemplateLibrary, mix: tuple, rng: Random) -> Hypothesis:
    return lib.sample_kind(draw_kind(mix, rng), rng)


# -- rule spaces ----------------------------------------------------------------

def candidate_rulesets(env_id: str) -> list:
    """Every ruleset expressible in an environment, in deterministic order."""
    lib = library(env_id)
    out = []
    if env_id == "colorswitch":
        for color in lib.slot_domains["COLOR"]:
            for pos in lib.slot_domains["ON_OFF_SWITCHSTATE"]:
                out.append(RuleSet(env_id, {"door": (color, pos)}))
    elif env_id == "pushblock":
        for region in lib.slot_domains["PUSHBLOCK_POSITION"]:
            out.append(RuleSet(env_id, {"door": (region,)}))
    elif env_id == "crafting":
        for item in lib.slot_domains["CRAFTING_ITEM"]:
            for made in lib.slot_domains["CREATED_ITEM"]:
                out.append(RuleSet(env_id, {made: (item, "craftingtable", "craft")}))
    elif env_id == "cartpole":
        for color in lib.slot_domains["COLOR"]:
            for mult in lib.slot_domains["MULTIPLIER"]:
                out.append(RuleSet(env_id, {"gravity": (color, GRAVITY_MULTIPLIERS[mult])}))
            for direction in lib.slot_domains["DIRECTION"]:
                out.append(RuleSet(env_id, {"wind": (color, WIND_SIGNS[direction])}))
    else:
        raise ValueError(f"unknown environment {env_id!r}")
    return out


def ruleset_from_hypothesis(form: SemanticForm, rng: Random) -> RuleSet:
    """A ruleset under which the hypothesis is true.

    Hypotheses that fully specify a rule admit exactly one candidate; the
    under-determined ones (negations, independence, missing slots) get a
    consistent rule drawn uniformly at random.
    """
    from veriworld.truth import ground_truth  # lazy: truth builds on world types

    consistent = [r for r in candidate_rulesets(form.env_id) if ground_truth(form, r)]
    if not consistent:
        raise UnsatisfiableHypothesis(f"{form.template_id} with {form.slots}")
    return consistent[rng.randrange(len(consistent))]


def sample_false_hypothesis(lib: TemplateLibrary, ruleset: RuleSet, rng: Random,
                            mix: tuple = NAMED_MIXES["triplet"]) -> Hypothesis:
    """Rejection-sample a hypothesis that evaluates false under the ruleset."""
    from veriworld.truth import ground_truth

    for _ in range(RETRY_BUDGET):
        hyp = sample_hypothesis(lib, mix, rng)
        if not ground_truth(hyp.form, ruleset):
            return hyp
    raise SamplingError(f"no false hypothesis within {RETRY_BUDGET} draws")


# -- entity mentions ----------------------------------------------------------

def mentioned_switch_colors(*forms) -> set:
    return {f.slots["COLOR"] for f in forms if "COLOR" in f.slots}


def mentioned_crafting_items(*forms) -> set:
    return {f.slots["CRAFTING_ITEM"] for f in forms if "CRAFTING_ITEM" in f.slots}


def rule_entities(ruleset: RuleSet) -> set:
    """Entities the hidden rule itself needs present in the world."""
    env = ruleset.env_id
    if env == "colorswitch":
        return {ruleset.binding("door")[0]}
    if env == "pushblock":
        return set()
    if env == "crafting":
        return {cause[0] for cause in ruleset.causal_bindings.values()}
    if env == "cartpole":
        return {cause[0] for cause in ruleset.causal_bindings.values()}
    raise ValueError(env)


# -- layout spawning ----------------------------------------------------------

def _grid_cells(exclude_door: bool) -> list:
    cells = [(r, c) for r in range(GRID_SIZE) for c in range(GRID_SIZE)]
    if exclude_door:
        cells.remove(DOOR_CELL)
    return cells


def _place(rng: Random, count: int, exclude_door: bool) -> list:
    cells = _grid_cells(exclude_door)
    if count > len(cells):
        raise SamplingError(f"cannot place {count} entities on the grid")
    return rng.sample(cells, count)


def spawn_layout(true_h: Hypothesis, false_h: Hypothesis, env_id: str, rng: Random,
                 ruleset: Optional[RuleSet] = None):
    """Spawn the agent plus every entity mentioned by either hypothesis.

    The ruleset's own entities are spawned too, so a world whose true
    hypothesis only partially describes the rule is still verifiable inside
    it. Placement is uniform without collision; the door keeps its fixed
    boundary cell.
    """
    forms = [true_h.form, false_h.form]
    if env_id == "colorswitch":
        colors = mentioned_switch_colors(*forms)
        if ruleset is not None:
            colors |= rule_entities(ruleset)
        colors = sorted(colors)
        spots = _place(rng, 1 + len(colors), exclude_door=True)
        switches = tuple(
            (color, cell, bool(rng.randrange(2)))  # initial position random
            for color, cell in zip(colors, spots[1:])
        )
        return GridLayout(env_id, agent=spots[0], switches=switches, door=DOOR_CELL)
    if env_id == "pushblock":
        spots = _place(rng, 2, exclude_door=True)
        return GridLayout(env_id, agent=spots[0], block=spots[1], door=DOOR_CELL)
    if env_id == "crafting":
        items = mentioned_crafting_items(*forms)
        if ruleset is not None:
            items |= rule_entities(ruleset)
        items = sorted(items)
        spots = _place(rng, 2 + len(items), exclude_door=False)
        ground = tuple((item, cell) for item, cell in zip(items, spots[2:]))
        return GridLayout(env_id, agent=spots[0], table=spots[1], items=ground)
    if env_id == "cartpole":
        colors = mentioned_switch_colors(*forms)
        if ruleset is not None:
            colors |= rule_entities(ruleset)
        zones = []
        for color in sorted(colors):
            for _ in range(RETRY_BUDGET):
                lo = rng.uniform(-TRACK_LIMIT, TRACK_LIMIT - ZONE_WIDTH)
                hi = lo + ZONE_WIDTH
                if all(hi <= zlo or zhi <= lo for _, zlo, zhi in zones):
                    zones.append((color, lo, hi))
                    break
            else:
                raise SamplingError("could not place non-overlapping zones")
        init = tuple(rng.uniform(-0.05, 0.05) for _ in range(4))
        return CartpoleLayout(env_id, zones=tuple(zones), init_state=init)
    raise ValueError(f"unknown environment {env_id!r}")


def _decoys(env_id: str, layout, ruleset: RuleSet) -> tuple:
    causal = rule_entities(ruleset)
    if env_id == "colorswitch":
        return tuple(c for c, _, _ in layout.switches if c not in causal)
    if env_id == "crafting":
        return tuple(i for i, _ in layout.items if i not in causal)
    if env_id == "cartpole":
        return tuple(c for c, _, _ in layout.zones if c not in causal)
    return ()


# -- the five-step sampler ------------------------------------------------------

def sample_world(env_id: str, kind_mix, rng: Random,
                 force_visible: Optional[bool] = None,
                 seed: Optional[int] = None) -> WorldInstance:
    """One fresh world: hypotheses, hidden rule, layout, visible coin.

    `force_visible` pins step 5 without touching the draws of steps 1-4
    (used to assert that the coin changes nothing but tokens and label).
    """
    from veriworld.truth import ground_truth

    lib = library(env_id)
    mix = parse_mix(kind_mix)

    true_h = ruleset = None
    for _ in range(RETRY_BUDGET):
        candidate = sample_hypothesis(lib, mix, rng)
        try:
            ruleset = ruleset_from_hypothesis(candidate.form, rng)
        except UnsatisfiableHypothesis:
            continue
        true_h = candidate
        break
    if true_h is None:
        raise SamplingError(f"no satisfiable true hypothesis (seed={seed})")

    false_h = sample_false_hypothesis(lib, ruleset, rng, mix)
    layout = spawn_layout(true_h, false_h, env_id, rng, ruleset=ruleset)
    ruleset = replace(ruleset, decoy_entities=_decoys(env_id, layout, ruleset))

    coin = bool(rng.randrange(2))  # drawn even when forced, to keep streams aligned
    label = coin if force_visible is None else force_visible
    visible = true_h if label else false_h

    world = WorldInstance(
        env_id=env_id, seed=seed, ruleset=ruleset, layout=layout,
        visible=visible, label=label, hidden_true=true_h, hidden_false=false_h,
    )
    assert ground_truth(true_h.form, ruleset) is True
    assert ground_truth(false_h.form, ruleset) is False
    return world


def mix_seed(base_seed: int, index: int) -> int:
    """Stable per-episode seed derivation (no reliance on hash())."""
    x = (base_seed * 0x9E3779B97F4A7C15 + index * 0xBF58476D1CE4E5B9 + 0x94D049BB133111EB)
    x &= (1 << 63) - 1
    x ^= x >> 31
    return x


def sample_world_seeded(env_id: str, kind_mix, seed: int,
                        force_visible: Optional[bool] = None) -> WorldInstance:
    return sample_world(env_id, kind_mix, Random(seed), force_visible=force_visible, seed=seed)
