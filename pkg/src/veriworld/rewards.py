"""Reward functions.

hyp_reward is the terminal answering reward. pre_reward and pre_post_reward
are the shaping rewards that pay +C at stop when the hypothesis'
pre-condition (resp. both conditions) toggled within the last K states. The
four intrinsic schemes reward changing item state, either any item (i, iii)
or only hypothesis-referenced items (ii, iv), granted at stop (i, ii) or
densely on the transition itself (iii, iv).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from veriworld.grammar import SemanticForm
from veriworld.truth import condition_changed, triplet_conditions

PRETRAIN_C = 10.0
DENSE_C = {"colorswitch": 1.0, "pushblock": 1.0, "crafting": 5.0, "cartpole": 1.0}
END_C = 10.0
DEFAULT_K = 5

KINDS = ("hyp", "pre", "pre_post", "intrinsic_i", "intrinsic_ii",
         "intrinsic_iii", "intrinsic_iv")
ON_STOP = ("pre", "pre_post", "intrinsic_i", "intrinsic_ii")
DENSE = ("intrinsic_iii", "intrinsic_iv")


@dataclass(frozen=True)
class RewardSpec:
    kind: str
    C: float = PRETRAIN_C
    K: int = DEFAULT_K

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reward kind {self.kind!r}")

    @property
    def timing(self) -> str:
        if self.kind == "hyp":
            return "on_answer"
        return "dense" if self.kind in DENSE else "on_stop"

    @property
    def needs_stop(self) -> bool:
        return self.kind != "hyp"


def default_specs(name: str, env_id: str) -> tuple:
    """Reward program for a config name.

    "pretrain" is the per-environment default shaping composite: pre-condition
    reward only for colorswitch, pre + pre+post summed elsewhere.
    """
    if name == "pretrain":
        if env_id == "colorswitch":
            return (RewardSpec("pre"),)
        return (RewardSpec("pre"), RewardSpec("pre_post"))
    if name in ("intrinsic_iii", "intrinsic_iv"):
        return (RewardSpec(name, C=DENSE_C[env_id]),)
    if name in ("intrinsic_i", "intrinsic_ii"):
        return (RewardSpec(name, C=END_C),)
    if name in ("hyp", "pre", "pre_post"):
        return (RewardSpec(name),)
    raise ValueError(f"unknown reward name {name!r}")


# -- the answering reward ------------------------------------------------------------

def hyp_reward(answer: Optional[bool], label: bool) -> float:
    """+1 for the correct answer, -1 for the wrong one, 0 for anything that
    is not an answer."""
    if answer is None:
        return 0.0
    return 1.0 if answer == label else -1.0


# -- shaping rewards --------------------------------------------------------------

def pre_reward(window, form: SemanticForm, action: str,
               C: float = PRETRAIN_C, K: int = DEFAULT_K) -> float:
    """+C at stop iff the pre-condition changed within the last K states."""
    if action != "stop":
        return 0.0
    pre, _, _ = triplet_conditions(form)
    return C if condition_changed(pre, list(window)[-K:]) else 0.0


def pre_post_reward(window, form: SemanticForm, action: str,
                    C: float = PRETRAIN_C, K: int = DEFAULT_K) -> float:
    """+C at stop iff both the pre- and the post-condition changed within
    the last K states."""
    if action != "stop":
        return 0.0
    pre, _, post = triplet_conditions(form)
    states = list(window)[-K:]
    changed = condition_changed(pre, states) and condition_changed(post, states)
    return C if changed else 0.0


# -- intrinsic ablation rewards --------------------------------------------------------

def _referenced_entities(form: SemanticForm) -> set:
    """Entity names a hypothesis mentions (slot values and fixed nouns)."""
    refs = set()
    slots = form.slots
    env = form.env_id
    if env == "colorswitch":
        refs.add(("switch", slots["COLOR"]))
        refs.add(("door",))
    elif env == "pushblock":
        refs.add(("block",))
        refs.add(("door",))
    elif env == "crafting":
        if "CRAFTING_ITEM" in slots:
            refs.add(("item", slots["CRAFTING_ITEM"]))
        refs.add(("item", slots["CREATED_ITEM"]))
    elif env == "cartpole":
        refs.add(("zone", slots["COLOR"]))
    return refs


def _entity_changes(prev, curr) -> set:
    """Which non-agent entities changed state on this transition."""
    changed = set()
    if getattr(prev, "env_id", None) is None:  # cartpole
        if (prev.gravity_multiplier(), prev.wind()) != \
                (curr.gravity_multiplier(), curr.wind()):
            for color, _, _ in prev.zones:
                if prev.inside(color) != curr.inside(color):
                    changed.add(("zone", color))
        return changed
    for (c0, _, on0), (c1, _, on1) in zip(prev.switches, curr.switches):
        if on0 != on1:
            changed.add(("switch", c0))
    if prev.block != curr.block:
        changed.add(("block",))
    if prev.door_open != curr.door_open:
        changed.add(("door",))
    ground0, ground1 = dict(prev.items), dict(curr.items)
    inv0, inv1 = dict(prev.inventory), dict(curr.inventory)
    for item in set(ground0) | set(ground1) | set(inv0) | set(inv1):
        if ground0.get(item) != ground1.get(item) or inv0.get(item, 0) != inv1.get(item, 0):
            changed.add(("item", item))
    return changed


def _windows_changes(window) -> set:
    states = list(window)
    changed = set()
    for prev, curr in zip(states, states[1:]):
        changed |= _entity_changes(prev, curr)
    return changed


def intrinsic_reward(spec: RewardSpec, window, form: SemanticForm,
                     action: Optional[str] = None,
                     transition: Optional[tuple] = None) -> float:
    """The four intrinsic pretraining schemes.

    i/ii: +C at stop iff any item (i) / any hypothesis-referenced item (ii)
    changed state within the window. iii/iv: +C immediately on a transition
    that changes such an item's state.
    """
    scheme = spec.kind
    if scheme in ("intrinsic_i", "intrinsic_ii"):
        if action != "stop":
            return 0.0
        changed = _windows_changes(list(window)[-spec.K:])
    elif scheme in ("intrinsic_iii", "intrinsic_iv"):
        if transition is None:
            return 0.0
        changed = _entity_changes(*transition)
    else:
        raise ValueError(f"{scheme} is not an intrinsic scheme")
    if scheme in ("intrinsic_ii", "intrinsic_iv"):
        changed &= _referenced_entities(form)
    return spec.C if changed else 0.0


# -- scoring a live episode -------------------------------------------------------------

def step_reward(specs, episode, action_name: str, prev_state, prev_window) -> float:
    """Total reward granted for one step under a reward program.

    prev_state/prev_window are the state and last-K window as they were when
    the action was chosen.
    """
    total = 0.0
    form = episode.world.visible.form
    for spec in specs:
        if spec.kind == "hyp":
            if action_name in ("answer_true", "answer_false"):
                total += hyp_reward(action_name == "answer_true", episode.label)
        elif spec.kind == "pre":
            total += pre_reward(prev_window, form, action_name, spec.C, spec.K)
        elif spec.kind == "pre_post":
            total += pre_post_reward(prev_window, form, action_name, spec.C, spec.K)
        elif spec.kind in ("intrinsic_i", "intrinsic_ii"):
            total += intrinsic_reward(spec, prev_window, form, action=action_name)
        else:
            if action_name not in ("answer_true", "answer_false", "stop"):
                total += intrinsic_reward(
                    spec, (), form, transition=(prev_state, episode.state))
    return total
