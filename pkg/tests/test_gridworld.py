import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veriworld import gridworld as gw
from veriworld.episodes import Episode, observation_length
from veriworld.worlds import DOOR_CELL, sample_world_seeded

from worldbuild import colorswitch_world, crafting_world, pushblock_world


def test_action_spaces():
    assert gw.action_names("colorswitch") == \
        ("up", "down", "left", "right", "toggle", "answer_true", "answer_false")
    assert len(gw.action_names("colorswitch")) == 7
    assert len(gw.action_names("colorswitch", include_stop=True)) == 8
    assert "toggle" not in gw.action_names("pushblock")
    assert {"pickup", "craft"} <= set(gw.action_names("crafting"))


def test_observation_lengths():
    assert gw.observation_length("colorswitch") == 25 * 9 + 25 + 2
    assert gw.observation_length("pushblock") == 25 * 2 + 25 + 2
    assert gw.observation_length("crafting") == 25 * 7 + 25 + 7


def test_reset_shows_switches_and_door():
    w = colorswitch_world(rule=("green", "on"),
                          switches=(("blue", (1, 1), True), ("green", (3, 3), False)))
    state = gw.init_state(w)
    vec = gw.encode(state)
    assert vec.shape == (gw.observation_length("colorswitch"),)
    cells = vec[:225].reshape(25, 9)
    assert cells.sum(axis=1).tolist() == [1.0] * 25  # one-hot everywhere
    occupied = [i for i in range(25) if cells[i, 0] == 0]
    assert occupied == [1 * 5 + 1, 3 * 5 + 3]
    assert not state.door_open  # green is off, rule wants on
    assert vec[250:252].tolist() == [0.0, 1.0]


def test_reset_deterministic(any_env):
    w = sample_world_seeded(any_env, "even", 42)
    a = Episode(w).reset()
    b = Episode(w).reset()
    assert np.array_equal(a.vec, b.vec)
    assert a.tokens == b.tokens


def test_worked_crafting_script_makes_torch():
    # walk to the stick, pick it up, walk to the table, craft
    w = crafting_world(rule=("stick", "torch"))
    ep = Episode(w)
    for action in ("up", "left", "pickup", "down", "right", "down", "right", "craft"):
        ep.step(action)
    assert ep.state.inventory_count("torch") == 1
    assert ep.state.inventory_count("stick") == 1  # ingredients not consumed


def test_craft_requires_location_and_ingredient():
    w = crafting_world(rule=("stick", "torch"))
    ep = Episode(w)
    ep.step("craft")  # not at table, nothing held
    assert ep.state.inventory == ()
    for action in ("up", "left", "pickup"):
        ep.step(action)
    ep.step("craft")  # holding stick but not at table
    assert ep.state.inventory_count("torch") == 0


def test_push_block_against_wall_does_not_move():
    w = pushblock_world(rule="top", block=(0, 4), agent=(1, 4))
    ep = Episode(w)
    ep.step("up")  # push attempt: block would leave the grid
    assert ep.state.block == (0, 4)
    assert ep.state.agent == (1, 4)


def test_push_block_moves_and_door_recomputes():
    w = pushblock_world(rule="top", block=(2, 2), agent=(3, 2))
    ep = Episode(w)
    assert not ep.state.door_open
    ep.step("up")
    assert ep.state.block == (1, 2)
    assert ep.state.agent == (2, 2)
    assert ep.state.door_open  # block entered the top two rows


def test_toggle_decoy_switch_leaves_door_alone():
    w = colorswitch_world(rule=("green", "on"),
                          switches=(("green", (1, 1), True), ("blue", (3, 3), True)),
                          agent=(3, 3))
    ep = Episode(w)
    assert ep.state.door_open
    ep.step("toggle")  # blue is causally inert
    assert ep.state.switch_on("blue") is False
    assert ep.state.door_open


def test_toggle_adjacent_switch():
    w = colorswitch_world(rule=("green", "on"),
                          switches=(("green", (1, 2), False),), agent=(2, 2))
    ep = Episode(w)
    ep.step("toggle")  # green sits one cell up
    assert ep.state.switch_on("green") is True
    assert ep.state.door_open


def test_closed_door_blocks_agent():
    w = colorswitch_world(rule=("green", "on"),
                          switches=(("green", (4, 4), False),), agent=(1, 2))
    ep = Episode(w)
    ep.step("up")  # DOOR_CELL is (0, 2) and the door is closed
    assert ep.state.agent == (1, 2)


def test_moves_clip_at_walls():
    w = crafting_world(rule=("stick", "torch"), agent=(0, 0))
    ep = Episode(w)
    ep.step("up")
    ep.step("left")
    assert ep.state.agent == (0, 0)


def test_unknown_action_rejected():
    w = crafting_world(rule=("stick", "torch"))
    ep = Episode(w)
    with pytest.raises(gw.UnknownAction):
        ep.step("toggle")
    with pytest.raises(gw.UnknownAction):
        ep.step(99)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), steps=st.lists(st.integers(0, 4), max_size=40))
def test_channel_normalization_along_random_walks(seed, steps):
    w = sample_world_seeded("crafting", "even", seed)
    ep = Episode(w)
    classes = 7
    for a in steps:
        name = gw.WORLD_ACTIONS["crafting"][a % len(gw.WORLD_ACTIONS["crafting"])]
        ep.step(name)
        cells = ep.obs.vec[:25 * classes].reshape(25, classes)
        assert cells.sum(axis=1).tolist() == [1.0] * 25
        agent_plane = ep.obs.vec[25 * classes:25 * classes + 25]
        assert agent_plane.sum() == 1.0


def test_causal_soundness_along_random_walks(grid_env):
    rng = random.Random(0)
    for seed in range(40):
        w = sample_world_seeded(grid_env, "even", seed)
        ep = Episode(w)
        for _ in range(60):
            name = gw.WORLD_ACTIONS[grid_env][rng.randrange(len(gw.WORLD_ACTIONS[grid_env]))]
            ep.step(name)
            s = ep.state
            if grid_env == "colorswitch":
                color, pos = w.ruleset.binding("door")
                assert s.door_open == (s.switch_on(color) == (pos == "on"))
            elif grid_env == "pushblock":
                region = w.ruleset.binding("door")[0]
                assert s.door_open == gw.cell_in_region(s.block, region)
            else:
                (made, (ingredient, _, _)), = w.ruleset.causal_bindings.items()
                if s.inventory_count(made) > 0:
                    assert s.inventory_count(ingredient) > 0


def test_bit_identical_trajectories(any_env):
    for seed in (3, 17):
        w = sample_world_seeded(any_env, "even", seed)
        rng = random.Random(99)
        names = gw.WORLD_ACTIONS[any_env] if any_env != "cartpole" else ("left", "right")
        actions = [names[rng.randrange(len(names))] for _ in range(50)]

        def rollout():
            ep = Episode(w)
            out = [ep.obs.vec.copy()]
            for a in actions:
                if ep.done:
                    break
                ep.step(a)
                out.append(ep.obs.vec.copy())
            return out

        first, second = rollout(), rollout()
        assert len(first) == len(second)
        for u, v in zip(first, second):
            assert np.array_equal(u, v)


def test_horizon_terminates_unanswered():
    w = crafting_world(rule=("stick", "torch"))
    ep = Episode(w, horizon=7)
    for _ in range(7):
        _, done, info = ep.step("up")
    assert done and ep.answer is None
    assert info.get("terminated") == "horizon"


def test_answers_terminate_at_t0():
    w = crafting_world(rule=("stick", "torch"))
    ep = Episode(w)
    _, done, _ = ep.step("answer_true")
    assert done and ep.answer is True and ep.correct() is True


def test_ascii_render_smoke(grid_env):
    w = sample_world_seeded(grid_env, "even", 5)
    text = gw.render_ascii(gw.init_state(w))
    assert "@" in text
    assert len(text.splitlines()) >= 5
