import math

import numpy as np

from veriworld import cartpole as cp
from veriworld.episodes import Episode
from veriworld.worlds import sample_world_seeded

from worldbuild import cartpole_world


def reference_step(state, force, gravity=9.8, wind=0.0):
    """Independent transcription of the classic cartpole equations with
    semi-implicit Euler integration (velocities first)."""
    x, x_dot, theta, theta_dot = state
    masspole, masscart, length, tau = 0.1, 1.0, 0.5, 0.02
    total_mass = masspole + masscart
    polemass_length = masspole * length
    f = force + wind
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    temp = (f + polemass_length * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (gravity * sin_t - cos_t * temp) / (
        length * (4.0 / 3.0 - masspole * cos_t * cos_t / total_mass))
    x_acc = temp - polemass_length * theta_acc * cos_t / total_mass
    x_dot = x_dot + tau * x_acc
    x = x + tau * x_dot
    theta_dot = theta_dot + tau * theta_acc
    theta = theta + tau * theta_dot
    return (x, x_dot, theta, theta_dot)


def wide_track_world(**kwargs):
    # park the zones far away so the reference trajectory never enters one
    return cartpole_world(zones=(("green", 1.6, 2.4), ("blue", -2.4, -1.6)),
                          init=(0.01, -0.02, 0.015, 0.03), **kwargs)


def test_zone_free_trajectory_matches_reference():
    w = wide_track_world(rule=("green", "gravity", 2.0))
    state = cp.init_state(w)
    ref = w.layout.init_state
    for step in range(200):
        action = cp.controller_action(state, None)  # stay balanced for 200 steps
        force = cp.FORCE_MAG if action == "right" else -cp.FORCE_MAG
        ref = reference_step(ref, force)
        state = cp.apply_action(state, action)
        assert not cp.fallen(state)
        for got, want in zip((state.x, state.x_dot, state.theta, state.theta_dot), ref):
            assert abs(got - want) <= 1e-9


def test_double_gravity_doubles_g_term():
    w = cartpole_world(rule=("green", "gravity", 2.0),
                       zones=(("green", -0.4, 0.4),), init=(0.0, 0.0, 0.05, 0.0))
    inside = cp.init_state(w)
    assert inside.gravity_multiplier() == 2.0
    # with no applied force and no pole velocity the angular acceleration is
    # exactly linear in g
    _, acc_double = cp.accelerations(inside, 0.0)
    outside = cp.CartpoleState(2.0, 0.0, 0.05, 0.0, inside.zones, inside.effect)
    _, acc_normal = cp.accelerations(outside, 0.0)
    assert acc_double == 2.0 * acc_normal
    # and with a force, the difference is exactly the doubled gravity term
    _, acc_double_f = cp.accelerations(inside, 10.0)
    _, acc_normal_f = cp.accelerations(outside, 10.0)
    l43 = cp.POLE_HALF_LENGTH * (4.0 / 3.0 - cp.MASS_POLE * math.cos(0.05) ** 2 / cp.TOTAL_MASS)
    g_term = cp.GRAVITY * math.sin(0.05) / l43
    assert abs((acc_double_f - acc_normal_f) - g_term) < 1e-12


def test_gravity_multiplier_one_is_identity():
    w_plain = wide_track_world(rule=("green", "gravity", 2.0))
    w_unit = cartpole_world(rule=("green", "gravity", 1.0),
                            zones=(("green", -0.4, 0.4),), init=(0.0, 0.0, 0.02, 0.0))
    state = cp.init_state(w_unit)
    assert state.gravity_multiplier() == 1.0
    ref = (0.0, 0.0, 0.02, 0.0)
    for _ in range(100):
        state = cp.apply_action(state, "left")
        ref = reference_step(ref, -cp.FORCE_MAG)
    for got, want in zip((state.x, state.x_dot, state.theta, state.theta_dot), ref):
        assert abs(got - want) <= 1e-9


def test_wind_adds_to_applied_force():
    # ruleset stores the direction sign; the physics applies the 5.0 N unit
    w = cartpole_world(rule=("green", "wind", 1.0), zones=(("green", -0.4, 0.4),),
                       init=(0.0, 0.0, 0.02, 0.0))
    inside = cp.init_state(w)
    assert inside.wind() == 5.0
    # wind-right with action=left: net force is w - F
    got = cp.accelerations(inside, -cp.FORCE_MAG)
    outside = cp.CartpoleState(2.0, 0.0, 0.02, 0.0, inside.zones, inside.effect)
    want = cp.accelerations(outside, 5.0 - cp.FORCE_MAG)
    assert got == want


def test_decoy_zone_changes_nothing():
    # trajectories that only enter the decoy zone match the no-zone closed form
    w = cartpole_world(rule=("green", "gravity", 0.5),
                       zones=(("green", 1.6, 2.4), ("blue", -0.6, 0.2)),
                       init=(0.0, 0.0, 0.01, -0.01))
    state = cp.init_state(w)
    ref = w.layout.init_state
    entered_decoy = False
    for _ in range(150):
        action = cp.controller_action(state, target_x=-0.2)
        force = cp.FORCE_MAG if action == "right" else -cp.FORCE_MAG
        entered_decoy = entered_decoy or state.inside("blue")
        assert not state.inside("green")
        state = cp.apply_action(state, action)
        ref = reference_step(ref, force)
        for got, want in zip((state.x, state.x_dot, state.theta, state.theta_dot), ref):
            assert abs(got - want) <= 1e-9
    assert entered_decoy


def test_outside_zone_residual_zero():
    # outside every zone, a step is bit-identical to the same step with the
    # zone machinery absent
    from dataclasses import replace
    for seed in range(20):
        w = sample_world_seeded("cartpole", "even", seed)
        state = cp.init_state(w)
        for _ in range(50):
            action = cp.controller_action(state, None)
            nxt = cp.apply_action(state, action)
            if not any(state.inside(c) for c, _, _ in state.zones):
                bare = replace(state, zones=())
                plain = cp.apply_action(bare, action)
                assert (plain.x, plain.x_dot, plain.theta, plain.theta_dot) == \
                    (nxt.x, nxt.x_dot, nxt.theta, nxt.theta_dot)
            state = nxt
            if cp.fallen(state):
                break


def test_observation_layout():
    w = cartpole_world(rule=("green", "gravity", 2.0),
                       zones=(("green", 1.2, 2.0), ("blue", -2.0, -1.2)),
                       init=(0.1, -0.2, 0.03, 0.4))
    state = cp.init_state(w)
    vec = cp.encode(state)
    assert vec.shape == (cp.observation_length(),)
    assert np.allclose(vec[:4], [0.1, -0.2, 0.03, 0.4])
    seg = vec[4:4 + 48].reshape(12, 4)
    # colors order: blue red green black -> zone bits only in columns 0 and 2
    assert seg[:, 1].sum() == 0 and seg[:, 3].sum() == 0
    assert seg[:, 0].sum() == 2 and seg[:, 2].sum() == 2
    inside = vec[4 + 48:]
    assert inside.tolist() == [0.0, 0.0, 0.0, 0.0]  # cart at 0.1 is outside both


def test_in_zone_indicator():
    w = cartpole_world(rule=("green", "gravity", 2.0),
                       zones=(("green", -0.2, 0.6),), init=(0.0, 0.0, 0.0, 0.0))
    state = cp.init_state(w)
    vec = cp.encode(state)
    assert vec[4 + 48 + 2] == 1.0  # green indicator set


def test_pole_fall_terminates_episode():
    w = cartpole_world(rule=("green", "gravity", 2.0),
                       zones=(("green", 1.6, 2.4),), init=(0.0, 0.0, 0.2, 0.5))
    ep = Episode(w)
    done = False
    while not done:
        _, done, info = ep.step("right")
    assert ep.answer is None
    assert info.get("terminated") in ("fell", "horizon")


def test_inverse_dynamics_recovers_forces():
    w = cartpole_world(rule=("green", "wind", -1.0), zones=(("green", -0.4, 0.4),),
                       init=(0.0, 0.0, 0.04, 0.0))
    state = cp.init_state(w)
    nxt = cp.apply_action(state, "right")
    g_eff, external = cp.infer_forces(state, cp.FORCE_MAG, nxt)
    assert abs(external - (-5.0)) < 1e-9
    assert abs(g_eff - cp.GRAVITY) < 1e-6
