"""Synchronous vector of verification episodes for the learner.

The learner's action space is the world actions plus a single stop action;
answering is delegated to a predictor function at stop time (the learned
predictor thresholded at 0.5, ties answering true, or the oracle predictor
in the ablation). Episode boundaries auto-reset with sequential seeds.
"""

from __future__ import annotations

import numpy as np

from veriworld import gridworld as gw
from veriworld.episodes import Episode, observation_length
from veriworld.grammar import library
from veriworld.rewards import default_specs, hyp_reward, step_reward
from veriworld.worlds import mix_seed, sample_world_seeded


def max_token_length(env_id: str) -> int:
    lib = library(env_id)
    longest = 0
    for kind in ("triplet", "general", "special"):
        for hyp in lib.enumerate_instantiations(kind):
            longest = max(longest, len(hyp.tokens))
    return longest


def policy_actions(env_id: str) -> tuple:
    if env_id == "cartpole":
        return ("left", "right", "stop")
    return gw.WORLD_ACTIONS[env_id] + ("stop",)


class VecVerifyEnv:
    def __init__(self, env_id: str, mix: str, reward: str, seed: int,
                 n_envs: int = 8, window: int = 5, horizon=None,
                 predictor_fn=None):
        self.env_id = env_id
        self.mix = mix
        self.reward = reward
        self.seed = seed
        self.n_envs = n_envs
        self.window = window
        self.horizon = horizon
        self.predictor_fn = predictor_fn
        self.specs = None if reward == "hyp" else default_specs(reward, env_id)
        self.actions = policy_actions(env_id)
        self.obs_dim = observation_length(env_id)
        self.max_tokens = max_token_length(env_id)
        self._counter = 0
        self.episodes = [self._new_episode() for _ in range(n_envs)]

    def _new_episode(self) -> Episode:
        world = sample_world_seeded(self.env_id, self.mix,
                                    mix_seed(self.seed, self._counter))
        self._counter += 1
        ep = Episode(world, horizon=self.horizon, include_stop=True,
                     window=self.window)
        ep.total_return = 0.0
        return ep

    # -- batched views ---------------------------------------------------------

    def _tokens(self, ep: Episode):
        ids = np.zeros(self.max_tokens, dtype=np.int64)
        mask = np.zeros(self.max_tokens, dtype=np.float32)
        toks = ep.world.visible.tokens
        ids[:len(toks)] = toks
        mask[:len(toks)] = 1.0
        return ids, mask

    def observe(self) -> dict:
        obs = np.stack([ep.obs.vec for ep in self.episodes])
        tokens = np.zeros((self.n_envs, self.max_tokens), dtype=np.int64)
        mask = np.zeros((self.n_envs, self.max_tokens), dtype=np.float32)
        for i, ep in enumerate(self.episodes):
            tokens[i], mask[i] = self._tokens(ep)
        return {"obs": obs.astype(np.float32), "tokens": tokens, "mask": mask}

    def window_obs(self, ep: Episode) -> np.ndarray:
        """Last-K observation stack, front-padded by repeating the oldest."""
        vecs = [o.vec for o in ep.obs_window]
        while len(vecs) < self.window:
            vecs.insert(0, vecs[0])
        return np.stack(vecs).astype(np.float32)

    # -- stepping ------------------------------------------------------------------

    def step(self, action_ids) -> tuple:
        rewards = np.zeros(self.n_envs, dtype=np.float32)
        dones = np.zeros(self.n_envs, dtype=bool)
        infos = [None] * self.n_envs
        for i, (ep, action_id) in enumerate(zip(self.episodes, action_ids)):
            name = self.actions[int(action_id)]
            prev_state = ep.state
            prev_window = list(ep.state_window)
            answered = correct = None
            if name == "stop" and self.reward == "hyp":
                # the stop action is replaced by the predictor's answer
                window = self.window_obs(ep)
                answer = bool(self.predictor_fn(ep))
                ep.step("answer_true" if answer else "answer_false")
                reward = hyp_reward(answer, ep.label)
                answered, correct = True, (answer == ep.label)
                infos[i] = {"window_obs": window,
                            "tokens": self._tokens(ep)[0],
                            "mask": self._tokens(ep)[1],
                            "label": ep.label}
            else:
                ep.step(name)
                if self.specs is not None:
                    reward = step_reward(self.specs, ep, name, prev_state, prev_window)
                else:
                    reward = 0.0
            ep.total_return += reward
            rewards[i] = reward
            if ep.done:
                dones[i] = True
                info = infos[i] or {}
                info.update({"episode_return": ep.total_return,
                             "episode_steps": ep.step_count,
                             "answered": answered, "correct": correct})
                infos[i] = info
                self.episodes[i] = self._new_episode()
            else:
                infos[i] = infos[i] or {}
        return self.observe(), rewards, dones, infos
