"""Evaluate a trained policy/predictor pair and write a standard trace that
the primary package's crosstab tooling consumes directly.

Learned-agent traces carry episode records only (no step payloads): the
policy's sampling stream is not reconstructible from the config alone, so
replay is not supported for them.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import torch

from veriworld.episodes import Episode
from veriworld.harness import TRACE_HEADER, CrosstabReport, RunConfig, episode_record
from veriworld.rewards import hyp_reward
from veriworld.worlds import mix_seed, sample_world_seeded

from veriworld_training.config import StageConfig
from veriworld_training.vecenv import VecVerifyEnv, policy_actions


def evaluate(cfg: StageConfig, policy, predictor, episodes: int, mix: str,
             out, seed: int = 0, predictor_kind: str = None):
    """Greedy-stochastic rollout of the learned pair; returns
    (trace path, CrosstabReport)."""
    from veriworld_training.stages import Trainer

    eval_cfg = StageConfig(**{**json.loads(cfg.to_json()),
                              "stage": "adapt" if mix == "even" else "triplet_fixed",
                              "seed": seed,
                              "predictor_kind": predictor_kind or cfg.predictor_kind})
    helper = Trainer(eval_cfg, policy=policy, predictor=predictor)
    env = helper.env
    actions = policy_actions(cfg.env_id)

    run_config = RunConfig(env_id=cfg.env_id, agent="learned", reward="hyp",
                           mix=mix, episodes=episodes, seed=seed, out=str(out),
                           include_obs=False)
    report = CrosstabReport(cfg.env_id)
    lines = [TRACE_HEADER, "#config " + run_config.to_json()]
    rng = torch.Generator().manual_seed(seed)
    for index in range(episodes):
        world = sample_world_seeded(cfg.env_id, mix, mix_seed(seed, index))
        ep = Episode(world, horizon=cfg.horizon, include_stop=True,
                     window=cfg.window)
        total = 0.0
        while not ep.done:
            batch_obs = torch.as_tensor(ep.obs.vec).unsqueeze(0)
            tokens = np.zeros((1, env.max_tokens), dtype=np.int64)
            mask = np.zeros((1, env.max_tokens), dtype=np.float32)
            toks = world.visible.tokens
            tokens[0, :len(toks)] = toks
            mask[0, :len(toks)] = 1.0
            with torch.no_grad():
                dist, _, _ = policy.distribution(
                    batch_obs, torch.as_tensor(tokens), torch.as_tensor(mask))
                action = int(dist.sample())
            name = actions[action]
            if name == "stop":
                answer = helper._answer(ep)
                ep.step("answer_true" if answer else "answer_false")
                total += hyp_reward(answer, ep.label)
            else:
                ep.step(name)
        record = episode_record(index, mix_seed(seed, index), world, ep, {}, total)
        report.add(record)
        lines.append("E " + json.dumps(record, sort_keys=True))
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    report.validate()
    return path, report
