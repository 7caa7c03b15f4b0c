"""The staged pipeline: shaping pretrain, triplet training (fixed or
finetune), and adaptation to the even hypothesis mix.

Stages share one loop: collect a PPO batch from the vector env, then update
whichever networks the stage and the alternation schedule allow. The
prediction network trains on uniformly sampled memory entries once the
burn-in has passed; finetune-style stages alternate optimization, starting
with the predictor.
"""

from __future__ import annotations

import json
import random
from collections import deque
from pathlib import Path

import numpy as np
import torch

from veriworld.agents import oracle_predictor
from veriworld.episodes import observation_length

from veriworld_training.config import StageConfig
from veriworld_training.memory import PredictionMemory
from veriworld_training.nets import PolicyNet, PredictionNet
from veriworld_training.ppo import RolloutBuffer, ppo_update
from veriworld_training.vecenv import VecVerifyEnv, max_token_length, policy_actions

from veriworld.grammar import library

STAGE_MIX = {"pretrain": "triplet", "triplet_fixed": "triplet",
             "triplet_finetune": "triplet", "adapt": "even"}
STAGE_REWARD = {"pretrain": "pretrain", "triplet_fixed": "hyp",
                "triplet_finetune": "hyp", "adapt": "hyp"}


def build_nets(cfg: StageConfig):
    obs_dim = observation_length(cfg.env_id)
    vocab = len(library(cfg.env_id).vocabulary)
    n_actions = len(policy_actions(cfg.env_id))
    policy = PolicyNet(obs_dim, vocab, n_actions,
                       embedding_size=cfg.embedding_size,
                       hidden_size=cfg.hidden_size, n_modules=cfg.n_modules,
                       mlp_hidden_layers=cfg.mlp_hidden_layers)
    predictor = PredictionNet(obs_dim, vocab, embedding_size=cfg.embedding_size,
                              depth=cfg.transformer_depth, window=cfg.window)
    return policy, predictor


def save_checkpoint(path, cfg: StageConfig, policy, predictor, env_steps: int):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save({"config": cfg.to_json(), "env_steps": env_steps,
                "policy": policy.state_dict(),
                "predictor": predictor.state_dict()}, path)


def load_checkpoint(path, cfg: StageConfig):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    policy, predictor = build_nets(cfg)
    policy.load_state_dict(payload["policy"])
    predictor.load_state_dict(payload["predictor"])
    return policy, predictor, payload


class MetricLog:
    """Line-delimited records: M <env steps> <mean return> <accuracy>."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w")

    def write(self, env_steps: int, mean_return: float, accuracy: float):
        self._fh.write(f"M {env_steps} {mean_return:.6g} {accuracy:.6g}\n")
        self._fh.flush()

    def close(self):
        self._fh.close()


def read_metric_log(path):
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("M "):
            _, steps, ret, acc = line.split()
            rows.append((int(steps), float(ret), float(acc)))
    return rows


class Trainer:
    def __init__(self, cfg: StageConfig, policy=None, predictor=None):
        self.cfg = cfg
        torch.set_num_threads(1)  # tiny minibatches run faster unthreaded
        torch.manual_seed(cfg.seed)
        self.np_rng = np.random.default_rng(cfg.seed)
        self.py_rng = random.Random(cfg.seed)
        built_policy, built_predictor = build_nets(cfg)
        self.policy = policy or built_policy
        self.predictor = predictor or built_predictor
        self.memory = PredictionMemory(cfg.memory_size, cfg.memory_burn_in)
        self.env = VecVerifyEnv(cfg.env_id, STAGE_MIX[cfg.stage],
                                STAGE_REWARD[cfg.stage], cfg.seed,
                                n_envs=cfg.n_envs, window=cfg.window,
                                horizon=cfg.horizon,
                                predictor_fn=self._answer)
        self.env_steps = 0
        self.recent_returns = deque(maxlen=200)
        self.recent_correct = deque(maxlen=500)
        self.policy_optimizer = self._policy_optimizer()
        self.predictor_optimizer = torch.optim.Adam(
            self.predictor.parameters(), lr=cfg.predictor_lr)
        self.bce = torch.nn.BCELoss()

    def _policy_optimizer(self):
        cfg = self.cfg
        if cfg.stage in ("pretrain",) or cfg.predictor_kind == "oracle":
            return torch.optim.Adam(self.policy.parameters(), lr=cfg.lr_pretrain)
        return torch.optim.SGD(self.policy.parameters(), lr=cfg.lr_finetune)

    # -- answering at stop -----------------------------------------------------

    def _answer(self, episode) -> bool:
        if self.cfg.predictor_kind == "oracle":
            states = list(episode.state_window)
            actions = [a for _, a, _ in episode.window_transitions()]
            verdict = oracle_predictor(states, actions,
                                       episode.world.visible.form, episode.world)
            return verdict.answer if verdict.known else True  # ties toward true
        window = torch.as_tensor(self.env.window_obs(episode)).unsqueeze(0)
        tokens = np.zeros((1, self.env.max_tokens), dtype=np.int64)
        mask = np.zeros((1, self.env.max_tokens), dtype=np.float32)
        toks = episode.world.visible.tokens
        tokens[0, :len(toks)] = toks
        mask[0, :len(toks)] = 1.0
        with torch.no_grad():
            p = self.predictor(window, torch.as_tensor(tokens),
                               torch.as_tensor(mask))
        return bool(p.item() >= 0.5)

    # -- schedule --------------------------------------------------------------------

    def _train_policy_now(self) -> bool:
        cfg = self.cfg
        if cfg.stage == "pretrain" or cfg.predictor_kind == "oracle":
            return True
        if cfg.stage == "triplet_fixed":
            return False
        # finetune / adapt: alternate, predictor first
        return (self.env_steps // cfg.alternate_window) % 2 == 1

    def _train_predictor_now(self) -> bool:
        cfg = self.cfg
        if cfg.stage == "pretrain" or cfg.predictor_kind == "oracle":
            return False
        if cfg.stage == "triplet_fixed":
            return True
        return not self._train_policy_now()

    # -- the loop -----------------------------------------------------------------------

    def collect_batch(self) -> RolloutBuffer:
        cfg = self.cfg
        steps = max(cfg.batch_steps // cfg.n_envs, 1)
        buffer = RolloutBuffer(steps, cfg.n_envs, self.env.obs_dim,
                               self.env.max_tokens)
        batch = self.env.observe()
        while not buffer.full():
            obs_t = torch.as_tensor(batch["obs"])
            tok_t = torch.as_tensor(batch["tokens"])
            mask_t = torch.as_tensor(batch["mask"])
            with torch.no_grad():
                dist, value, _ = self.policy.distribution(obs_t, tok_t, mask_t)
                actions = dist.sample()
                logp = dist.log_prob(actions)
            next_batch, rewards, dones, infos = self.env.step(actions.numpy())
            buffer.add(batch, actions.numpy(), logp.numpy(), value.numpy(),
                       rewards, dones.astype(np.float32))
            self.env_steps += cfg.n_envs
            for info in infos:
                if info and "episode_return" in info:
                    self.recent_returns.append(info["episode_return"])
                    if info.get("answered"):
                        self.recent_correct.append(1 if info["correct"] else 0)
                        self.memory.add(info["window_obs"], info["tokens"],
                                        info["label"])
            batch = next_batch
        self._last_batch = batch
        return buffer

    def update_policy(self, buffer: RolloutBuffer) -> dict:
        cfg = self.cfg
        with torch.no_grad():
            _, last_values, _ = self.policy(
                torch.as_tensor(self._last_batch["obs"]),
                torch.as_tensor(self._last_batch["tokens"]),
                torch.as_tensor(self._last_batch["mask"]))
        return ppo_update(self.policy, self.policy_optimizer, buffer,
                          last_values.numpy(), cfg.clip, cfg.entropy_coef,
                          cfg.value_coef, cfg.epochs, cfg.minibatch,
                          cfg.gamma, cfg.gae_lambda, self.np_rng)

    def update_predictor(self) -> float:
        cfg = self.cfg
        if not self.memory.ready(self.env_steps):
            return float("nan")
        entries = self.memory.sample(cfg.predictor_batch, self.py_rng,
                                     self.env_steps)
        windows = torch.as_tensor(np.stack([w for w, _, _ in entries]))
        tokens = torch.as_tensor(np.stack([t for _, t, _ in entries]))
        mask = (tokens > 0).float()
        labels = torch.as_tensor([1.0 if y else 0.0 for _, _, y in entries])
        p = self.predictor(windows, tokens, mask)
        loss = self.bce(p, labels)
        self.predictor_optimizer.zero_grad()
        loss.backward()
        self.predictor_optimizer.step()
        return float(loss.detach())

    def accuracy(self) -> float:
        if not self.recent_correct:
            return float("nan")
        return sum(self.recent_correct) / len(self.recent_correct)

    def mean_return(self) -> float:
        if not self.recent_returns:
            return float("nan")
        return sum(self.recent_returns) / len(self.recent_returns)


def train(cfg: StageConfig, policy=None, predictor=None, log_path=None,
          checkpoint_path=None, stop_at_accuracy=None, stop_at_return=None,
          quiet=False):
    """Run one stage to its step budget; returns (policy, predictor, history).

    stop_at_accuracy / stop_at_return end the run early once the rolling
    accuracy (last 500 answered episodes) or rolling mean return (last 200
    episodes) reaches the target; convergence often arrives well before the
    step budget.
    """
    trainer = Trainer(cfg, policy=policy, predictor=predictor)
    log = MetricLog(log_path) if log_path else None
    history = []
    while trainer.env_steps < cfg.total_steps:
        buffer = trainer.collect_batch()
        if trainer._train_policy_now():
            trainer.update_policy(buffer)
        if trainer._train_predictor_now():
            trainer.update_predictor()
        acc = trainer.accuracy()
        history.append((trainer.env_steps, trainer.mean_return(), acc))
        if log:
            log.write(*history[-1])
        if not quiet and len(history) % 10 == 1:
            print(f"[{cfg.stage}/{cfg.env_id}] steps={trainer.env_steps} "
                  f"return={trainer.mean_return():.3f} accuracy={acc:.3f}",
                  flush=True)
        if (stop_at_accuracy is not None
                and len(trainer.recent_correct) >= trainer.recent_correct.maxlen
                and acc >= stop_at_accuracy):
            break
        if (stop_at_return is not None
                and len(trainer.recent_returns) >= trainer.recent_returns.maxlen
                and trainer.mean_return() >= stop_at_return):
            break
    if log:
        log.close()
    if checkpoint_path:
        save_checkpoint(checkpoint_path, cfg, trainer.policy, trainer.predictor,
                        trainer.env_steps)
    return trainer.policy, trainer.predictor, history


def selection_passes(accuracy: float, cfg: StageConfig) -> bool:
    """Runs below the accuracy cutoff are eliminated from later stages."""
    return accuracy >= cfg.accuracy_cutoff
