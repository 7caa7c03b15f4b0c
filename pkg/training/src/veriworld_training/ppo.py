"""Clipped-surrogate policy optimization with generalized advantage
estimation."""

from __future__ import annotations

import numpy as np
import torch


class RolloutBuffer:
    def __init__(self, steps: int, n_envs: int, obs_dim: int, max_tokens: int):
        self.steps = steps
        self.obs = np.zeros((steps, n_envs, obs_dim), dtype=np.float32)
        self.tokens = np.zeros((steps, n_envs, max_tokens), dtype=np.int64)
        self.mask = np.zeros((steps, n_envs, max_tokens), dtype=np.float32)
        self.actions = np.zeros((steps, n_envs), dtype=np.int64)
        self.logp = np.zeros((steps, n_envs), dtype=np.float32)
        self.values = np.zeros((steps, n_envs), dtype=np.float32)
        self.rewards = np.zeros((steps, n_envs), dtype=np.float32)
        self.dones = np.zeros((steps, n_envs), dtype=np.float32)
        self.t = 0

    def add(self, batch, actions, logp, values, rewards, dones):
        t = self.t
        self.obs[t] = batch["obs"]
        self.tokens[t] = batch["tokens"]
        self.mask[t] = batch["mask"]
        self.actions[t] = actions
        self.logp[t] = logp
        self.values[t] = values
        self.rewards[t] = rewards
        self.dones[t] = dones
        self.t += 1

    def full(self) -> bool:
        return self.t >= self.steps


def compute_gae(rewards, values, dones, last_values, gamma: float, lam: float):
    """Advantages and discounted returns; episodes are cut at done flags."""
    steps, n_envs = rewards.shape
    advantages = np.zeros_like(rewards)
    running = np.zeros(n_envs, dtype=np.float32)
    next_values = last_values
    for t in reversed(range(steps)):
        alive = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_values * alive - values[t]
        running = delta + gamma * lam * alive * running
        advantages[t] = running
        next_values = values[t]
    return advantages, advantages + values


def ppo_update(policy, optimizer, buffer: RolloutBuffer, last_values,
               clip: float, entropy_coef: float, value_coef: float,
               epochs: int, minibatch: int, gamma: float, lam: float,
               rng: np.random.Generator) -> dict:
    advantages, returns = compute_gae(
        buffer.rewards, buffer.values, buffer.dones, last_values, gamma, lam)

    flat = buffer.steps * buffer.obs.shape[1]
    obs = torch.as_tensor(buffer.obs.reshape(flat, -1))
    tokens = torch.as_tensor(buffer.tokens.reshape(flat, -1))
    mask = torch.as_tensor(buffer.mask.reshape(flat, -1))
    actions = torch.as_tensor(buffer.actions.reshape(flat))
    old_logp = torch.as_tensor(buffer.logp.reshape(flat))
    adv = torch.as_tensor(advantages.reshape(flat))
    ret = torch.as_tensor(returns.reshape(flat))
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    stats = {"policy_loss": 0.0, "value_loss": 0.0, "entropy": 0.0, "updates": 0}
    for _ in range(epochs):
        order = rng.permutation(flat)
        for start in range(0, flat, minibatch):
            idx = torch.as_tensor(order[start:start + minibatch])
            dist, value, _ = policy.distribution(obs[idx], tokens[idx], mask[idx])
            logp = dist.log_prob(actions[idx])
            ratio = torch.exp(logp - old_logp[idx])
            surrogate = torch.min(
                ratio * adv[idx],
                torch.clamp(ratio, 1.0 - clip, 1.0 + clip) * adv[idx])
            value_loss = ((value - ret[idx]) ** 2).mean()
            entropy = dist.entropy().mean()
            loss = -surrogate.mean() + value_coef * value_loss - entropy_coef * entropy
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(policy.parameters(), 0.5)
            optimizer.step()
            stats["policy_loss"] += float(-surrogate.mean().detach())
            stats["value_loss"] += float(value_loss.detach())
            stats["entropy"] += float(entropy.detach())
            stats["updates"] += 1
    for key in ("policy_loss", "value_loss", "entropy"):
        stats[key] /= max(stats["updates"], 1)
    return stats
