"""Stage hyperparameters for the training pipeline."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


@dataclass
class StageConfig:
    env_id: str = "crafting"
    stage: str = "pretrain"        # pretrain | triplet_fixed | triplet_finetune | adapt
    total_steps: int = 2_000_000   # desk-scale default; the full runs go higher
    seed: int = 0

    # PPO
    batch_steps: int = 2048
    clip: float = 0.2
    entropy_coef: float = 0.1
    value_coef: float = 0.5
    n_envs: int = 8
    epochs: int = 4
    minibatch: int = 32
    lr_pretrain: float = 2.5e-4    # adaptive-moment optimizer
    lr_finetune: float = 1e-5      # plain gradient descent
    gamma: float = 0.99
    gae_lambda: float = 0.95

    # prediction network
    predictor_lr: float = 1e-3
    predictor_batch: int = 128
    memory_size: int = 200
    memory_burn_in: int = 100_000
    # alternation period between policy and predictor optimization; the
    # published value is one window of 1e7 steps, far beyond desk budgets
    alternate_window: int = 10_000_000

    # run selection
    accuracy_cutoff: float = 0.90  # alternate published cutoff: 0.80

    # networks
    embedding_size: int = 32
    hidden_size: int = 32
    n_modules: int = 16
    mlp_hidden_layers: int = 2
    transformer_depth: int = 3
    window: int = 5

    horizon: Optional[int] = None
    predictor_kind: str = "learned"  # learned | oracle
    out_dir: str = "runs"

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_file(cls, path, **overrides) -> "StageConfig":
        values = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in values:
                continue
            raw = values[f.name]
            if isinstance(raw, str):
                if f.type in ("int", "Optional[int]"):
                    raw = None if raw in ("", "none") else int(raw)
                elif f.type == "float":
                    raw = float(raw)
            kwargs[f.name] = raw
        return cls(**kwargs)
