"""Secondary acceptance: desk-scale learning checks plus fast network
invariants. The training criteria are marked slow (several tens of minutes
each); run them with `pytest -m slow -s`.
"""

import random
import sys

import numpy as np
import pytest
import torch

from veriworld_training.config import StageConfig
from veriworld_training.memory import PredictionMemory
from veriworld_training.nets import PolicyNet, PredictionNet
from veriworld_training.stages import train


def report(ok: bool, name: str, detail: str) -> bool:
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'}  {name}: {detail}",
          file=sys.stderr)
    return ok


def test_network_checks():
    ok = True
    # attention weights normalize over the module bank
    torch.manual_seed(0)
    policy = PolicyNet(obs_dim=18, vocab_size=25, n_actions=6)
    g = torch.Generator().manual_seed(1)
    obs = torch.rand(5, 18, generator=g)
    ids = torch.randint(1, 25, (5, 6), generator=g)
    mask = torch.ones(5, 6)
    _, _, weights = policy(obs, ids, mask)
    ok &= bool(torch.allclose(weights.sum(dim=1), torch.ones(5), atol=1e-6))

    # predictor gradients against central finite differences
    net = PredictionNet(obs_dim=6, vocab_size=12, embedding_size=8, depth=1).double()
    window = torch.rand(2, 3, 6, generator=g, dtype=torch.double)
    wids = torch.randint(1, 12, (2, 5), generator=g)
    wmask = torch.ones(2, 5, dtype=torch.double)
    net(window, wids, wmask).sum().backward()
    worst = 0.0
    rng = np.random.default_rng(0)
    eps = 1e-6
    for p in [q for q in net.parameters() if q.grad is not None][:6]:
        flat, grad = p.detach().reshape(-1), p.grad.reshape(-1)
        for _ in range(3):
            i = int(rng.integers(len(flat)))
            keep = float(flat[i])
            with torch.no_grad():
                flat[i] = keep + eps
                up = float(net(window, wids, wmask).sum())
                flat[i] = keep - eps
                down = float(net(window, wids, wmask).sum())
                flat[i] = keep
            numeric = (up - down) / (2 * eps)
            analytic = float(grad[i])
            worst = max(worst, abs(numeric - analytic)
                        / max(abs(numeric), abs(analytic), 1e-8))
    ok &= worst < 1e-4

    # memory capacity and burn-in invariants
    mem = PredictionMemory(capacity=200, burn_in=100_000)
    for i in range(250):
        mem.add(np.zeros((1, 1), np.float32), np.array([i]), bool(i % 2))
    ok &= len(mem) == 200
    ok &= not mem.ready(99_999)
    ok &= mem.ready(100_000)
    try:
        mem.sample(4, random.Random(0), env_steps=50_000)
        ok = False
    except RuntimeError:
        pass
    assert report(ok, "network-checks",
                  f"attention normalized; predictor finite-difference relative "
                  f"error {worst:.2e} < 1e-4; memory capacity 200 and burn-in "
                  "100000 enforced")


@pytest.mark.slow
def test_oracle_predictor_ablation():
    # policy learned against the windowed oracle predictor on crafting
    cfg = StageConfig(env_id="crafting", stage="triplet_fixed",
                      predictor_kind="oracle", total_steps=2_000_000, seed=0,
                      out_dir="runs")
    _, _, history = train(cfg, stop_at_accuracy=0.90,
                          log_path="runs/accept-oracle-ablation.log",
                          checkpoint_path="runs/accept-oracle-ablation.pt")
    best = max(acc for _, _, acc in history if acc == acc)
    steps = history[-1][0]
    ok = best >= 0.90 and steps <= 2_000_000
    assert report(ok, "oracle-predictor-ablation",
                  f"crafting triplet accuracy reached {best:.3f} "
                  f"(target 0.90) after {steps} steps (budget 2e6)")


@pytest.mark.slow
def test_pretraining_plateaus():
    # hours-scale budgets; both stop early once the criterion is met
    ok = True
    # colorswitch pretrains on the pre-condition reward alone: near-perfect C
    cs = StageConfig(env_id="colorswitch", stage="pretrain",
                     total_steps=8_000_000, seed=0)
    _, _, history = train(cs, stop_at_return=9.0,
                          log_path="runs/accept-pretrain-colorswitch.log",
                          checkpoint_path="runs/accept-pretrain-colorswitch.pt")
    cs_best = max(ret for _, ret, _ in history if ret == ret)
    ok &= cs_best >= 0.9 * 10.0

    # crafting runs the summed pre + pre+post composite: it learns well past
    # the single-C mark but cannot reach the 2C ceiling because false
    # recipes leave the post-condition untoggleable
    cr = StageConfig(env_id="crafting", stage="pretrain",
                     total_steps=8_000_000, seed=0)
    _, _, history_cr = train(cr, log_path="runs/accept-pretrain-crafting.log",
                             checkpoint_path="runs/accept-pretrain-crafting.pt",
                             stop_at_return=15.0)
    tail = [ret for _, ret, _ in history_cr[-50:]]
    plateau = sum(tail) / len(tail)
    ok &= 10.0 <= plateau < 20.0
    assert report(ok, "pretraining-plateaus",
                  f"colorswitch best return {cs_best:.2f} >= 9.0; "
                  f"crafting plateau {plateau:.2f} in [10, 20)")
