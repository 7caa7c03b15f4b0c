"""Training-curve figures from metric logs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from veriworld_training.stages import read_metric_log  # noqa: E402


def plot_metric_log(log_path, out_path):
    rows = read_metric_log(log_path)
    if not rows:
        raise ValueError(f"no metric records in {log_path}")
    steps = [r[0] for r in rows]
    returns = [r[1] for r in rows]
    accuracy = [r[2] for r in rows]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    ax1.plot(steps, returns, color="#4878d0")
    ax1.set_xlabel("environment steps")
    ax1.set_ylabel("mean episode return")
    ax2.plot(steps, accuracy, color="#ee854a")
    ax2.set_xlabel("environment steps")
    ax2.set_ylabel("answer accuracy")
    ax2.set_ylim(0, 1)
    fig.suptitle(Path(log_path).stem)
    fig.tight_layout()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=140)
    plt.close(fig)
    return out
