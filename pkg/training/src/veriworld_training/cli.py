"""Training CLI: run stages, evaluate checkpoints, plot metric logs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from veriworld_training.config import StageConfig

STAGES = ("pretrain", "triplet_fixed", "triplet_finetune", "adapt")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="veriworld-train")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one training stage")
    t.add_argument("--env", required=True, dest="env_id")
    t.add_argument("--stage", required=True, choices=STAGES)
    t.add_argument("--steps", type=int, default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--predictor", choices=("learned", "oracle"), default=None)
    t.add_argument("--from-ckpt", default=None,
                   help="checkpoint to continue from (policy + predictor)")
    t.add_argument("--out-dir", default=None)
    t.add_argument("--config", default=None, help="key=value config file")
    t.add_argument("--stop-at-accuracy", type=float, default=None)
    t.add_argument("--stop-at-return", type=float, default=None)

    e = sub.add_parser("eval", help="evaluate a checkpoint, write a trace")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--episodes", type=int, default=1000)
    e.add_argument("--mix", default="even")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="render a metric log as a PNG")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            from veriworld_training import stages
            overrides = {"env_id": args.env_id, "stage": args.stage,
                         "total_steps": args.steps, "seed": args.seed,
                         "predictor_kind": args.predictor,
                         "out_dir": args.out_dir}
            if args.config:
                cfg = StageConfig.from_file(args.config, **overrides)
            else:
                cfg = StageConfig(**{k: v for k, v in overrides.items()
                                     if v is not None})
            policy = predictor = None
            if args.from_ckpt:
                policy, predictor, _ = stages.load_checkpoint(args.from_ckpt, cfg)
            tag = f"{cfg.stage}-{cfg.env_id}-s{cfg.seed}"
            out = Path(cfg.out_dir)
            policy, predictor, history = stages.train(
                cfg, policy=policy, predictor=predictor,
                log_path=out / f"{tag}.log",
                checkpoint_path=out / f"{tag}.pt",
                stop_at_accuracy=args.stop_at_accuracy,
                stop_at_return=args.stop_at_return)
            steps, ret, acc = history[-1]
            print(f"finished {tag}: steps={steps} return={ret:.3f} "
                  f"accuracy={acc:.3f}")
            if cfg.stage in ("triplet_fixed", "triplet_finetune"):
                verdict = "kept" if stages.selection_passes(acc, cfg) else "eliminated"
                print(f"selection at cutoff {cfg.accuracy_cutoff:.2f}: {verdict}")
        elif args.command == "eval":
            import torch

            from veriworld_training import stages
            from veriworld_training.evaluate import evaluate
            payload = torch.load(args.ckpt, map_location="cpu", weights_only=False)
            import json as _json
            cfg = StageConfig(**_json.loads(payload["config"]))
            policy, predictor, _ = stages.load_checkpoint(args.ckpt, cfg)
            path, report = evaluate(cfg, policy, predictor, args.episodes,
                                    args.mix, args.out, seed=args.seed)
            print(f"wrote {path}")
            print(report.to_text())
        elif args.command == "plot":
            from veriworld_training.plots import plot_metric_log
            out = plot_metric_log(args.log, args.out)
            print(f"wrote {out}")
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
