"""Command-line surface: run batches, aggregate crosstabs, replay traces,
and validate the shipped corpora."""

from __future__ import annotations

import argparse
import sys

from veriworld.grammar import ENV_IDS, library
from veriworld.harness import REWARD_NAMES, RunConfig, crosstab, replay, run_batch


def _add_run(sub):
    p = sub.add_parser("run", help="run a batch of episodes and write a trace")
    p.add_argument("--env", required=True, choices=ENV_IDS, dest="env_id")
    p.add_argument("--agent", default=None, help="oracle | random | no_act")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--reward", default=None, choices=REWARD_NAMES)
    p.add_argument("--mix", default=None,
                   help="triplet | even | nontriplet | general | special | kind:p,...")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="condition window length")
    p.add_argument("--out", default=None, help="trace output path")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-obs", action="store_true",
                   help="omit per-step observation payloads from the trace")
    p.add_argument("--figures", action="store_true",
                   help="render report figures next to the trace")
    p.add_argument("--config", default=None, help="key=value config file")


def _add_crosstab(sub):
    p = sub.add_parser("crosstab", help="aggregate a trace into accuracy tables")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.add_argument("--figures", action="store_true")
    p.add_argument("--min-cell", type=int, default=0,
                   help="fail when any template cell has fewer episodes")


def _add_replay(sub):
    p = sub.add_parser("replay", help="recompute one episode and verify the trace")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--episode", type=int, required=True)


def _add_corpus_check(sub):
    p = sub.add_parser("corpus-check", help="validate a shipped template corpus")
    p.add_argument("--env", required=True, choices=ENV_IDS, dest="env_id")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="veriworld",
        description="hypothesis-verification worlds: batch runner and tools")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run(sub)
    _add_crosstab(sub)
    _add_replay(sub)
    _add_corpus_check(sub)
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            overrides = {
                "env_id": args.env_id, "agent": args.agent, "episodes": args.episodes,
                "seed": args.seed, "reward": args.reward, "mix": args.mix,
                "horizon": args.horizon, "k": args.k, "out": args.out,
                "workers": args.workers,
                "include_obs": False if args.no_obs else None,
                "figures": True if args.figures else None,
            }
            if args.config:
                config = RunConfig.from_file(args.config, **overrides)
            else:
                config = RunConfig.from_strings(
                    {k: v for k, v in overrides.items() if v is not None})
            path, report = run_batch(config)
            print(f"wrote {path}")
            print(report.to_text())
        elif args.command == "crosstab":
            report = crosstab(args.path)
            report.min_cell_count = args.min_cell
            report.validate()
            print(report.to_json() if args.json else report.to_text())
            if args.figures:
                from pathlib import Path

                from veriworld.plots import report_figures
                for fig in report_figures(report, Path(args.path + ".figs")):
                    print(f"wrote {fig}")
        elif args.command == "replay":
            episode = replay(args.path, args.episode)
            answer = {None: "unanswered", True: "true", False: "false"}[episode.answer]
            print(f"episode {args.episode} replayed bit-exactly: "
                  f"{episode.step_count} steps, answer {answer}, "
                  f"label {str(episode.label).lower()}")
        elif args.command == "corpus-check":
            lib = library(args.env_id)
            checked = lib.self_check()
            print(f"{args.env_id}: {checked} instantiations checked, "
                  f"{len(lib.vocabulary)} vocabulary tokens, "
                  f"sections pre={len(lib.pre_templates)} action={len(lib.action_templates)} "
                  f"post={len(lib.post_templates)} general={len(lib.general_templates)} "
                  f"special={len(lib.special_templates)}")
    except Exception as exc:  # surface every error class with a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
