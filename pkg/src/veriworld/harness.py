"""Batch episode runner: configuration, seeding, trace persistence,
accuracy crosstabs, and bit-exact replay.

Trace files are line-delimited and diff-able:

    #veriworld-trace v1
    #config {...}
    E {"index": 0, "seed": ..., "template": ..., "label": ..., ...}
    S <step> <action_id> <reward> <obs> <done> <answer>

The E record carries everything needed to resample the world (seed, mix,
environment) plus the sampled hypothesis identifiers, so any episode can be
recomputed and compared byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from random import Random
from typing import Optional

import numpy as np

from veriworld.agents import make_agent
from veriworld.episodes import Episode
from veriworld.grammar import library
from veriworld.rewards import default_specs, step_reward
from veriworld.worlds import WorldInstance, mix_seed, parse_mix, sample_world_seeded

TRACE_HEADER = "#veriworld-trace v1"

REWARD_NAMES = ("hyp", "pre", "pre_post", "pretrain",
                "intrinsic_i", "intrinsic_ii", "intrinsic_iii", "intrinsic_iv")


class TraceError(ValueError):
    pass


class ReplayMismatch(AssertionError):
    pass


@dataclass
class RunConfig:
    env_id: str
    agent: str = "oracle"
    reward: str = "hyp"
    mix: str = "triplet"
    episodes: int = 100
    seed: int = 0
    horizon: Optional[int] = None
    k: int = 5
    out: str = "run.trace"
    include_obs: bool = True
    workers: int = 1
    figures: bool = False

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episode count must be >= 1")
        if self.reward not in REWARD_NAMES:
            raise ValueError(f"unknown reward {self.reward!r}")
        parse_mix(self.mix)  # validates proportions

    @classmethod
    def from_file(cls, path, **overrides) -> "RunConfig":
        """Flat key=value config file; later command-line overrides win."""
        values = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict) -> "RunConfig":
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in values:
                continue
            raw = values[f.name]
            if isinstance(raw, str):
                if f.name in ("episodes", "seed", "k", "workers"):
                    raw = int(raw)
                elif f.name == "horizon":
                    raw = None if raw in ("", "none") else int(raw)
                elif f.name in ("include_obs", "figures"):
                    raw = raw.lower() in ("1", "true", "yes")
            kwargs[f.name] = raw
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


# -- crosstabs ------------------------------------------------------------------

def _cell():
    return [0, 0]  # [correct, count]


@dataclass
class CrosstabReport:
    """Accuracy broken down by template, slot value, and truth label."""

    env_id: str
    overall: list = field(default_factory=_cell)
    by_template: dict = field(default_factory=dict)
    by_element: dict = field(default_factory=dict)
    by_label: dict = field(default_factory=lambda: {"true": _cell(), "false": _cell()})
    episodes: int = 0
    infeasible: int = 0
    total_return: float = 0.0
    min_cell_count: int = 0

    @staticmethod
    def accuracy(cell) -> float:
        return cell[0] / cell[1] if cell[1] else float("nan")

    def add(self, record: dict) -> None:
        correct = 1 if record["answer"] == record["label"] else 0
        self.episodes += 1
        self.infeasible += 1 if record.get("infeasible") else 0
        self.total_return += record["return"]
        for cell in (self.overall,
                     self.by_template.setdefault(record["template"], _cell()),
                     self.by_label["true" if record["label"] else "false"],
                     *(self.by_element.setdefault(v, _cell())
                       for v in sorted(record["slots"].values()))):
            cell[0] += correct
            cell[1] += 1

    def merge(self, other: "CrosstabReport") -> None:
        def absorb(mine, theirs):
            for key, cell in theirs.items():
                acc = mine.setdefault(key, _cell())
                acc[0] += cell[0]
                acc[1] += cell[1]

        self.overall[0] += other.overall[0]
        self.overall[1] += other.overall[1]
        absorb(self.by_template, other.by_template)
        absorb(self.by_element, other.by_element)
        absorb(self.by_label, other.by_label)
        self.episodes += other.episodes
        self.infeasible += other.infeasible
        self.total_return += other.total_return

    def validate(self) -> None:
        """Partition cells must reproduce the overall tallies exactly."""
        for table in (self.by_label, self.by_template):
            totals = [sum(c[0] for c in table.values()), sum(c[1] for c in table.values())]
            if totals != self.overall:
                raise TraceError(f"crosstab cells {totals} do not add up to {self.overall}")
        if self.min_cell_count:
            thin = [k for k, c in self.by_template.items() if c[1] < self.min_cell_count]
            if thin:
                raise TraceError(f"cells below declared minimum: {thin}")

    def mean_return(self) -> float:
        return self.total_return / self.episodes if self.episodes else 0.0

    def to_text(self) -> str:
        lines = [f"environment: {self.env_id}",
                 f"episodes: {self.episodes}  infeasible: {self.infeasible}",
                 f"mean return: {self.mean_return():.4f}",
                 f"overall accuracy: {self.accuracy(self.overall):.4f} "
                 f"({self.overall[0]}/{self.overall[1]})",
                 "", "by truth label:"]
        for key in ("true", "false"):
            cell = self.by_label[key]
            lines.append(f"  {key:5s} {self.accuracy(cell):.4f} ({cell[0]}/{cell[1]})")
        lines.append("")
        lines.append("by element:")
        for key in sorted(self.by_element):
            cell = self.by_element[key]
            lines.append(f"  {key:15s} {self.accuracy(cell):.4f} ({cell[0]}/{cell[1]})")
        lines.append("")
        lines.append("by template:")
        lib = library(self.env_id)
        for key in sorted(self.by_template):
            cell = self.by_template[key]
            lines.append(f"  {key:18s} {self.accuracy(cell):.4f} ({cell[0]}/{cell[1]})  "
                         f"{lib.template_text(key)}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


# -- serialization ------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    return format(float(x), ".9g")


def serialize_obs(env_id: str, vec: np.ndarray) -> str:
    if env_id == "cartpole":
        head = ",".join(_fmt_float(v) for v in vec[:4])
        bits = "".join("1" if v else "0" for v in vec[4:])
        return head + "|" + bits
    return "".join("1" if v else "0" for v in vec)


def _layout_record(world: WorldInstance) -> dict:
    layout = world.layout
    if world.env_id == "cartpole":
        return {"zones": [list(z) for z in layout.zones],
                "init": list(layout.init_state)}
    rec = {"agent": list(layout.agent)}
    if layout.switches:
        rec["switches"] = [[c, list(cell), on] for c, cell, on in layout.switches]
    if layout.block is not None:
        rec["block"] = list(layout.block)
    if layout.items:
        rec["items"] = [[i, list(cell)] for i, cell in layout.items]
    if layout.table is not None:
        rec["table"] = list(layout.table)
    if layout.door is not None:
        rec["door"] = list(layout.door)
    return rec


def episode_record(index: int, seed: int, world: WorldInstance, episode: Episode,
                   agent_info: dict, total_return: float) -> dict:
    return {
        "index": index,
        "seed": seed,
        "env_id": world.env_id,
        "label": world.label,
        "template": world.visible.form.template_id,
        "slots": world.visible.form.slots,
        "text": world.visible.text,
        "hidden_true": world.hidden_true.form.template_id,
        "hidden_false": world.hidden_false.form.template_id,
        "layout": _layout_record(world),
        "steps": episode.step_count,
        "answer": episode.answer,
        "return": total_return,
        "infeasible": bool(agent_info.get("infeasible")),
    }


# -- episode execution ------------------------------------------------------------------

def run_episode(config: RunConfig, index: int):
    """Run one episode; returns (E-record, S-lines)."""
    seed = mix_seed(config.seed, index)
    world = sample_world_seeded(config.env_id, config.mix, seed)
    specs = default_specs(config.reward, config.env_id)
    include_stop = any(s.needs_stop for s in specs)
    window = max([config.k] + [s.K for s in specs])
    episode = Episode(world, horizon=config.horizon,
                      include_stop=include_stop, window=window)
    agent = make_agent(config.agent)
    agent.begin(episode, Random(mix_seed(seed, 1)))

    lines = []
    total = 0.0
    while not episode.done:
        prev_state = episode.state
        prev_window = list(episode.state_window)
        name = agent.act(episode)
        action_id = episode.action_id(name)
        _, done, _ = episode.step(name)
        reward = step_reward(specs, episode, name, prev_state, prev_window)
        total += reward
        if config.include_obs:
            obs = serialize_obs(config.env_id, episode.obs.vec)
            answer = {None: "-", True: "true", False: "false"}[episode.answer]
            lines.append(f"S {episode.step_count - 1} {action_id} {_fmt_float(reward)} "
                         f"{obs} {int(done)} {answer}")
    record = episode_record(index, seed, world, episode, agent.info(), total)
    return record, lines


def _run_chunk(args):
    config_json, indices = args
    config = RunConfig.from_strings(json.loads(config_json))
    out = []
    report = CrosstabReport(config.env_id)
    for i in indices:
        record, lines = run_episode(config, i)
        report.add(record)
        out.append((i, "E " + json.dumps(record, sort_keys=True), lines))
    return out, report


def run_batch(config: RunConfig):
    """Run the configured batch; writes the trace file and returns
    (trace path, CrosstabReport)."""
    path = Path(config.out)
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    indices = list(range(config.episodes))
    report = CrosstabReport(config.env_id)
    chunks_out = []
    if config.workers > 1:
        splits = [(config.to_json(), indices[i::config.workers])
                  for i in range(config.workers)]
        with Pool(config.workers) as pool:
            for out, part in pool.imap_unordered(_run_chunk, splits):
                chunks_out.extend(out)
                report.merge(part)
    else:
        out, report = _run_chunk((config.to_json(), indices))
        chunks_out = out
    chunks_out.sort(key=lambda entry: entry[0])

    with path.open("w") as fh:
        fh.write(TRACE_HEADER + "\n")
        fh.write("#config " + config.to_json() + "\n")
        for _, e_line, s_lines in chunks_out:
            fh.write(e_line + "\n")
            for line in s_lines:
                fh.write(line + "\n")
    report.validate()
    if config.figures:
        from veriworld.plots import report_figures
        report_figures(report, path.with_suffix(path.suffix + ".figs"))
    return path, report


# -- reading traces ---------------------------------------------------------------------

def read_trace(path):
    """(config, [(E-record, [S-lines]), ...]) from a trace file."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise TraceError(f"{path} is not a veriworld trace")
    if not lines[1].startswith("#config "):
        raise TraceError("missing #config line")
    config = RunConfig.from_strings(json.loads(lines[1][len("#config "):]))
    episodes = []
    for line in lines[2:]:
        if line.startswith("E "):
            episodes.append((json.loads(line[2:]), []))
        elif line.startswith("S "):
            if not episodes:
                raise TraceError("step line before any episode record")
            episodes[-1][1].append(line)
        elif line.strip():
            raise TraceError(f"unrecognized trace line: {line[:40]}...")
    if not episodes:
        raise TraceError(f"{path} contains no episodes")
    return config, episodes


def crosstab(path) -> CrosstabReport:
    """Aggregate a trace file into a crosstab report."""
    config, episodes = read_trace(path)
    report = CrosstabReport(config.env_id)
    for record, _ in episodes:
        report.add(record)
    report.validate()
    return report


def replay(path, index: int) -> Episode:
    """Recompute one episode from its seed and verify every persisted line
    matches byte for byte. Returns the recomputed episode."""
    config, episodes = read_trace(path)
    for record, s_lines in episodes:
        if record["index"] == index:
            break
    else:
        raise TraceError(f"episode {index} not in {path}")

    fresh_record, fresh_lines = run_episode(config, index)
    fresh_e = json.dumps(fresh_record, sort_keys=True)
    stored_e = json.dumps(record, sort_keys=True)
    if fresh_e != stored_e:
        raise ReplayMismatch(f"episode record drifted:\n {stored_e}\n {fresh_e}")
    if config.include_obs and fresh_lines != s_lines:
        raise ReplayMismatch(f"step lines drifted for episode {index}")

    # hand back a live recomputed episode
    seed = record["seed"]
    world = sample_world_seeded(config.env_id, config.mix, seed)
    specs = default_specs(config.reward, config.env_id)
    episode = Episode(world, horizon=config.horizon,
                      include_stop=any(s.needs_stop for s in specs),
                      window=max([config.k] + [s.K for s in specs]))
    agent = make_agent(config.agent)
    agent.begin(episode, Random(mix_seed(seed, 1)))
    while not episode.done:
        episode.step(agent.act(episode))
    return episode
