"""Experiment driver: seeded learner runs with exact value-gap and regret
accounting against the true model, CSV output, and summary statistics.

The harness holds the compiled model; learners receive only a sampling
environment.  Worker fan-out across seeds is capped by TREEBANDIT_THREADS;
results merge in seed order, so output bytes never depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import games
from .estimator import BoundConfig, counts_snapshot_csv
from .learners import (
    EventSink,
    StopEvent,
    flat_lucb,
    lucb_t,
    lucb_t_uniform,
    ucb_t,
)
from .oracle import (
    CLASS_GUARD,
    GapReport,
    count_policy_classes,
    gap_report,
    gap_report_csv,
    optimal_value,
)
from .tree import TmdpEnv, TreeMdp
import random

ALGOS = ("lucb-t", "lucb-t-uniform", "ucb-t", "flat-lucb")

PROGRESS_HEADER = "seed,episode,algo,value_gap,cum_regret,stopped"
SUMMARY_HEADER = "algo,game,role,epsilon,delta,mean_episodes,se_episodes,mistake_rate"


@dataclass(frozen=True)
class RunConfig:
    game: str
    role: str = "x"
    algo: str = "lucb-t"
    epsilon: float = 0.1
    delta: float = 0.1
    bound: str = "practical"
    c: float = 0.1
    opponent: str = "nash:alpha=0.3333333333333333"
    seeds: tuple[int, ...] = (0,)
    budget: int = 1_000_000
    stride: int = 1000
    out_dir: str | None = None

    def validate(self) -> None:
        games.GameSpec(self.game, self.role)  # raises on bad ids
        if self.algo not in ALGOS:
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if not self.seeds:
            raise ValueError("seed list is empty")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.opponent.startswith("file:"):
            path = self.opponent[5:]
            if not os.path.exists(path):
                raise FileNotFoundError(f"opponent strategy file {path!r} not found")


def parse_opponent(spec: games.GameSpec, descriptor: str) -> games.OpponentStrategy:
    if descriptor == "uniform":
        return games.builtin_opponent(spec, "uniform")
    if descriptor.startswith("nash"):
        alpha = 1.0 / 3.0
        if ":" in descriptor:
            key, _, val = descriptor.partition(":")[2].partition("=")
            if key != "alpha":
                raise ValueError(f"unknown nash parameter {key!r}")
            alpha = float(val)
        return games.builtin_opponent(spec, "kuhn_nash", alpha=alpha)
    if descriptor.startswith("file:"):
        return games.load_strategy(descriptor[5:])
    raise ValueError(f"unknown opponent descriptor {descriptor!r}")


def bound_config(config: RunConfig, spec: games.GameSpec, mdp: TreeMdp) -> BoundConfig:
    """Problem constants from the game's action alphabet (not the per-state
    legal subsets), so widths match the policy-count bound of the schedule."""
    return BoundConfig.for_tree(
        mdp,
        num_actions=spec.num_actions,
        mode=config.bound,
        c=config.c,
        delta=config.delta,
        epsilon=config.epsilon,
        schedule="lucb",
    )


class ValueTable:
    """Exact policy values by consistent-terminal signature (true model)."""

    def __init__(self, mdp: TreeMdp):
        profiles = mdp.profiles()
        self._weights = [q * r for q, r in zip(profiles.q, profiles.rho)]
        self.v_star = optimal_value(mdp)
        self._cache: dict[tuple[int, ...], float] = {}

    def value(self, sig: tuple[int, ...]) -> float:
        v = self._cache.get(sig)
        if v is None:
            w = self._weights
            v = self._cache[sig] = sum(w[t] for t in sig)
        return v

    def gap(self, sig: tuple[int, ...]) -> float:
        return max(0.0, self.v_star - self.value(sig))


class _ProgressSink(EventSink):
    """Accumulates exact per-episode regret and emits stride rows."""

    def __init__(self, seed: int, algo: str, stride: int, values: ValueTable):
        self.seed = seed
        self.algo = algo
        self.stride = stride
        self.values = values
        self.rows: list[str] = []
        self.cum_regret = 0.0
        self.pi1_sig: tuple[int, ...] | None = None
        self.last_sig: tuple[int, ...] | None = None
        self.final_sig: tuple[int, ...] | None = None
        self.stop_episode: int | None = None

    def _gap_now(self) -> float:
        sig = self.pi1_sig if self.pi1_sig is not None else self.last_sig
        return self.values.gap(sig) if sig is not None else 0.0

    def episode(self, episode, batch, sig, terminal, phase):
        self.cum_regret += self.values.gap(sig)
        self.last_sig = sig
        if episode % self.stride == 0:
            self.rows.append(
                f"{self.seed},{episode},{self.algo},{self._gap_now()!r},"
                f"{self.cum_regret!r},0"
            )

    def batch_status(self, batch, episode, pi1_sig, lcb1, ucb2):
        self.pi1_sig = pi1_sig

    def stopped(self, event: StopEvent):
        self.pi1_sig = event.policy_sig
        self.stop_episode = event.episode

    def final_row(self, episodes: int, stopped: bool) -> None:
        self.rows.append(
            f"{self.seed},{episodes},{self.algo},{self._gap_now()!r},"
            f"{self.cum_regret!r},{1 if stopped else 0}"
        )


def _run_seed(args):
    mdp, config, bcfg, seed = args
    spec = games.GameSpec(config.game, config.role)
    values = ValueTable(mdp)
    env = TmdpEnv(mdp, random.Random(seed))
    sink = _ProgressSink(seed, config.algo, config.stride, values)
    if config.algo == "ucb-t":
        res = ucb_t(env, bcfg, horizon=config.budget, sink=sink)
        sink.final_row(res.episodes, True)
        return sink.rows, res.episodes, None
    if config.algo == "lucb-t":
        res = lucb_t(env, bcfg, budget=config.budget, sink=sink)
    elif config.algo == "lucb-t-uniform":
        res = lucb_t_uniform(env, bcfg, budget=config.budget, sink=sink)
    else:
        res = flat_lucb(env, bcfg, budget=config.budget, sink=sink)
    sink.final_row(res.episodes, res.converged)
    sig = mdp.structure().consistent_terminals(res.policy)
    mistake = values.value(sig) < values.v_star - config.epsilon - 1e-9
    return sink.rows, res.episodes, (mistake, res.converged)


@dataclass(frozen=True)
class RunResult:
    progress_path: str | None
    summary_path: str | None
    mean_episodes: float
    se_episodes: float
    mistake_rate: float | None
    episodes: tuple[int, ...]


def run(config: RunConfig) -> RunResult:
    """Compile once, run every seed, write progress and summary CSVs."""
    config.validate()
    spec = games.GameSpec(config.game, config.role)
    opponent = parse_opponent(spec, config.opponent)
    mdp = games.compile(spec, opponent)
    bcfg = bound_config(config, spec, mdp)

    jobs = [(mdp, config, bcfg, seed) for seed in config.seeds]
    threads = int(os.environ.get("TREEBANDIT_THREADS", "1"))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(j) for j in jobs]

    episodes = tuple(r[1] for r in results)
    mean = sum(episodes) / len(episodes)
    if len(episodes) > 1:
        var = sum((e - mean) ** 2 for e in episodes) / (len(episodes) - 1)
        se = math.sqrt(var / len(episodes))
    else:
        se = 0.0
    pac = [r[2] for r in results if r[2] is not None]
    mistake_rate = (
        sum(1 for m, _ in pac if m) / len(pac) if pac else None
    )

    progress_path = summary_path = None
    if config.out_dir is not None:
        os.makedirs(config.out_dir, exist_ok=True)
        progress_path = os.path.join(config.out_dir, "progress.csv")
        with open(progress_path, "w", encoding="utf-8") as fh:
            fh.write(PROGRESS_HEADER + "\n")
            for rows, _, _ in results:
                for row in rows:
                    fh.write(row + "\n")
        summary_path = os.path.join(config.out_dir, "summary.csv")
        rate = "" if mistake_rate is None else repr(mistake_rate)
        with open(summary_path, "w", encoding="utf-8") as fh:
            fh.write(SUMMARY_HEADER + "\n")
            fh.write(
                f"{config.algo},{config.game},{config.role},{config.epsilon!r},"
                f"{config.delta!r},{mean!r},{se!r},{rate}\n"
            )
        _maybe_write_gap_report(mdp, config)
    return RunResult(progress_path, summary_path, mean, se, mistake_rate, episodes)


def _maybe_write_gap_report(mdp: TreeMdp, config: RunConfig) -> None:
    if count_policy_classes(mdp) > CLASS_GUARD:
        return
    report = gap_report(mdp, config.epsilon)
    cls_csv, term_csv = gap_report_csv(report)
    with open(os.path.join(config.out_dir, "gaps_classes.csv"), "w",
              encoding="utf-8") as fh:
        fh.write(cls_csv)
    with open(os.path.join(config.out_dir, "gaps_terminals.csv"), "w",
              encoding="utf-8") as fh:
        fh.write(term_csv)


def write_counts_snapshot(counts, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(counts_snapshot_csv(counts))


def compute_regret(events, report: GapReport) -> list[float]:
    """Cumulative regret series from an event stream, using the exact class
    values of the gap report."""
    out = []
    total = 0.0
    for ev in events:
        try:
            idx = report.class_of(ev.policy_sig)
        except KeyError as exc:
            raise RuntimeError(
                f"played class {ev.policy_sig} missing from the gap report"
            ) from exc
        total += report.optimal_value - report.values[idx]
        out.append(total)
    return out
