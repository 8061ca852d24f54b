"""Experiment harness: configs, batch trial running, statistics, scenarios.

An experiment is described by a plain-data config (JSON friendly), expanded
per trial into fresh policy/program/plan objects. Trial seeds are derived
from the experiment seed through independent substreams, so a batch replays
identically for any worker count and trial order.
"""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from itertools import repeat
from pathlib import Path

import numpy as np

from . import engine
from .engine import (
    CoinOverrides,
    Configuration,
    TrialRecord,
    configuration_from_positions,
    is_gathered,
    is_scattered,
)
from .faults import FaultPlan, OscillatorStrategy, fault_plan_from_dict
from .geometry import Point
from .programs import make_program
from .schedulers import (
    CentralizedFairPolicy,
    KBoundedPolicy,
    ProbabilisticPolicy,
    ScriptedPolicy,
    audit,
    load_script,
    scripted_policy_from,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "TrialStats",
    "TheoryComparison",
    "CounterexampleReport",
    "FlipFlopReport",
    "build_initial",
    "build_policy",
    "build_program",
    "build_plan",
    "build_predicate",
    "derive_trial_seeds",
    "run_single_trial",
    "run_experiment",
    "aggregate_trials",
    "write_outputs",
    "read_trials_csv",
    "compare_to_theory",
    "simulate_once",
    "build_counterexample",
    "replay_counterexample",
    "build_flip_flop_witness",
    "run_flip_flop_witness",
]


class ConfigError(ValueError):
    """An experiment configuration that cannot be run."""


SCHEDULER_NAMES = ("centralized-fair", "probabilistic", "k-bounded", "scripted")
LAYOUT_NAMES = ("all-at-one-point", "two-groups", "random-uniform", "explicit")
PREDICATE_NAMES = ("gathering", "scattering")


@dataclass
class ExperimentConfig:
    """Plain-data description of a batch of trials.

    ``out_dir`` and ``workers`` only affect where results land and how fast
    they are produced, never their content; they are stripped from the
    summary echo so reruns compare byte for byte.
    """

    n: int
    program: str = "multiplicity-gather"
    program_params: dict = field(default_factory=dict)
    scheduler: str = "centralized-fair"
    scheduler_params: dict = field(default_factory=dict)
    layout: str = "random-uniform"
    layout_params: dict = field(default_factory=dict)
    predicate: str = "gathering"
    weak: bool = False
    faults: dict | None = None
    trials: int = 1
    max_steps: int = 10_000
    seed: int = 0
    out_dir: str | None = None
    workers: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        if "n" not in data:
            raise ConfigError("config needs a robot count 'n'")
        return cls(**data)

    def to_dict(self, include_runtime: bool = True) -> dict:
        data = asdict(self)
        if not include_runtime:
            del data["out_dir"]
            del data["workers"]
        return data

    def validate(self) -> "ExperimentConfig":
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.predicate not in PREDICATE_NAMES:
            raise ConfigError(
                f"unknown predicate {self.predicate!r}; available: {', '.join(PREDICATE_NAMES)}"
            )
        build_program(self.program, self.program_params)
        build_policy(self.scheduler, self.scheduler_params)
        plan = build_plan(self.faults)
        if plan is not None:
            for rid in plan.byzantine:
                if not 0 <= rid < self.n:
                    raise ConfigError(f"byzantine robot {rid} outside 0..{self.n - 1}")
            for event in plan.crashes:
                if event.robot is not None and not 0 <= event.robot < self.n:
                    raise ConfigError(f"crash robot {event.robot} outside 0..{self.n - 1}")
        build_initial(self, random.Random(0))
        return self


def build_initial(config: ExperimentConfig, rng: random.Random) -> list[Point]:
    """Initial positions for one trial; random layouts draw from ``rng``."""
    name, params, n = config.layout, config.layout_params, config.n
    if name == "all-at-one-point":
        x, y = params.get("point", (0.0, 0.0))
        return [Point(float(x), float(y))] * n
    if name == "two-groups":
        sizes = params.get("sizes", (n - n // 2, n // 2))
        points = params.get("points", ((0.0, 0.0), (1.0, 0.0)))
        if len(sizes) != 2 or len(points) != 2:
            raise ConfigError("two-groups layout needs two sizes and two points")
        if sizes[0] + sizes[1] != n:
            raise ConfigError(f"two-groups sizes {list(sizes)} must sum to n={n}")
        first, second = (Point(float(p[0]), float(p[1])) for p in points)
        return [first] * sizes[0] + [second] * sizes[1]
    if name == "random-uniform":
        box = params.get("box", (0.0, 0.0, 1.0, 1.0))
        if len(box) != 4 or not (box[0] < box[2] and box[1] < box[3]):
            raise ConfigError("random-uniform box must be (xmin, ymin, xmax, ymax)")
        return [
            Point(rng.uniform(box[0], box[2]), rng.uniform(box[1], box[3]))
            for _ in range(n)
        ]
    if name == "explicit":
        positions = params.get("positions")
        if positions is None:
            raise ConfigError("explicit layout needs 'positions'")
        if len(positions) != n:
            raise ConfigError(f"explicit layout has {len(positions)} positions for n={n}")
        return [Point(float(p[0]), float(p[1])) for p in positions]
    raise ConfigError(f"unknown layout {name!r}; available: {', '.join(LAYOUT_NAMES)}")


def build_program(name: str, params: dict):
    try:
        return make_program(name, **(params or {}))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_policy(name: str, params: dict):
    """A fresh scheduler instance (policies are stateful, one per trial)."""
    params = dict(params or {})
    if name == "centralized-fair":
        if params:
            raise ConfigError("centralized-fair scheduler takes no parameters")
        return CentralizedFairPolicy()
    if name == "probabilistic":
        try:
            return ProbabilisticPolicy(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad probabilistic scheduler parameters: {exc}") from None
    if name == "k-bounded":
        try:
            return KBoundedPolicy(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad k-bounded scheduler parameters: {exc}") from None
    if name == "scripted":
        try:
            if "path" in params:
                return load_script(params["path"])
            if "script" in params:
                return scripted_policy_from(params["script"])
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad scripted scheduler: {exc}") from None
        raise ConfigError("scripted scheduler needs 'script' (inline) or 'path'")
    raise ConfigError(f"unknown scheduler {name!r}; available: {', '.join(SCHEDULER_NAMES)}")


def build_plan(faults: dict | None) -> FaultPlan | None:
    if faults is None:
        return None
    try:
        return fault_plan_from_dict(faults)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad fault plan: {exc}") from None


def build_predicate(name: str, weak: bool):
    if name == "gathering":
        base = is_gathered
    elif name == "scattering":
        base = is_scattered
    else:
        raise ConfigError(f"unknown predicate {name!r}; available: {', '.join(PREDICATE_NAMES)}")
    return partial(base, weak=True) if weak else base


def derive_trial_seeds(seed: int, trials: int) -> list[int]:
    """Independent 64-bit seeds, one per trial, from spawned substreams."""
    root = np.random.SeedSequence(seed)
    return [int(child.generate_state(1, np.uint64)[0]) for child in root.spawn(trials)]


def _execute_trial(config: ExperimentConfig, trial_seed: int, on_step=None) -> TrialRecord:
    rng = random.Random(trial_seed)
    positions = build_initial(config, rng)
    plan = build_plan(config.faults)
    policy = build_policy(config.scheduler, config.scheduler_params)
    program = build_program(config.program, config.program_params)
    predicate = build_predicate(config.predicate, config.weak)
    initial = configuration_from_positions(positions)
    engine_seed = rng.randrange(2**63)
    return engine.run(
        initial,
        policy,
        program,
        plan,
        predicate,
        config.max_steps,
        engine_seed,
        coin_overrides=getattr(policy, "coin_overrides", None),
        on_step=on_step,
    )


def run_single_trial(config: ExperimentConfig, trial_index: int, trial_seed: int) -> dict:
    """One trial as a flat record; failures are recorded, not raised."""
    try:
        record = _execute_trial(config, trial_seed)
    except Exception as exc:
        return {
            "trial_id": trial_index,
            "seed": trial_seed,
            "converged": False,
            "steps": None,
            "rounds": None,
            "error": str(exc),
        }
    return {
        "trial_id": trial_index,
        "seed": trial_seed,
        "converged": record.converged,
        "steps": record.steps,
        "rounds": record.rounds,
    }


def _pool_trial(payload: dict, trial_index: int, trial_seed: int) -> dict:
    return run_single_trial(ExperimentConfig.from_dict(payload), trial_index, trial_seed)


@dataclass(frozen=True)
class TrialStats:
    """Batch summary. Step/round moments cover converged trials only."""

    trials: int
    converged: int
    errors: int
    converged_fraction: float
    mean_steps: float | None
    std_steps: float | None
    ci95_steps: tuple[float, float] | None
    mean_rounds: float | None
    std_rounds: float | None
    ci95_rounds: tuple[float, float] | None
    rounds_histogram: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _moments(values: list) -> tuple:
    if not values:
        return None, None, None
    mean = statistics.fmean(values)
    spread = statistics.stdev(values) if len(values) > 1 else 0.0
    half = 1.96 * spread / math.sqrt(len(values))
    return mean, spread, (mean - half, mean + half)


def aggregate_trials(records: list[dict]) -> TrialStats:
    clean = [r for r in records if not r.get("error")]
    converged = [r for r in clean if r["converged"]]
    mean_steps, std_steps, ci_steps = _moments([r["steps"] for r in converged])
    mean_rounds, std_rounds, ci_rounds = _moments([r["rounds"] for r in converged])
    histogram = dict(sorted(Counter(r["rounds"] for r in converged).items()))
    total = len(records)
    return TrialStats(
        trials=total,
        converged=len(converged),
        errors=total - len(clean),
        converged_fraction=len(converged) / total if total else 0.0,
        mean_steps=mean_steps,
        std_steps=std_steps,
        ci95_steps=ci_steps,
        mean_rounds=mean_rounds,
        std_rounds=std_rounds,
        ci95_rounds=ci_rounds,
        rounds_histogram=histogram,
    )


def run_experiment(config: ExperimentConfig) -> tuple[TrialStats, list[dict]]:
    """Run the whole batch, aggregate, and write outputs if requested.

    Results depend only on the config content and seed: trials are keyed by
    derived per-trial seeds and re-sorted by trial id, so any worker count
    produces the same records.
    """
    config.validate()
    seeds = derive_trial_seeds(config.seed, config.trials)
    if config.workers > 1:
        payload = config.to_dict()
        chunk = max(1, config.trials // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(
                pool.map(
                    _pool_trial,
                    repeat(payload),
                    range(config.trials),
                    seeds,
                    chunksize=chunk,
                )
            )
    else:
        records = [run_single_trial(config, i, s) for i, s in enumerate(seeds)]
    records.sort(key=lambda r: r["trial_id"])
    stats = aggregate_trials(records)
    if config.out_dir is not None:
        write_outputs(config, stats, records, config.out_dir)
    return stats, records


def write_outputs(
    config: ExperimentConfig, stats: TrialStats, records: list[dict], out_dir
) -> tuple[Path, Path]:
    """Write trials.csv and summary.json; returns both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "trials.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial_id", "seed", "converged", "steps", "rounds"])
        for r in records:
            failed = bool(r.get("error"))
            writer.writerow(
                [
                    r["trial_id"],
                    r["seed"],
                    "true" if r["converged"] else "false",
                    "" if failed else r["steps"],
                    "" if failed else r["rounds"],
                ]
            )
    summary = {
        "config": config.to_dict(include_runtime=False),
        "stats": stats.to_dict(),
        "errors": [
            {"trial_id": r["trial_id"], "message": r["error"]}
            for r in records
            if r.get("error")
        ],
    }
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return csv_path, summary_path


def read_trials_csv(path) -> list[dict]:
    """Parse a trials.csv back into trial records."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = []
    for row in rows:
        failed = row["steps"] == ""
        record = {
            "trial_id": int(row["trial_id"]),
            "seed": int(row["seed"]),
            "converged": row["converged"] == "true",
            "steps": None if failed else int(row["steps"]),
            "rounds": None if failed else int(row["rounds"]),
        }
        if failed:
            record["error"] = "recorded in summary"
        records.append(record)
    return records


@dataclass(frozen=True)
class TheoryComparison:
    """Observed batch mean against an analytic value, with a tolerance band.

    ``metric`` states explicitly whether rounds or steps were compared; the
    two differ by roughly the robot count under one-robot-per-step
    schedulers, so a comparison that omitted it would be meaningless.
    """

    metric: str
    observed_mean: float | None
    oracle: float
    ratio: float | None
    band: tuple[float, float]
    verdict: str

    def to_dict(self) -> dict:
        return asdict(self)


def compare_to_theory(
    stats: TrialStats, oracle, band: tuple[float, float] = (0.25, 4.0), metric: str = "rounds"
) -> TheoryComparison:
    """Verdict on whether a batch mean is within ``band`` times the oracle.

    ``oracle`` is a number or anything exposing ``expected_steps``. With no
    converged trials the verdict is "no convergence" and the ratio is None.
    """
    value = getattr(oracle, "expected_steps", oracle)
    oracle_value = float(value)
    if oracle_value == 0:
        raise ValueError("oracle value must be nonzero")
    if metric not in ("rounds", "steps"):
        raise ValueError(f"metric must be 'rounds' or 'steps', got {metric!r}")
    low, high = band
    if not 0 < low < high:
        raise ValueError("band must satisfy 0 < low < high")
    observed = stats.mean_rounds if metric == "rounds" else stats.mean_steps
    if stats.converged == 0 or observed is None:
        return TheoryComparison(metric, None, oracle_value, None, (low, high), "no convergence")
    ratio = observed / oracle_value
    verdict = "consistent" if low <= ratio <= high else "inconsistent"
    return TheoryComparison(metric, observed, oracle_value, ratio, (low, high), verdict)


def simulate_once(config: ExperimentConfig, trace_path=None) -> TrialRecord:
    """Single seeded run, optionally exporting a JSONL trace."""
    config.validate()
    trial_seed = derive_trial_seeds(config.seed, 1)[0]
    if trace_path is None:
        return _execute_trial(config, trial_seed)
    with open(trace_path, "w") as fh:
        def sink(line: dict) -> None:
            fh.write(json.dumps(line, sort_keys=True) + "\n")

        return _execute_trial(config, trial_seed, on_step=sink)


# --- Byzantine oscillation scenario -------------------------------------
#
# Four robots in two co-located pairs, one of them Byzantine. A bounded
# scripted scheduler alternates between one correct robot (whose tie coin is
# forced to succeed, sending it to the other group) and the Byzantine robot
# (which rebalances back to two pairs). The population cycles forever and
# weak gathering never holds.

COUNTEREXAMPLE_POSITIONS = (
    Point(0.0, 0.0),
    Point(0.0, 0.0),
    Point(1.0, 0.0),
    Point(1.0, 0.0),
)
COUNTEREXAMPLE_BYZANTINE = 3


def build_counterexample_script(cycles: int) -> ScriptedPolicy:
    """Activation script and forced coins for the oscillation scenario.

    Each 4-activation cycle interleaves two correct movers with two
    Byzantine rebalances. The mover is always drawn from the pair not
    hosting the Byzantine robot (its roommate must stay, or the correct
    robots would accidentally gather), least recently activated first. That
    selection keeps the script fair over any window of six or more steps and
    exactly 3-bounded.
    """
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    last_activated = {0: -1, 1: -1, 2: -1}
    roommate = 2
    activations = []
    bits = {}
    for half_cycle in range(2 * cycles):
        step = 2 * half_cycle
        pair = [r for r in last_activated if r != roommate]
        mover = min(pair, key=lambda r: (last_activated[r], r))
        last_activated[mover] = step
        activations.append({mover})
        bits[(step, mover)] = (1,)
        activations.append({COUNTEREXAMPLE_BYZANTINE})
        roommate = next(r for r in pair if r != mover)
    return ScriptedPolicy(activations, CoinOverrides(bits))


def build_counterexample(cycles: int = 100):
    """Initial configuration, scripted policy and fault plan for the scenario."""
    initial = configuration_from_positions(COUNTEREXAMPLE_POSITIONS)
    plan = FaultPlan(f=1, byzantine={COUNTEREXAMPLE_BYZANTINE: OscillatorStrategy()})
    policy = build_counterexample_script(cycles)
    return initial, policy, plan


def _two_pairs_with_byzantine(trace: dict) -> bool:
    """Does a trace line show two pairs, the Byzantine beside one correct robot?"""
    groups: dict[tuple, list] = {}
    byzantine_positions = []
    for rid, xy in trace["positions"].items():
        pos = tuple(xy)
        groups.setdefault(pos, []).append(rid)
        if trace["statuses"][rid] == "byzantine":
            byzantine_positions.append(pos)
    if len(groups) != 2 or sorted(len(g) for g in groups.values()) != [2, 2]:
        return False
    if len(byzantine_positions) != 1:
        return False
    mates = [
        rid
        for rid in groups[byzantine_positions[0]]
        if trace["statuses"][rid] != "byzantine"
    ]
    return len(mates) == 1


@dataclass(frozen=True)
class CounterexampleReport:
    cycles: int
    gathered: bool
    boundaries_checked: int
    boundaries_isomorphic: int
    first_divergence: int | None
    fair: bool
    k: int
    k_compliant: bool
    broken: bool

    def to_dict(self) -> dict:
        return asdict(self)


def replay_counterexample(cycles: int = 100) -> CounterexampleReport:
    """Deterministic replay of the oscillation scenario with full checking.

    Runs 4*cycles scripted activations under the weak gathering predicate,
    confirms it never holds, and verifies that at every 4-step boundary the
    configuration is isomorphic to the start: two occupied positions with
    two robots each, the Byzantine sharing with exactly one correct robot.
    The activation history is audited for fairness and 3-boundedness.
    """
    initial, policy, plan = build_counterexample(cycles)
    traces: list[dict] = []
    record = engine.run(
        initial,
        policy,
        make_program("multiplicity-gather"),
        plan,
        predicate=partial(is_gathered, weak=True),
        max_steps=4 * cycles,
        seed=0,
        coin_overrides=policy.coin_overrides,
        record_history=True,
        on_step=traces.append,
    )
    boundaries = range(4, 4 * cycles + 1, 4)
    isomorphic = 0
    first_divergence = None
    for step in boundaries:
        if step < len(traces) and _two_pairs_with_byzantine(traces[step]):
            isomorphic += 1
        elif first_divergence is None:
            first_divergence = step
    report = audit(record.activation_history or (), population=range(4), k=3)
    broken = record.converged or isomorphic < len(boundaries) or not report.k_compliant
    return CounterexampleReport(
        cycles=cycles,
        gathered=record.converged,
        boundaries_checked=len(boundaries),
        boundaries_isomorphic=isomorphic,
        first_divergence=first_divergence,
        fair=report.fair,
        k=3,
        k_compliant=bool(report.k_compliant),
        broken=broken,
    )


# --- Flip/flop oscillation witness ---------------------------------------
#
# Two far-apart pairs under the composite program. Scripted coins force a
# full scatter (two multiplicity points seen, everyone moves), after which
# activating one robot per cluster re-pairs them via the nearest tie-break,
# flipping the branch back. The branch alternates every step and gathering
# never holds.

FLIP_FLOP_POSITIONS = (
    Point(0.0, 0.0),
    Point(0.0, 0.0),
    Point(100.0, 100.0),
    Point(100.0, 100.0),
)
FLIP_FLOP_PARAMS = {"tie_break": "nearest", "radius": 1.0}


def build_flip_flop_witness(cycles: int = 5):
    """Initial configuration, scripted policy and program for the witness."""
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    activations = []
    bits = {}
    for cycle in range(cycles):
        step = 2 * cycle
        activations.append({0, 1, 2, 3})
        for rid in range(4):
            bits[(step, rid)] = (1,)
        activations.append({0, 2})
    policy = ScriptedPolicy(activations, CoinOverrides(bits))
    initial = configuration_from_positions(FLIP_FLOP_POSITIONS)
    program = make_program("flip-flop", **FLIP_FLOP_PARAMS)
    return initial, policy, program


@dataclass(frozen=True)
class FlipFlopReport:
    branches: tuple[str, ...]
    oscillations: int
    gathered: bool
    broken: bool

    def to_dict(self) -> dict:
        return asdict(self)


def run_flip_flop_witness(cycles: int = 5, seed: int = 7) -> FlipFlopReport:
    """Replay the witness and count branch alternations.

    Each executed step is classified from its pre-step configuration:
    scatter when at least two positions hold several robots, gather
    otherwise. The report is broken if fewer than 3 alternations occur or
    the run gathers.
    """
    initial, policy, program = build_flip_flop_witness(cycles)
    traces: list[dict] = []
    record = engine.run(
        initial,
        policy,
        program,
        None,
        predicate=is_gathered,
        max_steps=2 * cycles,
        seed=seed,
        coin_overrides=policy.coin_overrides,
        on_step=traces.append,
    )
    branches = []
    for trace in traces[: 2 * cycles]:
        counts = Counter(tuple(xy) for xy in trace["positions"].values())
        crowded = sum(1 for c in counts.values() if c >= 2)
        branches.append("scatter" if crowded >= 2 else "gather")
    oscillations = sum(1 for a, b in zip(branches, branches[1:]) if a != b)
    return FlipFlopReport(
        branches=tuple(branches),
        oscillations=oscillations,
        gathered=record.converged,
        broken=record.converged or oscillations < 3,
    )
