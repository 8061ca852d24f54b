"""Atomic observe-compute-move execution engine.

Robots are oblivious: a program is a pure function of the observed snapshot,
the robot's own position and fresh randomness. Every robot activated in the
same step observes the same pre-step snapshot, and motion is rigid (the robot
is placed exactly at the destination it computed). Crash-frozen robots stay
observable but never move; crash-removed robots disappear from every later
observation.
"""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .geometry import Point

RobotId = int


class RobotStatus(Enum):
    CORRECT = "correct"
    CRASHED_FROZEN = "crashed_frozen"
    CRASHED_REMOVED = "crashed_removed"
    BYZANTINE = "byzantine"


# What a robot sees: the positions of every non-removed robot, its own included.
Observation = tuple[Point, ...]


class RandomSource:
    """Randomness handed to a robot program for a single activation.

    Binary decisions go through :meth:`coin`, which consumes scripted override
    bits first when any are present (bit 1 means the coin succeeds, i.e. the
    guarded branch is taken). Continuous draws are never scripted.
    """

    __slots__ = ("_rng", "_bits")

    def __init__(self, rng: random.Random, bits: Sequence[int] | None = None):
        self._rng = rng
        self._bits = deque(bits) if bits else None

    def coin(self, p_true: float) -> bool:
        if self._bits:
            return bool(self._bits.popleft())
        return self._rng.random() < p_true

    def choose(self, items: Sequence):
        """Uniform choice; a single-item sequence consumes no randomness."""
        if not items:
            raise ValueError("choose from an empty sequence")
        if len(items) == 1:
            return items[0]
        return items[self._rng.randrange(len(items))]

    def uniform(self, low: float, high: float) -> float:
        return self._rng.uniform(low, high)


RobotProgram = Callable[[Observation, Point, RandomSource], Point]


@dataclass(frozen=True)
class CoinOverrides:
    """Scripted coin outcomes keyed by (step index, robot id).

    The step index is the value of ``Configuration.step_index`` before the
    step executes, i.e. the position of the activation in the schedule.
    """

    bits: Mapping[tuple[int, RobotId], Sequence[int]]

    def for_activation(self, step_index: int, robot: RobotId) -> Sequence[int] | None:
        return self.bits.get((step_index, robot))


class MotionStrategy(Protocol):
    """Destination rule for a Byzantine robot (sees the full configuration)."""

    def destination(self, config: "Configuration", robot: RobotId) -> Point: ...


@dataclass(frozen=True)
class Configuration:
    """World state: robot id -> (position, status), plus the step counter."""

    robots: Mapping[RobotId, tuple[Point, RobotStatus]]
    step_index: int = 0

    def ids(self) -> list[RobotId]:
        return sorted(self.robots)

    def position_of(self, robot: RobotId) -> Point:
        return self.robots[robot][0]

    def status_of(self, robot: RobotId) -> RobotStatus:
        return self.robots[robot][1]

    def visible_items(self) -> list[tuple[RobotId, Point, RobotStatus]]:
        """(id, position, status) for every non-removed robot, id order."""
        return [
            (rid, pos, status)
            for rid, (pos, status) in sorted(self.robots.items())
            if status is not RobotStatus.CRASHED_REMOVED
        ]

    def snapshot(self) -> Observation:
        """Positions of all non-removed robots: what any observer sees."""
        return tuple(pos for _, pos, _ in self.visible_items())

    def eligible(self) -> frozenset[RobotId]:
        """Robots a scheduler may activate (everything not removed)."""
        return frozenset(rid for rid, _, _ in self.visible_items())

    def correct_positions(self) -> list[Point]:
        return [pos for _, pos, status in self.visible_items() if status is RobotStatus.CORRECT]


def configuration_from_positions(
    positions: Iterable,
    byzantine_ids: Iterable[RobotId] = (),
    frozen_ids: Iterable[RobotId] = (),
) -> Configuration:
    """Build a step-0 configuration from positions (Points or (x, y) pairs)."""
    byzantine_ids = frozenset(byzantine_ids)
    frozen_ids = frozenset(frozen_ids)
    robots: dict[RobotId, tuple[Point, RobotStatus]] = {}
    for rid, pos in enumerate(positions):
        if not isinstance(pos, Point):
            pos = Point(*pos)
        status = RobotStatus.CORRECT
        if rid in byzantine_ids:
            status = RobotStatus.BYZANTINE
        elif rid in frozen_ids:
            status = RobotStatus.CRASHED_FROZEN
        robots[rid] = (pos, status)
    if not robots:
        raise ValueError("a configuration needs at least one robot")
    return Configuration(robots, 0)


def step(
    config: Configuration,
    activated: Iterable[RobotId],
    program: RobotProgram,
    byzantine: Mapping[RobotId, MotionStrategy] | None = None,
    rng: random.Random | None = None,
    coin_overrides: CoinOverrides | None = None,
) -> Configuration:
    """Execute one atomic activation step.

    Every activated robot observes the same pre-step snapshot. Correct robots
    run ``program``; Byzantine robots follow their strategy; crash-frozen
    robots are legal to activate but do nothing. Activating a crash-removed
    robot violates the scheduler contract and raises.
    """
    activated = sorted(set(activated))
    if not activated:
        raise ValueError("activated set must be nonempty")
    byzantine = byzantine or {}
    rng = rng if rng is not None else random.Random()
    view = config.snapshot()
    new_robots = dict(config.robots)
    for rid in activated:
        if rid not in config.robots:
            raise ValueError(f"unknown robot id {rid}")
        pos, status = config.robots[rid]
        if status is RobotStatus.CRASHED_REMOVED:
            raise ValueError("scheduler contract violation: removed robot activated")
        if status is RobotStatus.CRASHED_FROZEN:
            continue
        if status is RobotStatus.BYZANTINE:
            strategy = byzantine.get(rid)
            dest = strategy.destination(config, rid) if strategy is not None else pos
        else:
            bits = coin_overrides.for_activation(config.step_index, rid) if coin_overrides else None
            dest = program(view, pos, RandomSource(rng, bits))
        if not isinstance(dest, Point):
            dest = Point(*dest)
        new_robots[rid] = (dest, status)
    return Configuration(new_robots, config.step_index + 1)


def is_gathered(config: Configuration, weak: bool = False) -> bool:
    """Strong: all non-removed robots co-located. Weak: correct robots only."""
    if weak:
        positions = config.correct_positions()
    else:
        positions = list(config.snapshot())
    return len(set(positions)) <= 1


def is_scattered(config: Configuration, weak: bool = False) -> bool:
    """Strong: no two non-removed robots share a position.

    Weak: no correct robot shares its position with any other non-removed
    robot; co-located faulty robots are exempt.
    """
    counts = Counter(config.snapshot())
    if not weak:
        return all(c == 1 for c in counts.values())
    return all(counts[pos] == 1 for pos in config.correct_positions())


def rounds_elapsed(
    history: Sequence[Iterable[RobotId]], population: Iterable[RobotId]
) -> int:
    """Completed rounds in an activation history.

    Greedily partitions the history into minimal-length prefixes in which
    every robot of the population appears at least once and returns how many
    such prefixes complete. A trailing fragment that has not yet covered the
    population does not count.
    """
    population = set(population)
    if not population:
        raise ValueError("population must be nonempty")
    pending = set(population)
    rounds = 0
    for activated in history:
        pending -= set(activated)
        if not pending:
            rounds += 1
            pending = set(population)
    return rounds


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one execution: convergence flag, cost metrics, final state."""

    converged: bool
    steps: int
    rounds: int
    final: Configuration
    activation_history: tuple[frozenset[RobotId], ...] | None = None


def trace_record(config: Configuration, activated: Iterable[RobotId]) -> dict:
    """One JSONL trace line: step, activated ids, positions, statuses."""
    positions = {}
    statuses = {}
    for rid, (pos, status) in sorted(config.robots.items()):
        statuses[str(rid)] = status.value
        if status is not RobotStatus.CRASHED_REMOVED:
            positions[str(rid)] = [pos.x, pos.y]
    return {
        "step": config.step_index,
        "activated": sorted(activated),
        "positions": positions,
        "statuses": statuses,
    }


def run(
    initial: Configuration,
    policy,
    program: RobotProgram,
    plan=None,
    predicate: Callable[[Configuration], bool] = is_gathered,
    max_steps: int = 10_000,
    seed: int = 0,
    *,
    coin_overrides: CoinOverrides | None = None,
    record_history: bool = False,
    on_step: Callable[[dict], None] | None = None,
) -> TrialRecord:
    """Drive a full execution until the predicate holds or the horizon ends.

    Per iteration: query the policy, execute the step, evaluate the predicate,
    then fire any due crash triggers from the fault plan (so condition
    triggers see the post-step configuration before the next scheduler
    query). Crashes scheduled for step 0 and Byzantine statuses from the plan
    are applied before the initial predicate check. ``steps`` counts scheduler
    activations consumed; ``rounds`` counts completed rounds over the current
    non-removed population.
    """
    if max_steps <= 0:
        raise ValueError("max_steps must be positive")
    rng = random.Random(seed)
    byzantine = dict(plan.byzantine) if plan is not None else {}
    robots = dict(initial.robots)
    for rid in byzantine:
        if rid not in robots:
            raise ValueError(f"byzantine robot {rid} not in the configuration")
        robots[rid] = (robots[rid][0], RobotStatus.BYZANTINE)
    config = Configuration(robots, initial.step_index)
    fault_state = plan.new_state() if plan is not None else None
    if plan is not None:
        config = plan.fire(config, fault_state)

    history: list[frozenset[RobotId]] = []
    rounds = 0
    seen: set[RobotId] = set()
    start = config.step_index
    if on_step is not None:
        on_step(trace_record(config, ()))
    if predicate(config):
        return TrialRecord(True, 0, 0, config, tuple(history) if record_history else None)

    converged = False
    while config.step_index - start < max_steps:
        eligible = config.eligible()
        if not eligible:
            raise RuntimeError("no robots left to activate")
        activated = frozenset(policy.next_activation(eligible, rng))
        config = step(config, activated, program, byzantine, rng, coin_overrides)
        if record_history:
            history.append(activated)
        seen |= activated
        if config.eligible() <= seen:
            rounds += 1
            seen = set()
        if on_step is not None:
            on_step(trace_record(config, activated))
        if predicate(config):
            converged = True
            break
        if plan is not None:
            config = plan.fire(config, fault_state)
    return TrialRecord(
        converged,
        config.step_index - start,
        rounds,
        config,
        tuple(history) if record_history else None,
    )
