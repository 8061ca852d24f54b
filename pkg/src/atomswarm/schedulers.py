"""Activation policies and fairness auditing.

A policy picks, per step, a nonempty subset of the eligible (non-removed)
robots. Policies are stateful objects owned by a single execution; build a
fresh one per trial.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .engine import CoinOverrides, RobotId

__all__ = [
    "ActivationPolicy",
    "CentralizedFairPolicy",
    "ProbabilisticPolicy",
    "KBoundedPolicy",
    "ScriptedPolicy",
    "AuditReport",
    "audit",
    "scripted_policy_from",
    "load_script",
]


class ActivationPolicy:
    def next_activation(self, eligible: frozenset[RobotId], rng: random.Random) -> frozenset[RobotId]:
        raise NotImplementedError


class CentralizedFairPolicy(ActivationPolicy):
    """Round-robin over robot ids; exactly one robot per step.

    Robots that leave the eligible set (crash-removed) are skipped; frozen
    robots still take their turn as no-ops.
    """

    def __init__(self) -> None:
        self._last: RobotId | None = None

    def next_activation(self, eligible, rng):
        order = sorted(eligible)
        if not order:
            raise ValueError("eligible set must be nonempty")
        if self._last is None:
            pick = order[0]
        else:
            later = [r for r in order if r > self._last]
            pick = later[0] if later else order[0]
        self._last = pick
        return frozenset((pick,))


class ProbabilisticPolicy(ActivationPolicy):
    """Uniform draw over the nonempty subsets of the eligible robots.

    With ``independent_coins=True`` each robot is instead activated by an
    independent Bernoulli(activation_probability) coin, resampling whenever
    the drawn subset comes out empty. At probability 1/2 the two modes give
    the same distribution; the flag exists for sensitivity checks at other
    activation probabilities.
    """

    def __init__(self, independent_coins: bool = False, activation_probability: float = 0.5):
        if not 0.0 < activation_probability < 1.0:
            raise ValueError("activation_probability must lie strictly between 0 and 1")
        self._independent = independent_coins
        self._p = activation_probability

    def next_activation(self, eligible, rng):
        order = sorted(eligible)
        if not order:
            raise ValueError("eligible set must be nonempty")
        if self._independent:
            while True:
                chosen = frozenset(r for r in order if rng.random() < self._p)
                if chosen:
                    return chosen
        mask = rng.randrange(1, 1 << len(order))
        return frozenset(r for i, r in enumerate(order) if mask >> i & 1)


class KBoundedPolicy(ActivationPolicy):
    """One robot per step, kept k-bounded by construction.

    Between two consecutive activations of any robot, no other robot may run
    more than k times. The policy tracks, for every waiting robot, how often
    each other robot ran since the waiter's last turn, and picks uniformly
    among the robots whose activation keeps every bound intact. A robot that
    waited longest is always safe, so the candidate set is never empty.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self._since: dict[RobotId, Counter] = {}

    def next_activation(self, eligible, rng):
        order = sorted(eligible)
        if not order:
            raise ValueError("eligible set must be nonempty")
        population = set(order)
        for gone in set(self._since) - population:
            del self._since[gone]
        for counters in self._since.values():
            for gone in set(counters) - population:
                del counters[gone]
        safe = [
            r
            for r in order
            if all(
                self._since.get(waiting, _NO_COUNTS).get(r, 0) < self.k
                for waiting in order
                if waiting != r
            )
        ]
        if not safe:
            raise RuntimeError("no activation satisfies the k bound")
        pick = safe[rng.randrange(len(safe))] if len(safe) > 1 else safe[0]
        for waiting in order:
            if waiting != pick:
                self._since.setdefault(waiting, Counter())[pick] += 1
        self._since[pick] = Counter()
        return frozenset((pick,))


_NO_COUNTS: Counter = Counter()


class ScriptedPolicy(ActivationPolicy):
    """Replay of a fixed activation sequence; may be unfair on purpose.

    Carries the coin overrides from its script so a runner can hand them to
    the engine for derandomized replays.
    """

    def __init__(
        self,
        activations: Sequence[Iterable[RobotId]],
        coin_overrides: CoinOverrides | None = None,
    ):
        self._script = [frozenset(a) for a in activations]
        if any(not a for a in self._script):
            raise ValueError("scripted activation sets must be nonempty")
        self.coin_overrides = coin_overrides
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._script)

    def next_activation(self, eligible, rng):
        if self._cursor >= len(self._script):
            raise RuntimeError("script exhausted")
        chosen = self._script[self._cursor]
        self._cursor += 1
        if not chosen <= eligible:
            raise ValueError(
                f"scripted activation {sorted(chosen)} not within eligible robots {sorted(eligible)}"
            )
        return chosen


@dataclass(frozen=True)
class AuditReport:
    fair: bool
    k_compliant: bool | None
    violations: tuple[str, ...]


def audit(
    history: Sequence[Iterable[RobotId]],
    population: Iterable[RobotId],
    k: int | None = None,
    window: int | None = None,
) -> AuditReport:
    """Check window-fairness and the k-bounded condition on a finite trace.

    Fairness uses the finite proxy: every complete sliding window of the
    given length (default ``|population| * max(k, 1) * 4``) must activate
    every robot at least once; shorter histories pass vacuously. The k
    condition requires that while any robot waits between two of its
    activations, no other robot runs more than k times; the trace start and
    end count as waiting boundaries, so a robot monopolizing the prefix
    before someone's first turn is a violation too.
    """
    pop = sorted(set(population))
    if not pop:
        raise ValueError("population must be nonempty")
    sets = [frozenset(s) for s in history]
    if window is None:
        window = len(pop) * (k if k else 1) * 4
    if window < 1:
        raise ValueError("window must be positive")

    violations: list[str] = []
    fair = True
    if len(sets) >= window:
        in_window: Counter = Counter()
        for s in sets[:window]:
            for r in s:
                in_window[r] += 1
        for start in range(len(sets) - window + 1):
            if start > 0:
                for r in sets[start - 1]:
                    in_window[r] -= 1
                for r in sets[start + window - 1]:
                    in_window[r] += 1
            missing = [r for r in pop if in_window[r] == 0]
            if missing:
                fair = False
                violations.append(
                    f"window starting at step {start} never activates robots {missing}"
                )
                break

    k_compliant: bool | None = None
    if k is not None:
        if k < 1:
            raise ValueError("k must be >= 1")
        k_compliant = True
        prefix = {r: [0] * (len(sets) + 1) for r in pop}
        for t, s in enumerate(sets):
            for r in pop:
                prefix[r][t + 1] = prefix[r][t] + (1 if r in s else 0)
        for r in pop:
            boundaries = [-1] + [t for t, s in enumerate(sets) if r in s] + [len(sets)]
            for a, b in zip(boundaries, boundaries[1:]):
                for other in pop:
                    if other == r:
                        continue
                    between = prefix[other][b] - prefix[other][a + 1]
                    if between > k:
                        k_compliant = False
                        violations.append(
                            f"robot {other} ran {between} times between steps {a} and {b} "
                            f"while robot {r} waited (k={k})"
                        )
                        break
                else:
                    continue
                break
    return AuditReport(fair, k_compliant, tuple(violations))


def scripted_policy_from(data: dict) -> ScriptedPolicy:
    """Build a scripted policy from its JSON object form.

    Schema: ``{"activations": [[ids...], ...], "coins": [{"step": s,
    "robot": r, "bits": [...]}, ...]}``. Coin bits are consumed in order by
    the program's binary decisions at that activation; bit 1 means the coin
    succeeds (the guarded branch is taken).
    """
    try:
        activations = data["activations"]
    except KeyError as exc:
        raise ValueError("script needs an 'activations' list") from exc
    overrides = None
    if data.get("coins"):
        bits = {}
        for entry in data["coins"]:
            key = (int(entry["step"]), int(entry["robot"]))
            if key in bits:
                raise ValueError(f"duplicate coin override for step {key[0]}, robot {key[1]}")
            bits[key] = tuple(int(b) for b in entry["bits"])
        overrides = CoinOverrides(bits)
    return ScriptedPolicy([frozenset(int(r) for r in a) for a in activations], overrides)


def load_script(path) -> ScriptedPolicy:
    """Read a scripted policy (activations plus coin overrides) from a JSON file."""
    with open(Path(path)) as fh:
        return scripted_policy_from(json.load(fh))
