"""Scheduler policies and the fairness / k-bound trace audit."""

import json
import random
from collections import Counter

import pytest

from atomswarm.schedulers import (
    CentralizedFairPolicy,
    KBoundedPolicy,
    ProbabilisticPolicy,
    ScriptedPolicy,
    audit,
    load_script,
    scripted_policy_from,
)


def collect(policy, eligible, steps, seed=0):
    rng = random.Random(seed)
    pool = frozenset(eligible)
    return [policy.next_activation(pool, rng) for _ in range(steps)]


def test_centralized_fair_cycles_through_ids():
    history = collect(CentralizedFairPolicy(), {2, 0, 1}, 7)
    assert history == [frozenset({i}) for i in (0, 1, 2, 0, 1, 2, 0)]


def test_centralized_fair_skips_robots_that_left_the_pool():
    policy = CentralizedFairPolicy()
    rng = random.Random(0)
    assert policy.next_activation(frozenset({0, 1, 2}), rng) == {0}
    assert policy.next_activation(frozenset({0, 2}), rng) == {2}
    assert policy.next_activation(frozenset({0, 2}), rng) == {0}


def test_probabilistic_subsets_are_nonempty_and_eligible():
    policy = ProbabilisticPolicy()
    rng = random.Random(11)
    pool = frozenset({0, 1, 2, 3})
    for _ in range(500):
        chosen = policy.next_activation(pool, rng)
        assert chosen
        assert chosen <= pool


def test_probabilistic_draws_are_uniform_over_nonempty_subsets():
    policy = ProbabilisticPolicy()
    rng = random.Random(5)
    counts = Counter()
    draws = 30_000
    for _ in range(draws):
        counts[policy.next_activation(frozenset({1, 2}), rng)] += 1
    for subset in ({1}, {2}, {1, 2}):
        assert abs(counts[frozenset(subset)] / draws - 1 / 3) < 0.02


def test_independent_coin_mode_never_returns_an_empty_set():
    policy = ProbabilisticPolicy(independent_coins=True, activation_probability=0.05)
    rng = random.Random(1)
    for _ in range(2_000):
        assert policy.next_activation(frozenset({0, 1}), rng)


def test_activation_probability_must_be_strictly_inside_the_unit_interval():
    for bad in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            ProbabilisticPolicy(independent_coins=True, activation_probability=bad)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_k_bounded_policy_passes_its_own_audit(k):
    population = {0, 1, 2, 3, 4}
    history = collect(KBoundedPolicy(k), population, 400, seed=k)
    assert all(len(s) == 1 for s in history)
    report = audit(history, population, k=k)
    assert report.fair, report.violations
    assert report.k_compliant, report.violations


def test_one_bounded_scheduling_alternates_between_two_robots():
    history = collect(KBoundedPolicy(1), {0, 1}, 10)
    flat = [next(iter(s)) for s in history]
    assert all(a != b for a, b in zip(flat, flat[1:]))


def test_k_bounded_rejects_k_below_one():
    with pytest.raises(ValueError):
        KBoundedPolicy(0)


def test_scripted_policies_replay_exactly_and_then_refuse():
    policy = ScriptedPolicy([{0}, {1, 2}])
    rng = random.Random(0)
    pool = frozenset({0, 1, 2})
    assert policy.next_activation(pool, rng) == {0}
    assert policy.next_activation(pool, rng) == {1, 2}
    with pytest.raises(RuntimeError, match="script exhausted"):
        policy.next_activation(pool, rng)


def test_scripted_activations_must_stay_within_the_eligible_set():
    policy = ScriptedPolicy([{5}])
    with pytest.raises(ValueError, match="not within eligible"):
        policy.next_activation(frozenset({0, 1}), random.Random(0))


def test_scripted_policies_reject_empty_sets_up_front():
    with pytest.raises(ValueError, match="nonempty"):
        ScriptedPolicy([{0}, set()])


def test_monopolizing_the_prefix_violates_the_k_bound():
    report = audit([{1}, {1}, {2}], {1, 2}, k=1)
    assert report.k_compliant is False
    assert report.violations


def test_monopolizing_the_suffix_violates_the_k_bound():
    report = audit([{1}, {2}, {2}], {1, 2}, k=1)
    assert report.k_compliant is False


def test_alternating_traces_are_one_bounded():
    report = audit([{1}, {2}, {1}, {2}], {1, 2}, k=1)
    assert report.k_compliant is True


def test_audit_without_k_reports_none():
    report = audit([{1}, {2}], {1, 2})
    assert report.k_compliant is None


def test_round_robin_is_fair_and_one_bounded():
    history = [{0}, {1}, {2}] * 8
    report = audit(history, {0, 1, 2}, k=1, window=6)
    assert report.fair is True
    assert report.k_compliant is True


def test_fairness_fails_when_a_robot_misses_a_whole_window():
    history = [{1}, {2}] * 10
    report = audit(history, {1, 2, 3}, window=4)
    assert report.fair is False
    assert report.violations


def test_histories_shorter_than_the_window_are_vacuously_fair():
    report = audit([{1}], {1, 2}, window=4)
    assert report.fair is True


def test_audit_validates_population_and_window():
    with pytest.raises(ValueError):
        audit([{1}], set(), k=1)
    with pytest.raises(ValueError):
        audit([{1}], {1}, window=0)


def test_script_files_round_trip(tmp_path):
    data = {
        "activations": [[0], [1], [0, 1]],
        "coins": [{"step": 0, "robot": 0, "bits": [1, 0]}],
    }
    path = tmp_path / "script.json"
    path.write_text(json.dumps(data))
    policy = load_script(path)
    assert len(policy) == 3
    assert policy.coin_overrides.for_activation(0, 0) == (1, 0)


def test_duplicate_coin_overrides_are_rejected():
    data = {
        "activations": [[0]],
        "coins": [
            {"step": 0, "robot": 0, "bits": [1]},
            {"step": 0, "robot": 0, "bits": [0]},
        ],
    }
    with pytest.raises(ValueError):
        scripted_policy_from(data)
