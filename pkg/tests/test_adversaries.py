"""Tests for request generators and the closed-loop strategy."""

import itertools
import random

import pytest

from gks.core import Instance, InvalidInputError, ResourceLimitError, satisfies
from gks.algorithms import ALGORITHMS, GenericAlgorithm, RandomizedAlgorithm
from gks.adversaries import (
    antipodal_next,
    evasive_next,
    random_sequence,
    run_closed_loop,
    run_evasive,
)
from gks.offline import opt_cost


def test_antipodal_examples():
    inst3 = Instance.uniform(3, 2)
    assert antipodal_next(inst3, (0, 0, 0)) == (1, 1, 1)
    inst2 = Instance.uniform(2, 2)
    assert antipodal_next(inst2, (0, 1)) == (1, 0)


def test_antipodal_unique_unsatisfied():
    inst = Instance.uniform(3, 2)
    for current in itertools.product((0, 1), repeat=3):
        r = antipodal_next(inst, current)
        assert not satisfies(current, r)
        for other in itertools.product((0, 1), repeat=3):
            if other != current:
                assert satisfies(other, r)


def test_antipodal_needs_two_point_metrics():
    with pytest.raises(InvalidInputError):
        antipodal_next(Instance.make([2, 3]), (0, 0))


def test_evasive_never_satisfied_and_reproducible():
    inst = Instance.make([2, 3, 5])
    for seed in range(5):
        rng1, rng2 = random.Random(seed), random.Random(seed)
        cur = (0, 1, 4)
        stream1 = [evasive_next(inst, cur, rng1) for _ in range(50)]
        stream2 = [evasive_next(inst, cur, rng2) for _ in range(50)]
        assert stream1 == stream2
        for r in stream1:
            assert not satisfies(cur, r)


def test_evasive_on_two_points_is_antipodal():
    inst = Instance.uniform(4, 2)
    rng = random.Random(0)
    for current in itertools.product((0, 1), repeat=4):
        assert evasive_next(inst, current, rng) == antipodal_next(inst, current)


def test_run_evasive_forces_every_request():
    inst = Instance.uniform(2, 4)
    alg = GenericAlgorithm(inst)
    seq = run_evasive(alg, 100, seed=5)
    assert len(seq) == 100
    assert all(s.moved for s in alg.transcript)
    assert alg.total_cost >= 100


def test_closed_loop_single_server():
    inst = Instance.uniform(1, 2)
    alg = GenericAlgorithm(inst)
    result = run_closed_loop(alg, rounds=6)
    assert result.rounds_completed == 6
    # one move per round visits both points; a clairvoyant mover pays at
    # most one per round as well
    assert result.algorithm_cost >= 6
    assert opt_cost(inst, (0,), result.requests) <= 6


def test_closed_loop_terminates_and_pays_per_round():
    for alg_id in ["det", "alt", "rand"]:
        for k in [2, 3, 4]:
            inst = Instance.uniform(k, 2)
            cls = ALGORITHMS[alg_id]
            alg = cls(inst, 3) if cls is RandomizedAlgorithm else cls(inst)
            result = run_closed_loop(alg, rounds=3)
            assert result.adversary_model == (
                "oblivious-invalid" if alg_id == "rand" else "deterministic")
            # visiting 2^k configurations takes at least 2^k - 1 paid moves
            for length in result.round_lengths:
                assert length >= 2 ** k - 1
            assert result.algorithm_cost >= 3 * (2 ** k - 1)


def test_closed_loop_ratio_bound_small():
    inst = Instance.uniform(3, 2)
    alg = GenericAlgorithm(inst)
    result = run_closed_loop(alg, rounds=10)
    opt = opt_cost(inst, (0, 0, 0), result.requests)
    ratio = result.algorithm_cost / opt
    assert ratio >= 0.9 * (2 ** 3 - 1) / 3


def test_closed_loop_step_cap():
    inst = Instance.uniform(2, 2)
    alg = GenericAlgorithm(inst)
    with pytest.raises(ResourceLimitError):
        run_closed_loop(alg, rounds=1, step_cap=1)


def test_closed_loop_sequence_replayable(tmp_path):
    from gks.core import read_sequence, write_sequence

    inst = Instance.uniform(2, 2)
    alg = GenericAlgorithm(inst)
    result = run_closed_loop(alg, rounds=4)
    path = tmp_path / "duel.gks"
    write_sequence(path, inst, result.requests)
    inst2, seq2 = read_sequence(path)
    assert seq2 == result.requests
    replay = GenericAlgorithm(inst2)
    replay.run(seq2)
    assert replay.total_cost == result.algorithm_cost
