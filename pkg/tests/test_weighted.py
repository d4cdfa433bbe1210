"""Tests for constants, weight rounding, and the recursive weighted algorithm."""

import random
from fractions import Fraction

import pytest

from gks.core import Instance, InvalidInputError, satisfies
from gks.adversaries import evasive_next
from gks.weighted import (
    ConstantTable,
    WeightedAlgorithm,
    constants,
    learning_topk,
    round_weights,
)


def run_weighted(alg, steps, seed):
    """Feed never-satisfied requests so every one of them counts."""
    rng = random.Random(seed)
    inst = alg.instance
    for _ in range(steps):
        alg.serve(evasive_next(inst, tuple(p % n for p, n in zip(alg.current, inst.sizes)), rng))
    alg.finalize()


def test_constant_values():
    assert constants(1) == (2, 256)
    assert constants(2) == (32, 65536)
    assert constants(3)[0] == 8192
    assert constants(2)[1] == 8 * 32 * 256  # recurrence matches the closed form


def test_constant_identities():
    t = ConstantTable()
    for i in range(1, 7):
        c_i, r_i = t.c(i), t.R(i)
        assert 8 * c_i * c_i == t.c(i + 1)
        assert 4 * (c_i + 1) * c_i <= t.c(i + 1)
        if i >= 2:
            assert r_i == 8 * c_i * t.R(i - 1)
        assert c_i == 2 ** (2 ** (i + 1) - 3)
        assert r_i == 2 ** (2 ** (i + 2))


def test_scaled_table():
    t = ConstantTable({1: 2, 2: 4, 3: 8})
    assert t.c(2) == 4
    assert t.R(2) == 8 * 4 * 256
    with pytest.raises(InvalidInputError):
        t.c(4)
    with pytest.raises(InvalidInputError):
        ConstantTable({1: 0})


def test_round_weights_examples():
    rw = round_weights([1, 7])
    assert rw.rounded == (1, 12) and rw.multipliers == (2,)
    rw2 = round_weights([1, 6])
    assert rw2.rounded == (1, 6) and rw2.multipliers == (1,)
    rw3 = round_weights([2, 12])  # normalization: same as (1, 6)
    assert rw3.rounded == (1, 6) and rw3.multipliers == (1,)
    rw4 = round_weights([Fraction(1), Fraction(13, 2)])
    assert rw4.rounded == (1, 12) and rw4.multipliers == (2,)


def test_round_weights_orders():
    with pytest.raises(InvalidInputError):
        round_weights([7, 1])
    rw = round_weights([7, 1], auto_sort=True)
    assert rw.rounded == (1, 12)  # sorted to (1,7): smallest multiple of 6 >= 7
    with pytest.raises(InvalidInputError):
        round_weights([])
    with pytest.raises(InvalidInputError):
        round_weights([0, 1])


def test_round_weights_never_undercuts():
    rng = random.Random(6)
    for _ in range(50):
        k = rng.randrange(1, 4)
        ws = sorted(Fraction(rng.randrange(1, 40), rng.randrange(1, 7)) for _ in range(k))
        rw = round_weights(ws)
        for orig, rounded in zip(rw.original, rw.rounded):
            assert rounded >= orig / rw.original[0]


def test_learning_topk():
    assert learning_topk({0: 5, 1: 3, 2: 3}, c=2, n_points=3) == [0, 1]
    assert learning_topk({}, c=2, n_points=2) == [0, 1]
    assert learning_topk({0: 1}, c=2, n_points=1) == [0, 1]  # index 1 is virtual
    assert learning_topk({2: 9, 1: 9, 0: 1}, c=2, n_points=3) == [1, 2]


def test_bottom_level_phase_length():
    inst = Instance.make([3], [1])
    alg = WeightedAlgorithm(inst)
    run_weighted(alg, 13, seed=0)
    # 2 (c(1)+1) = 6 requests per phase
    assert alg._lvl1.completed_phases == 2
    assert alg.phase_summaries[0].requests == 6
    assert alg.phase_summaries[0].cost == 6


def test_filtered_requests_change_nothing():
    inst = Instance.make([3, 3], [1, 7])
    alg = WeightedAlgorithm(inst)
    run_weighted(alg, 20, seed=1)
    counted = alg.counted
    cost = alg.total_cost
    level2 = alg._levels[1]
    snapshot = (level2.req_in_subphase, dict(level2.counts), level2.completed_subphases)
    step = alg.serve((alg.current[0], 0))  # satisfied via the bottom server
    assert step.cost == 0 and not step.moved
    assert alg.counted == counted and alg.filtered == 1
    assert alg.total_cost == cost
    assert (level2.req_in_subphase, level2.counts, level2.completed_subphases) == snapshot


def test_two_level_anatomy_default_constants():
    inst = Instance.make([3, 3], [1, 7])
    alg = WeightedAlgorithm(inst)
    assert alg.rounded.rounded == (1, 12)
    # one complete phase = 33 subphases of 2 bottom phases of 6 requests
    run_weighted(alg, 2 * 396 + 100, seed=3)
    level2 = alg._levels[1]
    assert level2.completed_phases >= 2
    for rec in level2.phase_records:
        assert rec.subphases == 33
        assert rec.total_requests == 33 * 2 * 6 == 396
        assert all(x == 12 for x in rec.lower_actual)
        assert all(x == 12 for x in rec.lower_charged)
        assert len(rec.moves) == 32
        targets = [t for t, _ in rec.moves]
        assert len(set(targets)) == 32  # tours 32 distinct pool points
        assert rec.phase_cost_actual <= 2 * 33 * 12
        assert rec.fraction_ok
        # requests per subphase are equal across the phase
        assert set(rec.requests) == {12}


def test_two_level_fraction_breakdown():
    inst = Instance.make([2, 4], [1, 7])
    alg = WeightedAlgorithm(inst)
    run_weighted(alg, 500, seed=8)
    level2 = alg._levels[1]
    assert level2.phase_records
    for rec in level2.phase_records:
        assert rec.point_counts is not None
        for p in range(4):
            assert any(counts.get(p, 0) * 32 <= nreq
                       for counts, nreq in zip(rec.point_counts, rec.requests))


def test_three_level_anatomy_scaled_constants():
    table = ConstantTable({1: 2, 2: 4, 3: 8})
    inst = Instance.make([3, 3, 3], [1, 6, 60])
    alg = WeightedAlgorithm(inst, table=table)
    assert alg.rounded.rounded == (1, 6, 60)
    assert alg.rounded.multipliers == (1, 1)
    # level-2 phase: 5 subphases x 1 x 6 = 30 requests
    # level-3 phase: 9 subphases x 1 x 30 = 270 requests
    run_weighted(alg, 2 * 270 + 30, seed=4)
    l2, l3 = alg._levels[1], alg._levels[2]
    assert l3.completed_phases >= 2
    for rec in l3.phase_records:
        assert rec.subphases == 9
        assert rec.total_requests == 270
        assert all(x == 60 for x in rec.lower_charged)
        assert all(x <= 60 for x in rec.lower_actual)
        assert len(rec.moves) == 8
    for rec in l2.phase_records:
        assert rec.subphases == 5
        assert rec.total_requests == 30
        assert all(x == 6 for x in rec.lower_charged)
    # complete same-level phases all contain the same number of requests
    assert len({rec.total_requests for rec in l3.phase_records}) == 1
    assert len({rec.total_requests for rec in l2.phase_records}) == 1


def test_top_cost_bound_per_phase():
    inst = Instance.make([2, 2], [1, 9])
    alg = WeightedAlgorithm(inst)
    run_weighted(alg, 900, seed=5)
    level2 = alg._levels[1]
    w2 = alg.rounded.rounded[1]
    for rec in level2.phase_records:
        assert rec.phase_cost_actual <= 2 * (level2.c + 1) * w2


def test_phase_report_shape():
    inst = Instance.make([3, 3], [1, 7])
    alg = WeightedAlgorithm(inst)
    run_weighted(alg, 450, seed=2)
    report = alg.phase_report()
    assert report["rounded_weights"] == [1, 12]
    assert report["multipliers"] == [2]
    assert report["levels"][0]["requests_per_phase"] == 6
    level2 = report["levels"][1]
    assert level2["tour_size"] == 32
    if level2["phases"]:
        phase = level2["phases"][0]
        assert phase["subphases"] == 33
        assert phase["phase_cost_bound"] == 2 * 33 * 12
        assert "point_counts" in phase


def test_weighted_serve_moves_reported():
    inst = Instance.make([2, 2], [1, 7])
    alg = WeightedAlgorithm(inst)
    rng = random.Random(0)
    moved_costs = set()
    for _ in range(200):
        r = evasive_next(inst, tuple(p % n for p, n in zip(alg.current, inst.sizes)), rng)
        step = alg.serve(r)
        moved_costs.add(step.cost)
    # every counted request pays the bottom weight; boundary moves add 12
    assert 1 in moved_costs and 13 in moved_costs
