"""Recursive algorithm for weighted products of uniform metrics.

Level i moves its server only at subphase boundaries; a subphase lasts
exactly as long as the levels below it need to spend the level's weight.
The first subphase of every phase gathers per-point request counts, after
which the server tours the most-requested points, one per subphase.  Weight
rounding makes every subphase boundary land exactly: each rounded weight is
an integral multiple of the charged cost of one complete lower-level phase.

Costs are tracked twice: `actual` is what the run really pays (staying put
is free), `charged` prices every scheduled move at the level weight, which
is the accounting the subphase boundaries are defined by.  Charged never
undercounts actual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .core import (
    Config,
    Instance,
    InvalidInputError,
    InvariantViolationError,
    Request,
    satisfies,
)
from .algorithms import Step, PhaseSummary


class ConstantTable:
    """Per-level tour sizes c(i) and ratio targets R(i).

    The defaults are doubly exponential: c(i) = 2^(2^(i+1) - 3) and
    R(i) = 2^(2^(i+2)), satisfying 8 c(i)^2 = c(i+1) and
    R(i) = 8 c(i) R(i-1).  A scaled table (for exercising deep anatomy
    cheaply in tests) keeps c(1) = 2 and derives R by the same recurrence.
    """

    def __init__(self, c_values: Mapping[int, int] | None = None):
        self._c = dict(c_values) if c_values is not None else None
        if self._c is not None:
            for i, v in self._c.items():
                if i < 1 or v < 1:
                    raise InvalidInputError(f"bad scaled constant c({i})={v}")

    @property
    def is_default(self) -> bool:
        return self._c is None

    def c(self, i: int) -> int:
        if i < 1:
            raise InvalidInputError(f"level index must be >= 1, got {i}")
        if self._c is None:
            return 2 ** (2 ** (i + 1) - 3)
        try:
            return self._c[i]
        except KeyError:
            raise InvalidInputError(f"scaled table has no c({i})") from None

    def R(self, i: int) -> int:
        if i < 1:
            raise InvalidInputError(f"level index must be >= 1, got {i}")
        if self._c is None:
            return 2 ** (2 ** (i + 2))
        value = 2 ** 8
        for j in range(2, i + 1):
            value = 8 * self.c(j) * value
        return value


DEFAULT_TABLE = ConstantTable()


def constants(i: int) -> tuple[int, int]:
    """Default (c(i), R(i)) pair for level i."""
    return DEFAULT_TABLE.c(i), DEFAULT_TABLE.R(i)


@dataclass(frozen=True)
class RoundedWeights:
    """Normalized weights rounded up so lower-level phases tile subphases."""

    original: tuple[Fraction, ...]
    rounded: tuple[int, ...]        # rounded[0] == 1 after normalization
    multipliers: tuple[int, ...]    # per level 2..k: rounded / rounding unit
    units: tuple[int, ...]          # per level 2..k: the rounding unit


def round_weights(weights: Sequence, *, auto_sort: bool = False,
                  table: ConstantTable | None = None) -> RoundedWeights:
    """Normalize by the first weight, then round each level up to the
    smallest integral multiple of twice (1 + c(i-1)) times the previous
    rounded weight.  Input must be ascending unless auto_sort is set."""
    table = table or DEFAULT_TABLE
    ws = tuple(Fraction(w) for w in weights)
    if not ws:
        raise InvalidInputError("need at least one weight")
    if any(w <= 0 for w in ws):
        raise InvalidInputError(f"weights must be positive, got {ws}")
    if auto_sort:
        ws = tuple(sorted(ws))
    elif any(a > b for a, b in zip(ws, ws[1:])):
        raise InvalidInputError(
            f"weights must be ascending (pass auto_sort=True to sort), got {ws}"
        )
    rounded = [1]
    multipliers = []
    units = []
    for i in range(2, len(ws) + 1):
        unit = 2 * (1 + table.c(i - 1)) * rounded[-1]
        target = ws[i - 1] / ws[0]
        m = max(1, math.ceil(target / unit))
        rounded.append(m * unit)
        multipliers.append(m)
        units.append(unit)
    return RoundedWeights(ws, tuple(rounded), tuple(multipliers), tuple(units))


def learning_topk(counts: Mapping[int, int], c: int, n_points: int) -> list[int]:
    """The c most-requested points, ties to the lower index, padded with
    virtual points (indices from n_points up) when the metric is small."""
    if c < 1:
        raise InvalidInputError(f"tour size must be >= 1, got {c}")
    ranked = sorted(range(n_points), key=lambda p: (-counts.get(p, 0), p))
    out = ranked[:c]
    virtual = n_points
    while len(out) < c:
        out.append(virtual)
        virtual += 1
    return out


@dataclass
class LevelPhaseRecord:
    """Anatomy of one complete phase at one level (levels 2 and up)."""

    level: int
    index: int                      # 1-based among the level's phases
    subphases: int
    requests: tuple[int, ...]       # counted requests per subphase
    lower_actual: tuple[int, ...]   # below-level cost actually paid, per subphase
    lower_charged: tuple[int, ...]  # below-level cost at charged prices, per subphase
    moves: tuple[tuple[int, int], ...]   # (target point, actual cost) per boundary
    pool: tuple[int, ...]
    fraction_ok: bool               # every point has a subphase with <= 1/c of requests
    point_counts: tuple[dict, ...] | None
    total_requests: int
    phase_cost_actual: int          # lower actual + own boundary moves


class _Level:
    __slots__ = (
        "i", "w", "c", "m", "n_real", "pos", "opened",
        "completed_subphases", "lower_phases", "req_in_subphase",
        "counts", "pool", "pool_pos", "lower_actual", "lower_charged",
        "subph_requests", "subph_lower_actual", "subph_lower_charged",
        "subph_counts", "moves", "completed_phases", "phase_records",
    )

    def __init__(self, i: int, w: int, c: int, m: int, n_real: int, pos: int):
        self.i = i
        self.w = w
        self.c = c
        self.m = m
        self.n_real = n_real
        self.pos = pos
        self.completed_phases = 0
        self.phase_records: list[LevelPhaseRecord] = []
        self._reset_phase()

    def _reset_phase(self):
        self.opened = False
        self.completed_subphases = 0
        self.lower_phases = 0
        self.pool = None
        self.pool_pos = 0
        self.moves = []
        self.subph_requests = []
        self.subph_lower_actual = []
        self.subph_lower_charged = []
        self.subph_counts = []
        self._reset_subphase()

    def _reset_subphase(self):
        self.req_in_subphase = 0
        self.counts = {}
        self.lower_actual = 0
        self.lower_charged = 0


class WeightedAlgorithm:
    """Serve requests on a weighted instance with the recursive tour scheme.

    Requests the joint configuration already satisfies are filtered: no
    counter advances and nothing moves.  Costs are in normalized rounded
    weight units (the first metric's rounded weight is 1).
    """

    alg_id = "weighted"
    randomized = False

    def __init__(self, instance: Instance, start: Sequence[int] | None = None,
                 keep_transcript: bool = True, table: ConstantTable | None = None,
                 record_point_counts: bool = True):
        self.instance = instance
        self.table = table or DEFAULT_TABLE
        self.rounded = round_weights(instance.weights, table=self.table)
        self.record_point_counts = record_point_counts
        if start is None:
            start = (0,) * instance.k
        start = instance.check_coords(start, what="start configuration")

        self.phase_len_1 = 2 * (self.table.c(1) + 1)
        k = instance.k
        self._levels: list[_Level] = []
        for i in range(1, k + 1):
            w = self.rounded.rounded[i - 1]
            c_i = self.table.c(i)
            m_i = 1 if i == 1 else self.rounded.multipliers[i - 2]
            self._levels.append(_Level(i, w, c_i, m_i, instance.sizes[i - 1], start[i - 1]))
        self._lvl1 = self._levels[0]
        self._lvl1_req_in_phase = 0

        self.total_cost = 0
        self.filtered = 0
        self.counted = 0
        self.transcript: list[Step] | None = [] if keep_transcript else None
        self.phase_summaries: list[PhaseSummary] = []
        self._step_index = 0
        self._top_acc = {"requests": 0, "moves": 0, "cost": 0, "filtered": 0}
        self._finalized = False

    # -- public surface -----------------------------------------------------

    @property
    def current(self) -> Config:
        return tuple(level.pos for level in self._levels)

    @property
    def phase(self) -> int:
        return self._levels[-1].completed_phases + 1

    def serve(self, r: Sequence[int]) -> Step:
        r = self.instance.check_coords(r)
        pre = self.current
        self._step_index += 1
        top_phase = self.phase

        if satisfies(pre, r):
            self.filtered += 1
            self._top_acc["filtered"] += 1
            step = Step(index=self._step_index, phase=top_phase, request=r, pre=pre,
                        post=pre, cost=0, family_size=0, max_dim=0, max_count=0,
                        moved=False, shrunk=False, phase_start=False)
            if self.transcript is not None:
                self.transcript.append(step)
            return step

        self.counted += 1
        phase_start = self._top_acc["requests"] == 0
        self._top_acc["requests"] += 1

        # lazy phase-opening charge: the scheduled move to an arbitrary point
        # is realized as staying put (actual 0, charged at the level weight)
        for level in self._levels[1:]:
            if not level.opened:
                level.opened = True
                self._propagate(level.i, actual=0, charged=level.w)

        # per-subphase tallies of what each metric is asked for
        for level in self._levels[1:]:
            p = r[level.i - 1]
            level.counts[p] = level.counts.get(p, 0) + 1
            level.req_in_subphase += 1

        # the bottom server chases its coordinate on every counted request
        lvl1 = self._lvl1
        if lvl1.pos == r[0]:
            raise InvariantViolationError(
                "counted request already matched the bottom server"
            )
        lvl1.pos = r[0]
        cost = 1
        self.total_cost += 1
        self._propagate(1, actual=1, charged=1)

        self._lvl1_req_in_phase += 1
        if self._lvl1_req_in_phase == self.phase_len_1:
            self._lvl1_req_in_phase = 0
            lvl1.completed_phases += 1
            cost += self._cascade(2)

        post = self.current
        step = Step(index=self._step_index, phase=top_phase, request=r, pre=pre,
                    post=post, cost=cost, family_size=0, max_dim=0, max_count=0,
                    moved=post != pre, shrunk=False, phase_start=phase_start)
        self._top_acc["moves"] += step.moved
        self._top_acc["cost"] += cost
        if self.transcript is not None:
            self.transcript.append(step)
        if top_phase != self.phase:
            # the top level completed its phase on this request
            self._emit_top_summary(top_phase, complete=True)
        return step

    def run(self, requests) -> list[Step]:
        steps = [self.serve(r) for r in requests]
        self.finalize()
        return steps

    def finalize(self) -> None:
        if not self._finalized:
            if any(v for v in self._top_acc.values()):
                self._emit_top_summary(self.phase, complete=False)
            self._finalized = True

    # -- internals ----------------------------------------------------------

    def _propagate(self, from_level: int, actual: int, charged: int) -> None:
        """Account a cost event into every strictly higher level's subphase."""
        for level in self._levels[from_level:]:
            level.lower_actual += actual
            level.lower_charged += charged

    def _cascade(self, i: int) -> int:
        """Level i-1 just completed a phase; returns extra actual cost paid."""
        if i > self.instance.k:
            return 0
        level = self._levels[i - 1]
        level.lower_phases += 1
        if level.lower_phases < level.m:
            return 0

        # subphase boundary: the level's weight has been spent below, exactly
        level.lower_phases = 0
        if level.lower_charged != level.w:
            raise InvariantViolationError(
                f"level {i} subphase closed at charged cost {level.lower_charged}, "
                f"expected exactly {level.w}"
            )
        level.subph_requests.append(level.req_in_subphase)
        level.subph_lower_actual.append(level.lower_actual)
        level.subph_lower_charged.append(level.lower_charged)
        level.subph_counts.append(level.counts)
        level.completed_subphases += 1

        if level.completed_subphases == 1:
            level.pool = learning_topk(level.counts, level.c, level.n_real)
            level.pool_pos = 0
        level._reset_subphase()

        if level.completed_subphases == level.c + 1:
            self._finish_level_phase(level)
            return self._cascade(i + 1)

        # tour the next unvisited pool point
        target = level.pool[level.pool_pos]
        level.pool_pos += 1
        actual = level.w if target != level.pos else 0
        level.moves.append((target, actual))
        level.pos = target
        if actual:
            self.total_cost += actual
        self._propagate(i, actual=actual, charged=level.w)
        return actual

    def _finish_level_phase(self, level: _Level) -> None:
        requests = tuple(level.subph_requests)
        if len(set(requests)) > 1:
            raise InvariantViolationError(
                f"level {level.i} subphases served unequal request counts {requests}"
            )
        visited = [t for t, _ in level.moves]
        if len(visited) != level.c or len(set(visited)) != level.c:
            raise InvariantViolationError(
                f"level {level.i} toured {len(visited)} points "
                f"({len(set(visited))} distinct), expected {level.c} distinct"
            )
        fraction_ok = all(
            any(counts.get(p, 0) * level.c <= nreq
                for counts, nreq in zip(level.subph_counts, requests))
            for p in range(level.n_real)
        )
        record = LevelPhaseRecord(
            level=level.i,
            index=level.completed_phases + 1,
            subphases=level.completed_subphases,
            requests=requests,
            lower_actual=tuple(level.subph_lower_actual),
            lower_charged=tuple(level.subph_lower_charged),
            moves=tuple(level.moves),
            pool=tuple(level.pool),
            fraction_ok=fraction_ok,
            point_counts=tuple(level.subph_counts) if self.record_point_counts else None,
            total_requests=sum(requests),
            phase_cost_actual=sum(level.subph_lower_actual) + sum(a for _, a in level.moves),
        )
        level.phase_records.append(record)
        level.completed_phases += 1
        level._reset_phase()

    def _emit_top_summary(self, phase: int, complete: bool) -> None:
        acc = self._top_acc
        self.phase_summaries.append(PhaseSummary(
            phase=phase, requests=acc["requests"], moves=acc["moves"],
            shrinks=0, cost=acc["cost"], complete=complete,
            created_by_dim={}, duplicate_creations=0, adopted_spaces=None,
        ))
        self._top_acc = {"requests": 0, "moves": 0, "cost": 0, "filtered": 0}

    # -- reporting ----------------------------------------------------------

    def phase_report(self) -> dict:
        """Structural summary of every completed phase, per level."""
        k = self.instance.k
        levels = []
        lvl1 = self._lvl1
        levels.append({
            "level": 1,
            "weight": 1,
            "complete_phases": lvl1.completed_phases,
            "requests_per_phase": self.phase_len_1,
        })
        for level in self._levels[1:]:
            entry = {
                "level": level.i,
                "weight": level.w,
                "tour_size": level.c,
                "multiplier": level.m,
                "complete_phases": level.completed_phases,
                "phases": [],
            }
            for rec in level.phase_records:
                item = {
                    "index": rec.index,
                    "subphases": rec.subphases,
                    "requests_per_subphase": list(rec.requests),
                    "lower_actual_per_subphase": list(rec.lower_actual),
                    "lower_charged_per_subphase": list(rec.lower_charged),
                    "move_costs": [a for _, a in rec.moves],
                    "pool": list(rec.pool),
                    "fraction_ok": rec.fraction_ok,
                    "total_requests": rec.total_requests,
                    "phase_cost_actual": rec.phase_cost_actual,
                    "phase_cost_bound": 2 * (level.c + 1) * level.w,
                }
                if rec.point_counts is not None:
                    item["point_counts"] = [
                        {str(p): c for p, c in sorted(counts.items())}
                        for counts in rec.point_counts
                    ]
                entry["phases"].append(item)
            levels.append(entry)
        return {
            "k": k,
            "original_weights": [str(w) for w in self.rounded.original],
            "rounded_weights": list(self.rounded.rounded),
            "multipliers": list(self.rounded.multipliers),
            "rounding_units": list(self.rounded.units),
            "constants_c": [self.table.c(i) for i in range(1, k + 1)],
            "counted_requests": self.counted,
            "filtered_requests": self.filtered,
            "total_cost": self.total_cost,
            "levels": levels,
        }
