"""Request generators: closed-loop lower-bound strategy and open-loop traffic.

The closed-loop adversary watches only the algorithm's configuration and
always requests the unique tuple the current configuration misses (every
metric must then have exactly two points).  A round lasts until the
algorithm has visited every configuration, forcing it to pay per visit
while a clairvoyant mover could park near the end of the tour.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

from .core import (
    Config,
    Instance,
    InvalidInputError,
    Request,
    ResourceLimitError,
    satisfies,
)


def antipodal_next(instance: Instance, current: Sequence[int]) -> Request:
    """The unique request unsatisfied by `current`; needs two-point metrics."""
    if any(n != 2 for n in instance.sizes):
        raise InvalidInputError(
            f"antipodal adversary requires every metric to have 2 points, got {instance.sizes}"
        )
    current = instance.check_coords(current, what="configuration")
    return tuple(1 - x for x in current)


def evasive_next(instance: Instance, current: Sequence[int],
                 rng: random.Random) -> Request:
    """A uniformly random request that `current` does not satisfy.

    Coordinates parked on virtual points (indices beyond the metric, as the
    weighted tour can produce) never match a real request, so those draw
    from the full range.
    """
    if len(current) != instance.k:
        raise InvalidInputError(
            f"configuration has {len(current)} coordinates, expected {instance.k}")
    out = []
    for x, n in zip(current, instance.sizes):
        if 0 <= x < n:
            v = rng.randrange(n - 1)
            if v >= x:
                v += 1
        else:
            v = rng.randrange(n)
        out.append(v)
    return tuple(out)


def random_request(instance: Instance, rng: random.Random) -> Request:
    return tuple(rng.randrange(n) for n in instance.sizes)


def random_sequence(instance: Instance, steps: int, seed: int) -> list[Request]:
    rng = random.Random(seed)
    return [random_request(instance, rng) for _ in range(steps)]


def run_evasive(algorithm, steps: int, seed: int) -> list[Request]:
    """Drive an algorithm with never-satisfied requests; returns the sequence."""
    rng = random.Random(seed)
    instance = algorithm.instance
    out = []
    for _ in range(steps):
        r = evasive_next(instance, algorithm.current, rng)
        out.append(r)
        algorithm.serve(r)
    algorithm.finalize()
    return out


@dataclass
class ClosedLoopResult:
    requests: list[Request]
    rounds_completed: int
    round_lengths: list[int]
    algorithm_cost: int
    adversary_model: str   # "deterministic" or "oblivious-invalid"
    visited_per_round: int


def run_closed_loop(algorithm, rounds: int, *, step_cap: int | None = None) -> ClosedLoopResult:
    """Rounds of the visit-everything strategy against a served algorithm.

    Each round repeats the request the current configuration misses until
    all 2^k configurations have been visited, then the visited set resets to
    the configuration the algorithm ends the round on.  A per-round step cap
    (default 2^(2k)) guards against non-termination.
    """
    instance = algorithm.instance
    if any(n != 2 for n in instance.sizes):
        raise InvalidInputError(
            f"closed-loop strategy requires every metric to have 2 points, got {instance.sizes}"
        )
    k = instance.k
    target = 2 ** k
    cap = step_cap if step_cap is not None else 2 ** (2 * k)
    model = "oblivious-invalid" if getattr(algorithm, "randomized", False) else "deterministic"

    requests: list[Request] = []
    round_lengths: list[int] = []
    for _ in range(rounds):
        visited = {algorithm.current}
        steps_this_round = 0
        while len(visited) < target:
            r = antipodal_next(instance, algorithm.current)
            if satisfies(algorithm.current, r):
                raise AssertionError("antipodal request must be unsatisfied")
            requests.append(r)
            algorithm.serve(r)
            visited.add(algorithm.current)
            steps_this_round += 1
            if steps_this_round > cap:
                raise ResourceLimitError(
                    f"round exceeded step cap {cap} with {len(visited)}/{target} "
                    f"configurations visited"
                )
        round_lengths.append(steps_this_round)
    algorithm.finalize()
    return ClosedLoopResult(
        requests=requests,
        rounds_completed=rounds,
        round_lengths=round_lengths,
        algorithm_cost=algorithm.total_cost,
        adversary_model=model,
        visited_per_round=target,
    )
