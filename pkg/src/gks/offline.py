"""Exact offline optimum over the full configuration space.

A textbook service-system relaxation: layer t maps every configuration to
the cheapest cost of serving the first t requests and parking there, where
serving a request means passing through a configuration that satisfies it.
Exact arithmetic throughout; integer fast path when all weights are 1.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Sequence

from .core import (
    Config,
    Instance,
    Request,
    ResourceLimitError,
    hamming,
    satisfies,
    weighted_distance,
)

DEFAULT_STATE_CAP = 10_000
DEFAULT_WORK_CAP = 50_000_000


def enumerate_configs(instance: Instance) -> list[Config]:
    return list(itertools.product(*(range(n) for n in instance.sizes)))


def _check_caps(instance: Instance, steps: int, state_cap: int, work_cap: int) -> int:
    n_states = instance.state_count()
    if n_states > state_cap:
        raise ResourceLimitError(
            f"state space {n_states} exceeds cap {state_cap}"
        )
    work = steps * n_states * n_states
    if work > work_cap:
        raise ResourceLimitError(
            f"relaxation work {work} (= {steps} * {n_states}^2) exceeds cap {work_cap}"
        )
    return n_states


def _distance_fn(instance: Instance):
    if instance.is_unit_uniform:
        return hamming
    weights = instance.weights
    return lambda a, b: weighted_distance(a, b, weights)


def _layers(instance: Instance, start: Config, requests: Sequence[Request],
            state_cap: int, work_cap: int):
    """Yield (t, values) where values[j] is the layer-t cost of configs[j]."""
    _check_caps(instance, len(requests), state_cap, work_cap)
    start = instance.check_coords(start, what="start configuration")
    configs = enumerate_configs(instance)
    dist = _distance_fn(instance)
    n = len(configs)
    lut = None
    if n * n <= 1_200_000:
        lut = [[dist(a, b) for b in configs] for a in configs]

    values = [dist(start, q) for q in configs]
    yield 0, values, configs
    for t, r in enumerate(requests, start=1):
        instance.check_coords(r)
        serving = [j for j, q in enumerate(configs) if satisfies(q, r)]
        if lut is not None:
            new = []
            for j in range(n):
                best = None
                for s in serving:
                    v = values[s] + lut[s][j]
                    if best is None or v < best:
                        best = v
                new.append(best)
        else:
            new = []
            for j, q in enumerate(configs):
                best = None
                for s in serving:
                    v = values[s] + dist(configs[s], q)
                    if best is None or v < best:
                        best = v
                new.append(best)
        values = new
        yield t, values, configs


def opt_cost(instance: Instance, start: Sequence[int], requests: Sequence[Request],
             *, state_cap: int = DEFAULT_STATE_CAP,
             work_cap: int = DEFAULT_WORK_CAP) -> Fraction:
    """Exact cheapest total movement that serves every request in order."""
    start = tuple(start)
    if not requests:
        return Fraction(0)
    values = None
    for _, values, _configs in _layers(instance, start, requests, state_cap, work_cap):
        pass
    return Fraction(min(values))


def work_function_layer(instance: Instance, start: Sequence[int],
                        requests: Sequence[Request], t: int,
                        *, state_cap: int = DEFAULT_STATE_CAP,
                        work_cap: int = DEFAULT_WORK_CAP) -> dict[Config, Fraction]:
    """The full layer-t table, mapping every configuration to its exact cost."""
    start = tuple(start)
    if not 0 <= t <= len(requests):
        raise ResourceLimitError(f"layer {t} outside [0, {len(requests)}]")
    for layer_t, values, configs in _layers(instance, start, requests[:t], state_cap, work_cap):
        if layer_t == t:
            return {q: Fraction(v) for q, v in zip(configs, values)}
    raise AssertionError("unreachable")


def work_function_minima(instance: Instance, start: Sequence[int],
                         requests: Sequence[Request],
                         *, state_cap: int = DEFAULT_STATE_CAP,
                         work_cap: int = DEFAULT_WORK_CAP) -> list[Fraction]:
    """Cheapest table value after 0..T requests, in one forward pass."""
    start = tuple(start)
    return [Fraction(min(values))
            for _, values, _ in _layers(instance, start, requests, state_cap, work_cap)]
