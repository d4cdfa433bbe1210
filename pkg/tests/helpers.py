"""Independent oracles for the test suite, kept deliberately naive."""

import itertools

from gks.core import Instance, satisfies, weighted_distance


def all_configs(sizes):
    return list(itertools.product(*(range(n) for n in sizes)))


def satisfying_configs(sizes, r):
    return [q for q in all_configs(sizes) if satisfies(q, r)]


def brute_force_opt(instance: Instance, start, requests):
    """Minimum cost over every explicit trajectory through satisfying states."""
    choices = [satisfying_configs(instance.sizes, r) for r in requests]
    weights = instance.weights
    best = None
    for trajectory in itertools.product(*choices):
        pos = tuple(start)
        total = 0
        for q in trajectory:
            total += weighted_distance(pos, q, weights)
            pos = q
        if best is None or total < best:
            best = total
    return best if best is not None else 0


def exhaustive_feasible(sizes, requests):
    """All configurations satisfying every request, by full enumeration."""
    return {q for q in all_configs(sizes)
            if all(satisfies(q, r) for r in requests)}
