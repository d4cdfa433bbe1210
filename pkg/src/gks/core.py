"""Problem primitives: instances, joint configurations, requests, distances.

Positions are 0-based point indices, one coordinate per metric. Weights and
costs are exact (Python integers and fractions); floats never enter cost
accounting. Python integers are arbitrary precision, so the product
polynomial cannot overflow or wrap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

Config = tuple[int, ...]
Request = tuple[int, ...]

SEQ_HEADER = "gks-seq v1"


class GKSError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(GKSError):
    """Malformed or out-of-contract caller input."""


class SequenceFormatError(InvalidInputError):
    """Bad sequence or transcript file; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ContractViolationError(GKSError):
    """An operation was invoked outside its stated precondition."""


class InvariantViolationError(GKSError):
    """A runtime invariant failed.  This is a finding, not a usage error."""


class EmptyFamilyError(GKSError):
    """Operation requires a nonempty feasible family."""


class ResourceLimitError(GKSError):
    """A configured state-space or work cap was exceeded."""


class CertificateImpossibleError(GKSError):
    """Phase is too long for any valid certificate (the violation signal)."""


WeightLike = Union[int, str, Fraction]


@dataclass(frozen=True)
class Instance:
    """A product of k uniform metrics: point counts and positive weights."""

    k: int
    sizes: tuple[int, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if len(self.sizes) != self.k or len(self.weights) != self.k:
            raise InvalidInputError(
                f"expected {self.k} sizes and weights, got "
                f"{len(self.sizes)} and {len(self.weights)}"
            )
        for i, n in enumerate(self.sizes):
            if not isinstance(n, int) or n < 2:
                raise InvalidInputError(f"metric {i}: point count must be an int >= 2, got {n!r}")
        for i, w in enumerate(self.weights):
            if not isinstance(w, Fraction) or w <= 0:
                raise InvalidInputError(f"metric {i}: weight must be a positive Fraction, got {w!r}")

    @classmethod
    def make(cls, sizes: Sequence[int], weights: Sequence[WeightLike] | None = None) -> "Instance":
        """Build an instance from point counts; weights default to all 1."""
        sizes = tuple(int(n) for n in sizes)
        if weights is None:
            ws = tuple(Fraction(1) for _ in sizes)
        else:
            ws = tuple(Fraction(w) for w in weights)
        return cls(len(sizes), sizes, ws)

    @classmethod
    def uniform(cls, k: int, n: int) -> "Instance":
        return cls.make([n] * k)

    @property
    def is_unit_uniform(self) -> bool:
        """True when every weight equals 1 (the plain uniform case)."""
        return all(w == 1 for w in self.weights)

    def state_count(self) -> int:
        return math.prod(self.sizes)

    def check_coords(self, t: Sequence[int], what: str = "request") -> Config:
        """Validate a request/configuration against this instance."""
        t = tuple(t)
        if len(t) != self.k:
            raise InvalidInputError(f"{what} has {len(t)} coordinates, expected {self.k}")
        for i, (x, n) in enumerate(zip(t, self.sizes)):
            if not isinstance(x, int) or not 0 <= x < n:
                raise InvalidInputError(f"{what} coordinate {i} = {x!r} out of range [0, {n})")
        return t


def _check_len(a: Sequence[int], b: Sequence[int]) -> None:
    if len(a) != len(b):
        raise InvalidInputError(f"coordinate count mismatch: {len(a)} vs {len(b)}")


def satisfies(q: Config, r: Request) -> bool:
    """True iff some server already sits on its requested point."""
    _check_len(q, r)
    return any(qi == ri for qi, ri in zip(q, r))


def poly_eval(q: Config, r: Request) -> int:
    """Exact product of coordinate differences; zero iff q satisfies r."""
    _check_len(q, r)
    out = 1
    for qi, ri in zip(q, r):
        out *= qi - ri
    return out


def hamming(a: Config, b: Config) -> int:
    """Number of coordinates where the two configurations differ."""
    _check_len(a, b)
    return sum(x != y for x, y in zip(a, b))


def weighted_distance(a: Config, b: Config, weights: Sequence[Fraction]) -> Fraction:
    """Sum of per-metric weights over differing coordinates."""
    _check_len(a, b)
    _check_len(a, weights)
    out = Fraction(0)
    for x, y, w in zip(a, b, weights):
        if x != y:
            out += w
    return out


def format_fraction(x: Fraction | int) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(s: str) -> Fraction:
    try:
        return Fraction(s.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidInputError(f"bad rational {s!r}: {e}") from e


# ---------------------------------------------------------------------------
# Request-sequence files
#
#   gks-seq v1
#   k=<int>
#   sizes=<n1,...,nk>
#   weights=<w1,...,wk>     (integers or p/q rationals)
#   <one request per line, comma-separated 0-based indices>
#
# Blank lines and '#'-prefixed comments are ignored everywhere.
# ---------------------------------------------------------------------------

def write_sequence(dest: Union[str, Path, IO[str]], instance: Instance,
                   requests: Iterable[Request]) -> None:
    lines = [
        SEQ_HEADER,
        f"k={instance.k}",
        "sizes=" + ",".join(str(n) for n in instance.sizes),
        "weights=" + ",".join(format_fraction(w) for w in instance.weights),
    ]
    lines.extend(",".join(str(x) for x in r) for r in requests)
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _expect_kv(line: str, key: str, lineno: int) -> str:
    prefix = key + "="
    if not line.startswith(prefix):
        raise SequenceFormatError(f"expected '{key}=...', got {line!r}", lineno)
    return line[len(prefix):]


def read_sequence(src: Union[str, Path, IO[str]]) -> tuple[Instance, list[Request]]:
    """Parse a sequence file; errors carry the 1-based line number."""
    text = src.read() if hasattr(src, "read") else Path(src).read_text()
    it = _content_lines(text)

    def next_line(what: str):
        try:
            return next(it)
        except StopIteration:
            raise SequenceFormatError(f"unexpected end of file, expected {what}", 0) from None

    lineno, line = next_line("header")
    if line != SEQ_HEADER:
        raise SequenceFormatError(f"bad header {line!r}, expected {SEQ_HEADER!r}", lineno)

    lineno, line = next_line("k=<int>")
    try:
        k = int(_expect_kv(line, "k", lineno))
    except ValueError as e:
        raise SequenceFormatError(str(e), lineno) from e

    lineno, line = next_line("sizes=...")
    try:
        sizes = [int(s) for s in _expect_kv(line, "sizes", lineno).split(",")]
    except ValueError as e:
        raise SequenceFormatError(str(e), lineno) from e

    lineno, line = next_line("weights=...")
    try:
        weights = [parse_fraction(s) for s in _expect_kv(line, "weights", lineno).split(",")]
    except InvalidInputError as e:
        raise SequenceFormatError(str(e), lineno) from e

    try:
        instance = Instance(k, tuple(sizes), tuple(weights))
    except InvalidInputError as e:
        raise SequenceFormatError(str(e), lineno) from e

    requests: list[Request] = []
    for lineno, line in it:
        try:
            coords = tuple(int(s) for s in line.split(","))
        except ValueError as e:
            raise SequenceFormatError(str(e), lineno) from e
        try:
            requests.append(instance.check_coords(coords))
        except InvalidInputError as e:
            raise SequenceFormatError(str(e), lineno) from e
    return instance, requests
