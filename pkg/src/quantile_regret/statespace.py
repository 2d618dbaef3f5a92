"""The simulation study's state space and the two benchmark choices
for the untreated outcome distribution.

A grid state places mass i/w on grid point j/n; sweeping all ways to
split w mass units over the n+1 grid points enumerates every such
distribution exactly once, in lexicographic order of the mass vector.
The order is load-bearing: state indices seed per-state RNG streams, so
they must be stable across runs and machines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

from .dists import (
    DiscreteDist,
    Dist,
    MixedDist,
    Prob,
    QuantileSpec,
    quantile,
)

DEFAULT_CHOICE1_EPSILON = Fraction(1, 10**6)

__all__ = [
    "DEFAULT_CHOICE1_EPSILON",
    "GridState",
    "Y0Spec",
    "enumerate_states",
    "state_count",
    "state_rank",
    "state_unrank",
    "y0_distribution",
]


@dataclass(frozen=True)
class GridState:
    """Distribution on {0, 1/n, ..., 1} with masses that are multiples
    of 1/w, stored as the integer vector of mass units."""

    n: int
    w: int
    masses: tuple

    def __post_init__(self) -> None:
        if len(self.masses) != self.n + 1:
            raise ValueError(f"need {self.n + 1} mass entries, got {len(self.masses)}")
        if any(m < 0 for m in self.masses):
            raise ValueError("mass units must be nonnegative")
        if sum(self.masses) != self.w:
            raise ValueError(f"mass units must sum to {self.w}")

    def distribution(self) -> DiscreteDist:
        """Exact rational distribution; zero-mass grid points drop out."""
        return DiscreteDist.from_pairs(
            (Fraction(j, self.n), Fraction(m, self.w))
            for j, m in enumerate(self.masses)
            if m > 0
        )


def state_count(n: int, w: int) -> int:
    """Number of grid states: compositions of w into n+1 parts."""
    if n < 1 or w < 1:
        raise ValueError("need n >= 1 and w >= 1")
    return math.comb(w + n, n)


def enumerate_states(n: int, w: int, *, max_states: int = 10**8) -> Iterator[GridState]:
    """Yield every grid state in lexicographic mass-vector order."""
    count = state_count(n, w)
    if count > max_states:
        raise ValueError(
            f"state space has {count} elements, above the guard of {max_states}"
        )

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for tail in compositions(total - head, parts - 1):
                yield (head, *tail)

    for masses in compositions(w, n + 1):
        yield GridState(n, w, masses)


def state_rank(state: GridState) -> int:
    """Index of the state in enumeration order (0-based)."""
    rank = 0
    remaining = state.w
    parts = state.n + 1
    for value in state.masses[:-1]:
        for smaller in range(value):
            rank += math.comb(remaining - smaller + parts - 2, parts - 2)
        remaining -= value
        parts -= 1
    return rank


def state_unrank(n: int, w: int, index: int) -> GridState:
    """Inverse of ``state_rank``."""
    if not 0 <= index < state_count(n, w):
        raise ValueError(f"index {index} outside [0, {state_count(n, w)})")
    masses = []
    remaining = w
    parts = n + 1
    rank = index
    while parts > 1:
        value = 0
        while True:
            block = math.comb(remaining - value + parts - 2, parts - 2)
            if rank < block:
                break
            rank -= block
            value += 1
        masses.append(value)
        remaining -= value
        parts -= 1
    masses.append(remaining)
    return GridState(n, w, tuple(masses))


@dataclass(frozen=True)
class Y0Spec:
    """Benchmark distribution for the untreated outcome.

    Choice I is the two-point distribution {0: alpha - eps, q0: rest};
    Choice II is the continuous two-piece uniform density anchored at
    q0.  Both have alpha-quantile exactly q0 (lower convention).
    """

    choice: str
    q0: Prob
    alpha: Prob
    epsilon: Prob = DEFAULT_CHOICE1_EPSILON

    def __post_init__(self) -> None:
        if self.choice not in ("I", "II"):
            raise ValueError(f"choice must be 'I' or 'II', got {self.choice!r}")
        if not 0 <= self.q0 <= 1:
            raise ValueError("q0 must lie in [0,1]")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0,1]")
        if self.choice == "I" and not 0 <= self.alpha - self.epsilon < 1:
            raise ValueError("choice I needs 0 <= alpha - epsilon < 1")


def y0_distribution(spec: Y0Spec) -> Dist:
    """Materialize the benchmark distribution and verify its quantile."""
    if spec.choice == "I":
        if spec.q0 == 0:
            dist: Dist = DiscreteDist.point_mass(0)
        else:
            low = spec.alpha - spec.epsilon
            dist = DiscreteDist.from_pairs(((0, low), (spec.q0, 1 - low)))
    else:
        dist = MixedDist.two_piece_uniform(spec.alpha, spec.q0)
    got = quantile(dist, QuantileSpec(spec.alpha, 0))
    if got != spec.q0:
        raise AssertionError(
            f"benchmark construction broke its quantile anchor: {got} != {spec.q0}"
        )
    return dist
