"""Treatment rules over the three sampling designs.

A rule maps an observed sample to a treatment probability in [0,1].
Constant rules ignore the sample; the empirical success rule compares
the sample quantile of the treated outcomes against a known benchmark;
tabular rules carry an explicit table over binary samples, which is
what the exact engine aggregates and the adversary constructions
inspect.
"""

from __future__ import annotations

import itertools
import random as _random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

from .dists import DiscreteDist, Prob, QuantileSpec, frac, quantile

FIXED = "fixed"
RANDOM = "random"
INNOVATION = "innovation"

DEFAULT_XI = Fraction(1, 10**8)

__all__ = [
    "DEFAULT_XI",
    "Sample",
    "TreatmentRule",
    "constant_rule",
    "empirical_success_rule",
    "load_rule_table",
    "parse_rule",
    "random_tabular_rule",
    "sample_quantile",
    "tabular_rule",
]


@dataclass(frozen=True)
class Sample:
    """One observed sample, tagged by design.

    fixed:      y0 (untreated outcomes) and y1 (treated outcomes)
    random:     t (treatment statuses) and y (outcomes, y[i] from Y_{t[i]})
    innovation: y1 only
    """

    design: str
    y0: tuple = ()
    y1: tuple = ()
    t: tuple = ()
    y: tuple = ()

    @classmethod
    def fixed(cls, y0: Sequence[Prob], y1: Sequence[Prob]) -> "Sample":
        return cls(FIXED, y0=tuple(y0), y1=tuple(y1))

    @classmethod
    def random_assignment(cls, t: Sequence[int], y: Sequence[Prob]) -> "Sample":
        if len(t) != len(y):
            raise ValueError("treatment statuses and outcomes must align")
        return cls(RANDOM, t=tuple(t), y=tuple(y))

    @classmethod
    def innovation(cls, y1: Sequence[Prob]) -> "Sample":
        return cls(INNOVATION, y1=tuple(y1))

    @property
    def key(self) -> tuple:
        """Canonical table key for the sample."""
        if self.design == FIXED:
            return (self.y0, self.y1)
        if self.design == RANDOM:
            return (self.t, self.y)
        return self.y1


class TreatmentRule:
    """Map from samples to treatment probabilities.

    ``constant`` short-circuits evaluation; ``table`` is the tabular
    form over binary samples used for exact aggregation; ``symmetric``
    declares invariance under permuting the sample, which lets the
    engine enumerate multisets instead of ordered samples.
    """

    def __init__(
        self,
        fn: Callable[[Sample], Prob],
        *,
        label: str,
        design: Optional[str] = None,
        table: Optional[Mapping[tuple, Prob]] = None,
        constant: Optional[Prob] = None,
        symmetric: bool = False,
    ):
        self._fn = fn
        self.label = label
        self.design = design
        self.table = dict(table) if table is not None else None
        self.constant = constant
        self.symmetric = symmetric

    def __call__(self, sample: Sample) -> Prob:
        if self.design is not None and sample.design != self.design:
            raise ValueError(
                f"rule {self.label!r} is defined for design {self.design!r}, "
                f"got a {sample.design!r} sample"
            )
        if self.constant is not None:
            return self.constant
        value = self._fn(sample)
        if not 0 <= value <= 1:
            raise ValueError(f"rule {self.label!r} returned {value!r} outside [0,1]")
        return value

    def __repr__(self) -> str:
        return f"TreatmentRule({self.label})"


def constant_rule(c: Prob) -> TreatmentRule:
    """No-data rule: treat with probability c regardless of the sample."""
    if not 0 <= c <= 1:
        raise ValueError(f"constant must lie in [0,1], got {c!r}")
    return TreatmentRule(
        lambda _s: c, label=f"const:{c}", constant=c, symmetric=True
    )


def sample_quantile(values: Sequence[Prob], spec: QuantileSpec) -> Prob:
    """Generalized quantile of the empirical distribution of ``values``."""
    return quantile(DiscreteDist.from_sample(values), spec)


def empirical_success_rule(
    q0: Prob, spec: QuantileSpec, xi: Prob = DEFAULT_XI
) -> TreatmentRule:
    """Treat when the sample quantile of the treated outcomes clears q0.

    Returns 1 when the sample quantile exceeds q0 + xi, 1/2 when it
    falls inside [q0 - xi, q0 + xi] (the tie buffer), 0 otherwise.
    Only defined for the innovation design, where q0 is known.
    """
    if not 0 <= q0 <= 1:
        raise ValueError("q0 must lie in [0,1]")
    half = Fraction(1, 2)

    def fn(sample: Sample) -> Prob:
        sq = sample_quantile(sample.y1, spec)
        if sq > q0 + xi:
            return 1
        if sq >= q0 - xi:
            return half
        return 0

    return TreatmentRule(fn, label="esr", design=INNOVATION, symmetric=True)


def _binary_keys(design: str, *, n0: int = 0, n1: int = 0, n: int = 0):
    if design == FIXED:
        for u in itertools.product((0, 1), repeat=n0):
            for v in itertools.product((0, 1), repeat=n1):
                yield (u, v)
    elif design == RANDOM:
        for t in itertools.product((0, 1), repeat=n):
            for y in itertools.product((0, 1), repeat=n):
                yield (t, y)
    elif design == INNOVATION:
        for y in itertools.product((0, 1), repeat=n):
            yield y
    else:
        raise ValueError(f"unknown design {design!r}")


def tabular_rule(design: str, table: Mapping[tuple, Prob], label: str) -> TreatmentRule:
    """Rule given by an explicit sample -> probability table."""
    for key, value in table.items():
        if not 0 <= value <= 1:
            raise ValueError(f"table value {value!r} at {key!r} outside [0,1]")

    def fn(sample: Sample) -> Prob:
        try:
            return table[sample.key]
        except KeyError:
            raise KeyError(
                f"sample {sample.key!r} outside the table domain of rule {label!r}"
            ) from None

    return TreatmentRule(fn, label=label, design=design, table=table)


def random_tabular_rule(
    design: str, seed: int, *, n0: int = 0, n1: int = 0, n: int = 0, denom: int = 1000
) -> TreatmentRule:
    """Deterministic pseudo-random table over every binary sample.

    Values are rationals k/denom so adversary certificates stay exact.
    """
    sizes = {FIXED: n0 + n1, RANDOM: 2 * n, INNOVATION: n}
    if design not in sizes:
        raise ValueError(f"unknown design {design!r}")
    if sizes[design] > 20:
        raise ValueError("random tabular rules are meant for small designs")
    rng = _random.Random(seed)
    table = {
        key: Fraction(rng.randrange(denom + 1), denom)
        for key in _binary_keys(design, n0=n0, n1=n1, n=n)
    }
    return tabular_rule(design, table, label=f"table:seed{seed}")


def _parse_bits(text: str) -> tuple:
    bits = tuple(int(c) for c in text.strip())
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"expected a 0/1 string, got {text!r}")
    return bits


def load_rule_table(path: str | Path, design: str) -> TreatmentRule:
    """Read a tabular rule from a plain-text file.

    One line per sample, ``bits -> value`` with value a decimal or
    ``num/den`` ratio.  Bit layout per design: fixed ``u;v`` (untreated
    outcomes; treated outcomes), random ``t;y``, innovation ``y``.
    Blank lines and ``#`` comments are ignored.
    """
    table: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        lhs, arrow, rhs = line.partition("->")
        if not arrow:
            raise ValueError(f"malformed table line: {raw!r}")
        value = frac(rhs.strip())
        parts = [p for p in lhs.strip().split(";")]
        if design == INNOVATION:
            if len(parts) != 1:
                raise ValueError(f"innovation table lines take one bit block: {raw!r}")
            key: tuple = _parse_bits(parts[0])
        else:
            if len(parts) != 2:
                raise ValueError(f"{design} table lines take two bit blocks: {raw!r}")
            key = (_parse_bits(parts[0]), _parse_bits(parts[1]))
        table[key] = value
    return tabular_rule(design, table, label=f"table:{path}")


def parse_rule(
    spec_text: str,
    *,
    design: Optional[str] = None,
    q0: Optional[Prob] = None,
    quantile_spec: Optional[QuantileSpec] = None,
    xi: Prob = DEFAULT_XI,
) -> TreatmentRule:
    """Parse a CLI rule spec: ``const:<p>``, ``esr`` or ``table:<file>``."""
    text = spec_text.strip()
    if text.startswith("const:"):
        return constant_rule(frac(text[len("const:"):]))
    if text == "esr":
        if q0 is None or quantile_spec is None:
            raise ValueError("esr needs the known q0 and a quantile spec")
        return empirical_success_rule(q0, quantile_spec, xi)
    if text.startswith("table:"):
        if design is None:
            raise ValueError("table rules need a design")
        return load_rule_table(text[len("table:"):], design)
    raise ValueError(f"unknown rule spec {spec_text!r}")
