"""Exact outcome distributions and regret for the three sampling designs.

The central collapse: the randomized assignment is independent of
everything else, so the outcome distribution under a rule depends on
the state only through its two marginals and on the rule only through
e = E_w[delta(w)], the sample-averaged treatment probability.  The
engine computes e exactly, by sufficient-statistic aggregation for
tabular rules over binary samples (cost polynomial in the sample size)
or by explicit sample enumeration under a hard budget, and everything
else follows from mixing the marginals with weight e.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .dists import (
    Dist,
    DiscreteDist,
    MixedDist,
    Prob,
    QuantileSpec,
    mix,
    quantile,
)
from .rules import FIXED, INNOVATION, RANDOM, Sample, TreatmentRule

MAX_ENUMERATION = 10_000_000

__all__ = [
    "DesignSpec",
    "EnumerationBudgetError",
    "MAX_ENUMERATION",
    "StateOfNature",
    "design_aggregates",
    "enumerate_oracle",
    "expected_assignment",
    "outcome_distribution",
    "regret",
]


class EnumerationBudgetError(RuntimeError):
    """Sample space too large for exact enumeration; caller must switch
    to an approximate path explicitly."""


@dataclass(frozen=True)
class StateOfNature:
    """Independent marginals for the untreated and treated outcome."""

    y0: Dist
    y1: Dist


@dataclass(frozen=True)
class DesignSpec:
    """Sampling design: fixed counts, random assignment, or innovation."""

    kind: str
    n0: int = 0
    n1: int = 0
    n: int = 0
    p: Optional[Prob] = None
    q0_known: Optional[Prob] = None

    @classmethod
    def fixed(cls, n0: int, n1: int) -> "DesignSpec":
        if n0 < 0 or n1 < 0:
            raise ValueError("sample counts must be nonnegative")
        return cls(FIXED, n0=n0, n1=n1)

    @classmethod
    def random_assignment(cls, n: int, p: Prob) -> "DesignSpec":
        if n < 0:
            raise ValueError("sample size must be nonnegative")
        if not 0 < p < 1:
            raise ValueError("assignment probability must lie in (0,1)")
        return cls(RANDOM, n=n, p=p)

    @classmethod
    def innovation(cls, n: int, q0_known: Prob) -> "DesignSpec":
        if n < 0:
            raise ValueError("sample size must be nonnegative")
        if not 0 <= q0_known <= 1:
            raise ValueError("known quantile must lie in [0,1]")
        return cls(INNOVATION, n=n, q0_known=q0_known)


def _mass_at_zero_binary(dist: Dist) -> Optional[Prob]:
    """P(X=0) when the distribution is supported on {0,1}, else None."""
    if dist.segments:
        return None
    mass = Fraction(0)
    for p, m in dist.atoms:
        if p == 0:
            mass = m
        elif p != 1:
            return None
    return mass


def _check_budget(terms: int, budget: int) -> None:
    if terms > budget:
        raise EnumerationBudgetError(
            f"exact enumeration needs {terms} rule evaluations, budget is {budget}"
        )


def _aggregate_fixed(table, n0: int, n1: int):
    """delta mass per (zeros among untreated, zeros among treated)."""
    agg: dict = {}
    for (u, v), val in table.items():
        if len(u) != n0 or len(v) != n1:
            raise ValueError("table keys do not match the design sizes")
        z = (n0 - sum(u), n1 - sum(v))
        agg[z] = agg.get(z, 0) + val
    return agg

def _aggregate_random(table, n: int):
    """delta mass per (treated count, zeros untreated, zeros treated)."""
    agg: dict = {}
    for (t, y), val in table.items():
        if len(t) != n or len(y) != n:
            raise ValueError("table keys do not match the design size")
        i = sum(1 for tl, yl in zip(t, y) if tl == 0 and yl == 0)
        j = sum(1 for tl, yl in zip(t, y) if tl == 1 and yl == 0)
        key = (sum(t), i, j)
        agg[key] = agg.get(key, 0) + val
    return agg

def _aggregate_innovation(table, n: int):
    """delta mass per number of zeros among the treated outcomes."""
    agg: dict = {}
    for y, val in table.items():
        if len(y) != n:
            raise ValueError("table keys do not match the design size")
        z = n - sum(y)
        agg[z] = agg.get(z, 0) + val
    return agg


def _table_covers_design(rule: TreatmentRule, d: DesignSpec) -> bool:
    if d.kind == FIXED:
        return len(rule.table) == 2 ** (d.n0 + d.n1)
    if d.kind == RANDOM:
        return len(rule.table) == 4**d.n
    return len(rule.table) == 2**d.n


def design_aggregates(rule: TreatmentRule, d: DesignSpec):
    """Sufficient-statistic aggregates of a tabular rule, cached per design."""
    if rule.table is None:
        raise ValueError(f"rule {rule.label!r} has no tabular form to aggregate")
    cache = getattr(rule, "_aggregate_cache", None)
    if cache is None:
        cache = {}
        rule._aggregate_cache = cache
    key = (d.kind, d.n0, d.n1, d.n)
    if key not in cache:
        if d.kind == FIXED:
            cache[key] = _aggregate_fixed(rule.table, d.n0, d.n1)
        elif d.kind == RANDOM:
            cache[key] = _aggregate_random(rule.table, d.n)
        else:
            cache[key] = _aggregate_innovation(rule.table, d.n)
    return cache[key]


def _expected_assignment_tabular(rule: TreatmentRule, s: StateOfNature, d: DesignSpec):
    a0 = _mass_at_zero_binary(s.y0)
    a1 = _mass_at_zero_binary(s.y1)
    if d.kind == FIXED:
        if a0 is None or a1 is None:
            return None
        agg = design_aggregates(rule, d)
        return sum(
            a0**z0 * (1 - a0) ** (d.n0 - z0) * a1**z1 * (1 - a1) ** (d.n1 - z1) * val
            for (z0, z1), val in agg.items()
        )
    if d.kind == RANDOM:
        if a0 is None or a1 is None:
            return None
        agg = design_aggregates(rule, d)
        return sum(
            d.p**t
            * (1 - d.p) ** (d.n - t)
            * a0**i
            * (1 - a0) ** (d.n - t - i)
            * a1**j
            * (1 - a1) ** (t - j)
            * val
            for (t, i, j), val in agg.items()
        )
    if a1 is None:
        return None
    agg = design_aggregates(rule, d)
    return sum(
        a1**z * (1 - a1) ** (d.n - z) * val for z, val in agg.items()
    )


def _weighted_outcome_tuples(dist: Dist, count: int):
    """Iterate (outcome tuple, probability) over supp(dist)^count."""
    atoms = dist.atoms
    for combo in itertools.product(atoms, repeat=count):
        weight = math.prod((m for _, m in combo), start=Fraction(1))
        yield tuple(p for p, _ in combo), weight


def _enumerate_terms(s: StateOfNature, d: DesignSpec) -> int:
    k0 = len(s.y0.atoms)
    k1 = len(s.y1.atoms)
    if d.kind == FIXED:
        return k0**d.n0 * k1**d.n1
    if d.kind == RANDOM:
        return (k0 + k1) ** d.n
    return k1**d.n


def _require_discrete(s: StateOfNature, d: DesignSpec) -> None:
    needs_y0 = d.kind in (FIXED, RANDOM)
    if (needs_y0 and s.y0.segments) or s.y1.segments:
        raise EnumerationBudgetError(
            "exact enumeration needs discrete sampled marginals"
        )


def _expected_assignment_enumerated(
    rule: TreatmentRule, s: StateOfNature, d: DesignSpec, budget: int
):
    _require_discrete(s, d)
    if d.kind == INNOVATION and rule.symmetric:
        return _expected_assignment_multiset(rule, s.y1, d.n, budget)
    _check_budget(_enumerate_terms(s, d), budget)
    total = Fraction(0)
    if d.kind == FIXED:
        for y0, w0 in _weighted_outcome_tuples(s.y0, d.n0):
            for y1, w1 in _weighted_outcome_tuples(s.y1, d.n1):
                total += w0 * w1 * rule(Sample.fixed(y0, y1))
    elif d.kind == RANDOM:
        marginals = (s.y0, s.y1)
        for t in itertools.product((0, 1), repeat=d.n):
            wt = d.p ** sum(t) * (1 - d.p) ** (d.n - sum(t))
            pools = [marginals[ti].atoms for ti in t]
            for combo in itertools.product(*pools):
                wy = math.prod((m for _, m in combo), start=Fraction(1))
                y = tuple(p for p, _ in combo)
                total += wt * wy * rule(Sample.random_assignment(t, y))
    else:
        for y1, w1 in _weighted_outcome_tuples(s.y1, d.n):
            total += w1 * rule(Sample.innovation(y1))
    return total


def _expected_assignment_multiset(rule: TreatmentRule, y1: Dist, n: int, budget: int):
    """Permutation-invariant rules: enumerate sorted samples only."""
    atoms = y1.atoms
    _check_budget(math.comb(n + len(atoms) - 1, n), budget)
    total = Fraction(0)
    for combo in itertools.combinations_with_replacement(atoms, n):
        weight = math.prod((m for _, m in combo), start=Fraction(1))
        counts: dict = {}
        for p, _ in combo:
            counts[p] = counts.get(p, 0) + 1
        orderings = math.factorial(n)
        for c in counts.values():
            orderings //= math.factorial(c)
        total += weight * orderings * rule(Sample.innovation(tuple(p for p, _ in combo)))
    return total


def expected_assignment(
    rule: TreatmentRule,
    s: StateOfNature,
    d: DesignSpec,
    *,
    budget: int = MAX_ENUMERATION,
) -> Prob:
    """e = E_w[delta(w)], the sample-averaged treatment probability.

    Constant rules short-circuit; tabular rules over binary samples are
    aggregated by sufficient statistics; anything else is enumerated
    exactly, failing loudly when the budget is exceeded.
    """
    if rule.constant is not None:
        return rule.constant
    if rule.table is not None and _table_covers_design(rule, d):
        value = _expected_assignment_tabular(rule, s, d)
        if value is not None:
            return value
    return _expected_assignment_enumerated(rule, s, d, budget)


def outcome_distribution(
    rule: TreatmentRule,
    s: StateOfNature,
    d: DesignSpec,
    *,
    budget: int = MAX_ENUMERATION,
) -> MixedDist:
    """Distribution of the realized outcome under the rule."""
    e = expected_assignment(rule, s, d, budget=budget)
    return mix(s.y0, s.y1, e)


def regret(
    rule: TreatmentRule,
    s: StateOfNature,
    d: DesignSpec,
    spec: QuantileSpec,
    *,
    budget: int = MAX_ENUMERATION,
) -> Prob:
    """Shortfall of the rule's outcome quantile below the benchmark.

    The benchmark is the larger marginal quantile, attained by one of
    the two deterministic no-data rules.  Under the innovation design
    the untreated quantile enters as the known value from the design,
    not recomputed from the state.
    """
    q1 = quantile(s.y1, spec)
    if d.kind == INNOVATION:
        q0 = d.q0_known
    else:
        q0 = quantile(s.y0, spec)
    benchmark = max(q0, q1)
    achieved = quantile(outcome_distribution(rule, s, d, budget=budget), spec)
    return benchmark - achieved


def enumerate_oracle(
    rule: TreatmentRule,
    s: StateOfNature,
    d: DesignSpec,
    *,
    budget: int = MAX_ENUMERATION,
) -> Prob:
    """Brute-force E_w[delta(w)] by full sample enumeration.

    Deliberately shares no aggregation or shortcut logic with
    ``expected_assignment``; test harnesses cross-check the two.
    """
    _require_discrete(s, d)
    _check_budget(_enumerate_terms(s, d), budget)
    total = Fraction(0)
    if d.kind == FIXED:
        for u in itertools.product(s.y0.atoms, repeat=d.n0):
            for v in itertools.product(s.y1.atoms, repeat=d.n1):
                weight = Fraction(1)
                for _, m in u:
                    weight *= m
                for _, m in v:
                    weight *= m
                sample = Sample.fixed(tuple(p for p, _ in u), tuple(p for p, _ in v))
                total += weight * rule(sample)
    elif d.kind == RANDOM:
        for t in itertools.product((0, 1), repeat=d.n):
            for combo in itertools.product(*[(s.y0, s.y1)[ti].atoms for ti in t]):
                weight = Fraction(1)
                for ti in t:
                    weight *= d.p if ti == 1 else 1 - d.p
                for _, m in combo:
                    weight *= m
                sample = Sample.random_assignment(t, tuple(p for p, _ in combo))
                total += weight * rule(sample)
    else:
        for combo in itertools.product(s.y1.atoms, repeat=d.n):
            weight = Fraction(1)
            for _, m in combo:
                weight *= m
            total += weight * rule(Sample.innovation(tuple(p for p, _ in combo)))
    return total
