"""Distributions on [0,1] with atoms and piecewise-uniform parts.

Probabilities and support points are plain numbers: ``fractions.Fraction``
(or ``int``) for exact arithmetic, ``float`` for approximate work.  All
operations preserve exactness when every input is rational; mixing in a
float silently degrades the computation to float mode.  Validation uses
exact equality in exact mode and ``FLOAT_TOL`` otherwise.

The quantile convention is the generalized one: the set of alpha-quantiles

    Q = {q : P(X <= q) >= alpha and P(X >= q) >= 1 - alpha}

is a nonempty closed interval, and ``quantile`` returns the convex
combination ``r*sup Q + (1-r)*inf Q``.
"""

from __future__ import annotations

import math
import numbers
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

Prob = Union[int, float, Fraction]

FLOAT_TOL = 1e-12

__all__ = [
    "DiscreteDist",
    "DomainError",
    "MixedDist",
    "Prob",
    "QuantileSpec",
    "cdf",
    "format_dist",
    "frac",
    "is_exact",
    "left_cdf",
    "mix",
    "mixture",
    "parse_dist",
    "quantile",
    "quantile_interval",
]


class DomainError(ValueError):
    """Argument outside the domain a distribution operation supports."""


def frac(x: Prob | str) -> Fraction:
    """Parse an exact probability/point from int, Fraction or string.

    Strings may be decimal ("0.1") or ratio ("1/10") form.  Floats are
    rejected: callers wanting float mode should pass floats through
    untouched rather than laundering them into Fractions.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot interpret {x!r} as an exact number")


def is_exact(*values: Prob) -> bool:
    """True when every value is rational (int or Fraction)."""
    return all(isinstance(v, numbers.Rational) for v in values)


def _check_unit(value: Prob, what: str) -> None:
    if not 0 <= value <= 1:
        raise DomainError(f"{what} must lie in [0,1], got {value!r}")


@dataclass(frozen=True)
class QuantileSpec:
    """Quantile level alpha plus the tie-breaking weight r.

    The boundary levels force the weight: alpha=0 uses the upper end of
    the quantile set (r=1) and alpha=1 the lower end (r=0).  Passing an
    inconsistent r at those levels is corrected silently.
    """

    alpha: Prob
    r: Prob = Fraction(0)

    def __post_init__(self) -> None:
        _check_unit(self.alpha, "alpha")
        _check_unit(self.r, "r")
        if self.alpha == 0 and self.r != 1:
            object.__setattr__(self, "r", Fraction(1))
        elif self.alpha == 1 and self.r != 0:
            object.__setattr__(self, "r", Fraction(0))


def _validate_total(total: Prob, what: str) -> None:
    if is_exact(total):
        if total != 1:
            raise ValueError(f"{what} masses must sum to 1 exactly, got {total}")
    elif abs(total - 1) > FLOAT_TOL:
        raise ValueError(f"{what} masses must sum to 1 within {FLOAT_TOL}, got {total}")


@dataclass(frozen=True)
class DiscreteDist:
    """Finite-support distribution on [0,1].

    ``points`` is strictly increasing, every point lies in [0,1], and
    the masses sum to one.  Zero-mass points are dropped on
    construction so equality means distributional equality.
    """

    points: tuple
    masses: tuple

    def __post_init__(self) -> None:
        if len(self.points) != len(self.masses):
            raise ValueError("points and masses must have equal length")
        if not self.points:
            raise ValueError("distribution needs at least one support point")
        pts = []
        mas = []
        for p, m in zip(self.points, self.masses):
            _check_unit(p, "support point")
            if m < 0:
                raise ValueError(f"negative mass {m!r} at {p!r}")
            if m == 0:
                continue
            pts.append(p)
            mas.append(m)
        for a, b in zip(pts, pts[1:]):
            if not a < b:
                raise ValueError("support must be strictly increasing")
        _validate_total(sum(mas), "discrete")
        object.__setattr__(self, "points", tuple(pts))
        object.__setattr__(self, "masses", tuple(mas))

    @property
    def atoms(self) -> tuple:
        return tuple(zip(self.points, self.masses))

    @property
    def segments(self) -> tuple:
        return ()

    @classmethod
    def from_pairs(cls, pairs: Iterable) -> "DiscreteDist":
        """Build from (point, mass) pairs; duplicate points accumulate."""
        acc: dict = {}
        for p, m in pairs:
            acc[p] = acc.get(p, 0) + m
        pts = sorted(acc)
        return cls(tuple(pts), tuple(acc[p] for p in pts))

    @classmethod
    def point_mass(cls, x: Prob) -> "DiscreteDist":
        return cls((x,), (Fraction(1),))

    @classmethod
    def bernoulli(cls, mass_at_zero: Prob) -> "DiscreteDist":
        """Two-point distribution on {0,1} with P(X=0) = mass_at_zero."""
        _check_unit(mass_at_zero, "mass_at_zero")
        one = Fraction(1) if is_exact(mass_at_zero) else 1.0
        return cls.from_pairs(((0, mass_at_zero), (1, one - mass_at_zero)))

    @classmethod
    def from_sample(cls, values: Sequence[Prob]) -> "DiscreteDist":
        """Empirical distribution: mass 1/len per value, repeats accumulate."""
        if not values:
            raise ValueError("empty sample has no empirical distribution")
        unit = Fraction(1, len(values))
        return cls.from_pairs((v, unit) for v in values)


@dataclass(frozen=True)
class MixedDist:
    """Atoms plus piecewise-constant density segments on [0,1].

    ``segments`` are (lo, hi, density) with lo < hi, pairwise disjoint
    and sorted; total mass (atoms plus integrated density) is one.
    Zero-mass atoms and zero-density segments are dropped.
    """

    atoms: tuple = ()
    segments: tuple = ()

    def __post_init__(self) -> None:
        atoms = []
        for p, m in sorted(self.atoms, key=lambda a: a[0]):
            _check_unit(p, "atom point")
            if m < 0:
                raise ValueError(f"negative atom mass {m!r} at {p!r}")
            if m == 0:
                continue
            if atoms and atoms[-1][0] == p:
                raise ValueError(f"duplicate atom at {p!r}")
            atoms.append((p, m))
        segs = []
        for lo, hi, d in sorted(self.segments, key=lambda s: s[0]):
            _check_unit(lo, "segment endpoint")
            _check_unit(hi, "segment endpoint")
            if not lo < hi:
                raise ValueError(f"segment must have lo < hi, got ({lo!r}, {hi!r})")
            if d < 0:
                raise ValueError(f"negative density {d!r}")
            if d == 0:
                continue
            if segs and lo < segs[-1][1]:
                raise ValueError("segments overlap")
            if segs and lo == segs[-1][1] and d == segs[-1][2]:
                segs[-1] = (segs[-1][0], hi, d)
            else:
                segs.append((lo, hi, d))
        total = sum(m for _, m in atoms) + sum(d * (hi - lo) for lo, hi, d in segs)
        _validate_total(total, "mixed")
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def two_piece_uniform(cls, alpha: Prob, anchor: Prob) -> "MixedDist":
        """Continuous density alpha/anchor below the anchor point and
        (1-alpha)/(1-anchor) above it, so the CDF equals alpha exactly at
        the anchor.  Requires alpha and anchor strictly inside (0,1)."""
        if not (0 < alpha < 1 and 0 < anchor < 1):
            raise DomainError("two_piece_uniform needs alpha, anchor in (0,1)")
        return cls(
            atoms=(),
            segments=((0, anchor, alpha / anchor), (anchor, 1, (1 - alpha) / (1 - anchor))),
        )


Dist = Union[DiscreteDist, MixedDist]


def cdf(dist: Dist, q: Prob) -> Prob:
    """P(X <= q), right-continuous; exact when all inputs are exact."""
    _check_unit(q, "q")
    total = sum(m for p, m in dist.atoms if p <= q)
    for lo, hi, d in dist.segments:
        if q <= lo:
            break
        total = total + d * (min(q, hi) - lo)
    return total


def left_cdf(dist: Dist, q: Prob) -> Prob:
    """P(X < q), the left limit of the CDF at q."""
    _check_unit(q, "q")
    total = sum(m for p, m in dist.atoms if p < q)
    for lo, hi, d in dist.segments:
        if q <= lo:
            break
        total = total + d * (min(q, hi) - lo)
    return total


def _cdf_profile(dist: Dist):
    """Breakpoints with left/right CDF values and inter-point densities.

    Returns (points, f_left, f_right, dens) where points includes 0 and 1,
    dens[i] is the density on (points[i], points[i+1]), f_left[i] the CDF
    left limit at points[i] and f_right[i] the CDF value at points[i].
    """
    pts = {0, 1}
    jump = {}
    for p, m in dist.atoms:
        pts.add(p)
        jump[p] = m
    for lo, hi, _ in dist.segments:
        pts.add(lo)
        pts.add(hi)
    points = sorted(pts)

    def density_on(a, b):
        for lo, hi, d in dist.segments:
            if lo <= a and b <= hi:
                return d
        return 0

    dens = [density_on(a, b) for a, b in zip(points, points[1:])]
    f_left = []
    f_right = []
    acc = 0
    for i, p in enumerate(points):
        if i > 0:
            acc = acc + dens[i - 1] * (p - points[i - 1])
        f_left.append(acc)
        acc = acc + jump.get(p, 0)
        f_right.append(acc)
    return points, f_left, f_right, dens


def quantile_interval(dist: Dist, alpha: Prob):
    """The closed interval [inf Q, sup Q] of generalized alpha-quantiles."""
    _check_unit(alpha, "alpha")
    points, f_left, f_right, dens = _cdf_profile(dist)
    n = len(points)

    lo = None
    for i in range(n):
        if f_right[i] >= alpha:
            if i > 0 and f_left[i] >= alpha and f_right[i - 1] < alpha:
                # CDF crosses alpha strictly inside the previous segment.
                lo = points[i - 1] + (alpha - f_right[i - 1]) / dens[i - 1]
            else:
                lo = points[i]
            break
    if lo is None:  # mass deficit from float rounding
        lo = points[-1]

    hi = points[0]
    if f_left[n - 1] <= alpha:
        hi = points[n - 1]
    else:
        for i in range(n - 2, -1, -1):
            # left limits over (points[i], points[i+1]] range in
            # (f_right[i], f_left[i+1]]
            if f_right[i] <= alpha:
                if dens[i] == 0:
                    hi = points[i + 1]
                else:
                    hi = min(points[i] + (alpha - f_right[i]) / dens[i], points[i + 1])
                break
            if f_left[i] <= alpha:
                hi = points[i]
                break
    return lo, hi


def quantile(dist: Dist, spec: QuantileSpec) -> Prob:
    """Generalized alpha-quantile under the r-convention of ``spec``."""
    lo, hi = quantile_interval(dist, spec.alpha)
    if spec.r == 0:
        return lo
    if spec.r == 1:
        return hi
    return spec.r * hi + (1 - spec.r) * lo


def mixture(dists: Sequence[Dist], weights: Sequence[Prob]) -> MixedDist:
    """Convex combination of distributions; CDF is the weighted CDF sum."""
    if len(dists) != len(weights):
        raise ValueError("need one weight per distribution")
    total_w = sum(weights)
    if is_exact(total_w):
        if total_w != 1:
            raise ValueError(f"weights must sum to 1, got {total_w}")
    elif abs(total_w - 1) > FLOAT_TOL:
        raise ValueError(f"weights must sum to 1, got {total_w}")
    if any(w < 0 for w in weights):
        raise ValueError("weights must be nonnegative")

    atom_acc: dict = {}
    cuts = set()
    for d, w in zip(dists, weights):
        if w == 0:
            continue
        for p, m in d.atoms:
            atom_acc[p] = atom_acc.get(p, 0) + w * m
        for lo, hi, _ in d.segments:
            cuts.add(lo)
            cuts.add(hi)

    segs = []
    if cuts:
        edges = sorted(cuts)
        for a, b in zip(edges, edges[1:]):
            dens = 0
            for d, w in zip(dists, weights):
                if w == 0:
                    continue
                for lo, hi, dd in d.segments:
                    if lo <= a and b <= hi:
                        dens = dens + w * dd
            if dens != 0:
                if segs and segs[-1][1] == a and segs[-1][2] == dens:
                    segs[-1] = (segs[-1][0], b, dens)
                else:
                    segs.append((a, b, dens))
    return MixedDist(atoms=tuple(sorted(atom_acc.items())), segments=tuple(segs))


def mix(d0: Dist, d1: Dist, weight_on_d1: Prob) -> MixedDist:
    """Two-component mixture: weight_on_d1 on d1, the rest on d0."""
    _check_unit(weight_on_d1, "weight_on_d1")
    one = Fraction(1) if is_exact(weight_on_d1) else 1.0
    return mixture((d0, d1), (one - weight_on_d1, weight_on_d1))


def format_dist(dist: Dist) -> str:
    """Exact plain-text literal for a distribution; inverse of
    ``parse_dist`` for the discrete form."""
    if not dist.segments:
        pairs = ", ".join(f"({p}, {m})" for p, m in dist.atoms)
        return f"discrete:[{pairs}]"
    atoms = ", ".join(f"({p}, {m})" for p, m in dist.atoms)
    segs = ", ".join(f"({lo}, {hi}, {d})" for lo, hi, d in dist.segments)
    return f"mixed:atoms=[{atoms}];segments=[{segs}]"


_DISCRETE_PAIR = re.compile(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)")


def parse_dist(text: str) -> Dist:
    """Parse a distribution literal.

    Two forms are supported, both parsed exactly:

    - ``discrete:[(point, mass), ...]`` with points/masses as decimals
      or ratios, e.g. ``discrete:[(0, 49/100), (0.9, 51/100)]``
    - ``choice2:{alpha=0.5, q0=0.9}`` for the two-piece uniform density
      anchored at q0
    """
    body = text.strip()
    if body.startswith("discrete:"):
        payload = body[len("discrete:"):].strip()
        if not (payload.startswith("[") and payload.endswith("]")):
            raise ValueError(f"malformed discrete literal: {text!r}")
        pairs = [(frac(p), frac(m)) for p, m in _DISCRETE_PAIR.findall(payload)]
        if not pairs:
            raise ValueError(f"no (point, mass) pairs in {text!r}")
        return DiscreteDist.from_pairs(pairs)
    if body.startswith("choice2:"):
        payload = body[len("choice2:"):].strip().strip("{}")
        fields = {}
        for part in payload.split(","):
            key, _, val = part.partition("=")
            fields[key.strip()] = frac(val.strip())
        try:
            return MixedDist.two_piece_uniform(fields["alpha"], fields["q0"])
        except KeyError as exc:
            raise ValueError(f"choice2 literal needs alpha and q0: {text!r}") from exc
    raise ValueError(f"unknown distribution literal: {text!r}")
