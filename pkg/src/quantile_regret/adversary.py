"""Worst-case states of nature, constructed and certified exactly.

Each construction returns an :class:`AdversaryCertificate` whose
``achieved_regret`` has been recomputed through the exact engine on the
way out, so a returned certificate is already verified; ``recheck``
repeats the computation independently for audits.

Strategy per design, for a tabular rule over binary samples and a
quantile level strictly inside (0,1):

- fixed counts / random assignment: nature uses a Bernoulli pair.  If
  the rule ever withholds treatment after an all-zero untreated block,
  nature makes the untreated arm degenerate at 0 and the treated arm
  Bernoulli just under the level; otherwise it mirrors the construction.
  Either way the realized outcome keeps strictly more than alpha mass
  at 0 while the better arm has quantile 1, so regret is exactly 1.
- innovation: with the untreated quantile q0 known, nature anchors the
  untreated arm at q0 and supports the treated arm on the components of
  a witness sample the rule treats with positive probability; regret is
  exactly q0.  The complementary state with treated quantile 1 yields
  1 - q0 against never-treating.

The epsilon that makes "just under the level" precise is found by
searching decreasing powers of ten and certifying each candidate with
exact rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional

from .dists import (
    DiscreteDist,
    Dist,
    Prob,
    QuantileSpec,
    cdf,
    format_dist,
    frac,
    is_exact,
    quantile,
    quantile_interval,
)
from .engine import DesignSpec, StateOfNature, design_aggregates, regret
from .rules import FIXED, INNOVATION, RANDOM, Sample, TreatmentRule, tabular_rule

__all__ = [
    "AdversaryCertificate",
    "CertificationError",
    "MinimaxSet",
    "RuleIsZeroError",
    "UnsupportedBoundaryCaseError",
    "is_minimax_known_y0",
    "maximal_regret_innovation",
    "minimax_set_known_y0",
    "q1_equals_one_case",
    "q_delta",
    "worst_case_fixed",
    "worst_case_innovation",
    "worst_case_random",
]


class CertificationError(RuntimeError):
    """A constructed state failed its exact regret certification."""


class RuleIsZeroError(ValueError):
    """No searched sample is treated with positive probability."""


class UnsupportedBoundaryCaseError(ValueError):
    """The known-Y0 analysis requires F(q_alpha) strictly above alpha."""


@dataclass(frozen=True)
class AdversaryCertificate:
    """A concrete state of nature attaining a claimed regret.

    ``epsilon`` is the slack used in the construction, None for
    branches that need none.  ``achieved_regret`` is exact (rational
    whenever the inputs were rational).
    """

    branch: str
    state: StateOfNature
    design: DesignSpec
    spec: QuantileSpec
    achieved_regret: Prob
    epsilon: Optional[Prob] = None

    def recheck(self, rule: TreatmentRule) -> bool:
        """Recompute the regret through the engine and compare exactly."""
        return regret(rule, self.state, self.design, self.spec) == self.achieved_regret

    def serialize(self) -> str:
        lines = [
            f"branch: {self.branch}",
            f"design: {self.design.kind} n0={self.design.n0} n1={self.design.n1} "
            f"n={self.design.n} p={self.design.p} q0={self.design.q0_known}",
            f"alpha: {self.spec.alpha}",
            f"r: {self.spec.r}",
            f"epsilon: {self.epsilon if self.epsilon is not None else '-'}",
            f"y0: {format_dist(self.state.y0)}",
            f"y1: {format_dist(self.state.y1)}",
            f"achieved_regret: {self.achieved_regret}",
        ]
        return "\n".join(lines)


def _exact(value: Prob, name: str) -> Fraction:
    if not is_exact(value):
        raise TypeError(
            f"{name} must be rational for exact certification, got {value!r}"
        )
    return Fraction(value)


def _rule_on_binary(rule: TreatmentRule, key: tuple, design: str) -> Prob:
    if rule.constant is not None:
        return rule.constant
    if design == FIXED:
        sample = Sample.fixed(*key)
    elif design == RANDOM:
        sample = Sample.random_assignment(*key)
    else:
        sample = Sample.innovation(key)
    return rule(sample)


def _search_epsilon(
    rule: TreatmentRule,
    design: DesignSpec,
    spec: QuantileSpec,
    build_state: Callable[[Fraction], Optional[StateOfNature]],
    target: Prob,
    *,
    max_power: int = 40,
):
    """First epsilon = 10^-k whose state certifies the target regret."""
    for k in range(1, max_power + 1):
        eps = Fraction(1, 10**k)
        state = build_state(eps)
        if state is None:
            continue
        achieved = regret(rule, state, design, spec)
        if achieved == target:
            return eps, state, achieved
    raise CertificationError(
        f"no epsilon in 10^-1..10^-{max_power} certifies regret {target}"
    )


def _bernoulli_state(a0: Prob, a1: Prob) -> StateOfNature:
    return StateOfNature(DiscreteDist.bernoulli(a0), DiscreteDist.bernoulli(a1))


def _alpha_one_certificate(
    rule: TreatmentRule, design: DesignSpec, spec: QuantileSpec, degenerate_checks
) -> AdversaryCertificate:
    """Level one: only rules pinned to 0 or 1 on a degenerate-support
    state suffer regret; everything else attains the benchmark."""
    for branch, state, pinned in degenerate_checks:
        if pinned:
            achieved = regret(rule, state, design, spec)
            if achieved != 1:
                raise CertificationError(f"{branch}: expected regret 1, got {achieved}")
            return AdversaryCertificate(branch, state, design, spec, achieved)
    state = _bernoulli_state(Fraction(1, 2), Fraction(1, 2))
    achieved = regret(rule, state, design, spec)
    if achieved != 0:
        raise CertificationError(f"alpha1-degenerate: expected regret 0, got {achieved}")
    return AdversaryCertificate("alpha1-degenerate", state, design, spec, achieved)


def worst_case_fixed(
    rule: TreatmentRule, n0: int, n1: int, alpha: Prob, r: Prob = Fraction(0)
) -> AdversaryCertificate:
    """State inflicting the maximal possible regret under fixed counts.

    For alpha in (0,1) (and alpha=0 under the upper-quantile
    convention) the certified regret is exactly 1 for every rule.
    """
    alpha = _exact(alpha, "alpha")
    spec = QuantileSpec(alpha, _exact(r, "r"))
    design = DesignSpec.fixed(n0, n1)

    def at(u, v):
        return _rule_on_binary(rule, (u, v), FIXED)

    if alpha == 1:
        return _alpha_one_certificate(
            rule,
            design,
            spec,
            (
                (
                    "alpha1-pinned-to-treat",
                    _bernoulli_state(Fraction(0), Fraction(1)),
                    at((1,) * n0, (0,) * n1) == 1,
                ),
                (
                    "alpha1-pinned-to-control",
                    _bernoulli_state(Fraction(1), Fraction(0)),
                    at((0,) * n0, (1,) * n1) == 0,
                ),
            ),
        )

    if alpha == 0:
        # try punishing treatment first; if the rule never treats after
        # an all-ones untreated block, punish the control arm instead
        state = _bernoulli_state(Fraction(0), Fraction(1, 10))
        achieved = regret(rule, state, design, spec)
        branch = "alpha0,a1=eps"
        if achieved != 1:
            state = _bernoulli_state(Fraction(1, 10), Fraction(0))
            achieved = regret(rule, state, design, spec)
            branch = "alpha0,a0=eps"
        if achieved != 1:
            raise CertificationError(f"{branch}: expected regret 1, got {achieved}")
        return AdversaryCertificate(
            branch, state, design, spec, achieved, epsilon=Fraction(1, 10)
        )

    if rule.constant is not None:
        treats_zero_block_surely = rule.constant == 1
    else:
        treats_zero_block_surely = all(
            at((0,) * n0, v) == 1 for v in itertools.product((0, 1), repeat=n1)
        )
    if treats_zero_block_surely:
        branch = "a0=alpha-eps,a1=1"
        build = lambda eps: (
            _bernoulli_state(alpha - eps, Fraction(1)) if eps < alpha else None
        )
    else:
        branch = "a0=1,a1=alpha-eps"
        build = lambda eps: (
            _bernoulli_state(Fraction(1), alpha - eps) if eps < alpha else None
        )
    eps, state, achieved = _search_epsilon(rule, design, spec, build, Fraction(1))
    return AdversaryCertificate(branch, state, design, spec, achieved, epsilon=eps)


def worst_case_random(
    rule: TreatmentRule, n: int, p: Prob, alpha: Prob, r: Prob = Fraction(0)
) -> AdversaryCertificate:
    """State inflicting the maximal possible regret under random assignment."""
    alpha = _exact(alpha, "alpha")
    spec = QuantileSpec(alpha, _exact(r, "r"))
    design = DesignSpec.random_assignment(n, _exact(p, "p"))

    def at(t, y):
        return _rule_on_binary(rule, (t, y), RANDOM)

    statuses = list(itertools.product((0, 1), repeat=n))

    if alpha == 1:
        # under a degenerate pair every status vector occurs; outcomes
        # are then pinned by the statuses
        return _alpha_one_certificate(
            rule,
            design,
            spec,
            (
                (
                    "alpha1-pinned-to-treat",
                    _bernoulli_state(Fraction(0), Fraction(1)),
                    all(at(t, tuple(1 - ti for ti in t)) == 1 for t in statuses),
                ),
                (
                    "alpha1-pinned-to-control",
                    _bernoulli_state(Fraction(1), Fraction(0)),
                    all(at(t, t) == 0 for t in statuses),
                ),
            ),
        )

    if alpha == 0:
        state = _bernoulli_state(Fraction(0), Fraction(1, 10))
        achieved = regret(rule, state, design, spec)
        branch = "alpha0,a1=eps"
        if achieved != 1:
            state = _bernoulli_state(Fraction(1, 10), Fraction(0))
            achieved = regret(rule, state, design, spec)
            branch = "alpha0,a0=eps"
        if achieved != 1:
            raise CertificationError(f"{branch}: expected regret 1, got {achieved}")
        return AdversaryCertificate(
            branch, state, design, spec, achieved, epsilon=Fraction(1, 10)
        )

    if rule.constant is not None:
        saturated = rule.constant == 1
    else:
        agg = design_aggregates(rule, design)
        saturated = all(
            agg.get((t, n - t, j), 0) == math.comb(n, t) * math.comb(t, j)
            for t in range(n + 1)
            for j in range(t + 1)
        )
    if saturated:
        branch = "a0=alpha-eps,a1=1"
        build = lambda eps: (
            _bernoulli_state(alpha - eps, Fraction(1)) if eps < alpha else None
        )
    else:
        branch = "a0=1,a1=alpha-eps"
        build = lambda eps: (
            _bernoulli_state(Fraction(1), alpha - eps) if eps < alpha else None
        )
    eps, state, achieved = _search_epsilon(rule, design, spec, build, Fraction(1))
    return AdversaryCertificate(branch, state, design, spec, achieved, epsilon=eps)


def _find_witness(
    rule: TreatmentRule, n: int, pool: Optional[Iterable] = None
) -> Optional[tuple]:
    """A sample the rule treats with positive probability, if any.

    Searches binary samples first, then candidate values from ``pool``.
    Black-box rules that vanish on the searched set but not everywhere
    go undetected; the search is only semi-decidable.
    """
    if n == 0:
        return () if rule(Sample.innovation(())) > 0 else None
    for y in itertools.product((0, 1), repeat=n):
        if rule(Sample.innovation(y)) > 0:
            return y
    if pool is not None:
        values = sorted(set(pool))
        for y in itertools.product(values, repeat=n):
            if rule(Sample.innovation(y)) > 0:
                return y
    return None


def _lemma_treated_marginal(witness: tuple, n: int, alpha: Fraction) -> DiscreteDist:
    """Treated marginal supported on {0} and the witness components.

    Mass (alpha+1)/2 sits at 0 plus (1/n)(1-(alpha+1)/2) per witness
    component, so the witness sample itself has positive probability
    while the treated quantile stays at 0.
    """
    base = (alpha + 1) / 2
    unit = Fraction(1, n) * (1 - base)
    pairs = [(Fraction(0), base)]
    for value in witness:
        pairs.append((frac(value) if not isinstance(value, float) else value, unit))
    return DiscreteDist.from_pairs(pairs)


def worst_case_innovation(
    rule: TreatmentRule,
    n: int,
    q0: Prob,
    alpha: Prob,
    r: Prob = Fraction(0),
    witness: Optional[tuple] = None,
    witness_pool: Optional[Iterable] = None,
) -> AdversaryCertificate:
    """State achieving regret exactly q0 against any rule that treats
    some sample with positive probability (innovation design).

    Raises :class:`RuleIsZeroError` when no witness is found; the
    caller should fall back to :func:`q1_equals_one_case`.
    """
    alpha = _exact(alpha, "alpha")
    if alpha == 1:
        raise ValueError("level 1 is degenerate here; no q0-regret construction")
    q0 = _exact(q0, "q0")
    spec = QuantileSpec(alpha, _exact(r, "r"))
    design = DesignSpec.innovation(n, q0)

    if q0 == 0:
        state = StateOfNature(DiscreteDist.point_mass(0), DiscreteDist.point_mass(0))
        achieved = regret(rule, state, design, spec)
        if achieved != 0:
            raise CertificationError(f"trivial-q0-zero: expected 0, got {achieved}")
        return AdversaryCertificate("trivial-q0-zero", state, design, spec, achieved)

    if witness is None:
        witness = _find_witness(rule, n, witness_pool)
        if witness is None:
            raise RuleIsZeroError(
                "rule treats nothing on the searched samples; "
                "use q1_equals_one_case instead"
            )
    elif rule(Sample.innovation(tuple(witness))) == 0:
        raise ValueError("supplied witness has zero treatment probability")
    witness = tuple(witness)

    y1 = (
        DiscreteDist.point_mass(0)
        if n == 0
        else _lemma_treated_marginal(witness, n, alpha)
    )

    if alpha == 0:
        state = StateOfNature(DiscreteDist.point_mass(q0), y1)
        achieved = regret(rule, state, design, spec)
        if achieved != q0:
            raise CertificationError(f"lemma1 alpha=0: expected {q0}, got {achieved}")
        return AdversaryCertificate("lemma1", state, design, spec, achieved)

    def build(eps: Fraction) -> Optional[StateOfNature]:
        if eps >= alpha:
            return None
        y0 = DiscreteDist.from_pairs(((0, alpha - eps), (q0, 1 - alpha + eps)))
        return StateOfNature(y0, y1)

    eps, state, achieved = _search_epsilon(rule, design, spec, build, q0)
    return AdversaryCertificate("lemma1", state, design, spec, achieved, epsilon=eps)


def q1_equals_one_case(
    rule: TreatmentRule,
    n: int,
    q0: Prob,
    alpha: Prob,
    r: Prob = Fraction(0),
    epsilon: Prob = Fraction(1, 10**6),
) -> AdversaryCertificate:
    """State with treated quantile 1 (point mass at 1); the untreated
    arm stays anchored at q0.  Against never-treating the regret is
    exactly 1 - q0."""
    alpha = _exact(alpha, "alpha")
    q0 = _exact(q0, "q0")
    epsilon = _exact(epsilon, "epsilon")
    spec = QuantileSpec(alpha, _exact(r, "r"))
    design = DesignSpec.innovation(n, q0)

    mass_at_zero = alpha - epsilon if alpha > epsilon else Fraction(0)
    if q0 == 0 or mass_at_zero == 0:
        y0: Dist = DiscreteDist.point_mass(q0)
        used_eps = None
    else:
        y0 = DiscreteDist.from_pairs(((0, mass_at_zero), (q0, 1 - mass_at_zero)))
        used_eps = epsilon
    state = StateOfNature(y0, DiscreteDist.point_mass(1))
    achieved = regret(rule, state, design, spec)
    return AdversaryCertificate(
        "q1-equals-1", state, design, spec, achieved, epsilon=used_eps
    )


def maximal_regret_innovation(q0: Prob) -> Prob:
    """Worst-case regret of minimax rules when q0 is the known quantile."""
    if not 0 <= q0 <= 1:
        raise ValueError("q0 must lie in [0,1]")
    return min(q0, 1 - q0)


def q_delta(y0: Dist, alpha: Prob, delta: Prob) -> Prob:
    """Smallest q with delta + (1-delta) F(q) >= alpha (no-data case).

    Requires F(q_alpha) > alpha; the boundary case F(q_alpha) = alpha
    is refused rather than guessed.
    """
    if not 0 <= delta <= 1:
        raise ValueError("delta must lie in [0,1]")
    q_alpha = quantile(y0, QuantileSpec(alpha, 0))
    if cdf(y0, q_alpha) <= alpha:
        raise UnsupportedBoundaryCaseError(
            f"need F(q_alpha) > alpha, got F({q_alpha}) = {cdf(y0, q_alpha)}"
        )
    if delta == 1:
        return Fraction(0) if is_exact(alpha, delta) else 0.0
    tau = (alpha - delta) / (1 - delta)
    if tau <= 0:
        return Fraction(0) if is_exact(tau) else 0.0
    value = quantile_interval(y0, tau)[0]
    assert value <= q_alpha
    return value


def is_minimax_known_y0(y0: Dist, alpha: Prob, delta: Prob) -> bool:
    """Exact minimax membership for a no-data rule when Y0 is known."""
    q_alpha = quantile(y0, QuantileSpec(alpha, 0))
    if 2 * q_alpha < 1:
        return delta == 1
    if 2 * q_alpha == 1:
        return True
    return q_alpha - q_delta(y0, alpha, delta) <= 1 - q_alpha


@dataclass(frozen=True)
class MinimaxSet:
    """Interval [lower, upper] of minimax no-data rules.

    When q_alpha exceeds 1/2, ``upper`` is a bisection approximation
    from below of the true boundary (within 2^-iterations); exact
    membership queries should use :func:`is_minimax_known_y0`.
    """

    lower: Prob
    upper: Prob
    max_regret: Prob
    q_alpha: Prob


def minimax_set_known_y0(y0: Dist, alpha: Prob, *, iterations: int = 60) -> MinimaxSet:
    """Minimax no-data rules when the full Y0 distribution is known.

    Below 1/2 only always-treating is minimax (regret q_alpha); at 1/2
    everything is (regret 1/2); above 1/2 an initial segment [0, d*] is
    (regret 1 - q_alpha), with d* located by bisecting the monotone
    membership predicate.
    """
    q_alpha = quantile(y0, QuantileSpec(alpha, 0))
    if cdf(y0, q_alpha) <= alpha:
        raise UnsupportedBoundaryCaseError(
            f"need F(q_alpha) > alpha, got F({q_alpha}) = {cdf(y0, q_alpha)}"
        )
    one = Fraction(1)
    if 2 * q_alpha < 1:
        return MinimaxSet(one, one, max_regret=q_alpha, q_alpha=q_alpha)
    if 2 * q_alpha == 1:
        return MinimaxSet(Fraction(0), one, max_regret=q_alpha, q_alpha=q_alpha)
    lo, hi = Fraction(0), Fraction(1)
    for _ in range(iterations):
        mid = (lo + hi) / 2
        if is_minimax_known_y0(y0, alpha, mid):
            lo = mid
        else:
            hi = mid
    if not is_minimax_known_y0(y0, alpha, lo):
        raise CertificationError("bisection returned a non-member endpoint")
    return MinimaxSet(Fraction(0), lo, max_regret=1 - q_alpha, q_alpha=q_alpha)
