import random
from fractions import Fraction as F

import pytest

from quantile_regret.adversary import (
    AdversaryCertificate,
    MinimaxSet,
    RuleIsZeroError,
    UnsupportedBoundaryCaseError,
    is_minimax_known_y0,
    maximal_regret_innovation,
    minimax_set_known_y0,
    q1_equals_one_case,
    q_delta,
    worst_case_fixed,
    worst_case_innovation,
    worst_case_random,
)
from quantile_regret.dists import DiscreteDist, MixedDist, QuantileSpec, quantile
from quantile_regret.engine import DesignSpec, StateOfNature, regret
from quantile_regret.rules import (
    FIXED,
    INNOVATION,
    RANDOM,
    constant_rule,
    empirical_success_rule,
    random_tabular_rule,
    tabular_rule,
)

ALPHAS = (F("0.1"), F("0.5"), F("0.9"))


class TestWorstCaseFixed:
    def test_no_data_half_rule(self):
        cert = worst_case_fixed(constant_rule(F(1, 2)), 0, 0, F(1, 2))
        assert cert.achieved_regret == 1
        assert cert.epsilon is not None and cert.epsilon > 0
        assert cert.recheck(constant_rule(F(1, 2)))

    def test_always_treat_uses_mirrored_branch(self):
        cert = worst_case_fixed(constant_rule(1), 2, 2, F(1, 2))
        assert cert.branch == "a0=alpha-eps,a1=1"
        assert cert.achieved_regret == 1

    def test_never_treat_uses_direct_branch(self):
        cert = worst_case_fixed(constant_rule(0), 2, 2, F(1, 2))
        assert cert.branch == "a0=1,a1=alpha-eps"
        assert cert.achieved_regret == 1

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_random_rules_reach_full_regret(self, alpha):
        for seed in range(10):
            rule = random_tabular_rule(FIXED, seed=seed, n0=2, n1=2)
            cert = worst_case_fixed(rule, 2, 2, alpha)
            assert cert.achieved_regret == 1
            assert cert.recheck(rule)

    def test_alpha_zero(self):
        cert = worst_case_fixed(constant_rule(F(1, 3)), 1, 1, F(0))
        assert cert.achieved_regret == 1
        assert cert.spec.r == 1

    def test_alpha_zero_never_treat_switches_branch(self):
        cert = worst_case_fixed(constant_rule(0), 1, 2, F(0))
        assert cert.branch == "alpha0,a0=eps"
        assert cert.achieved_regret == 1

    def test_alpha_one_interior_rule_degenerate(self):
        cert = worst_case_fixed(constant_rule(F(1, 2)), 1, 1, F(1))
        assert cert.branch == "alpha1-degenerate"
        assert cert.achieved_regret == 0

    def test_alpha_one_pinned_rules(self):
        assert worst_case_fixed(constant_rule(1), 1, 1, F(1)).achieved_regret == 1
        assert worst_case_fixed(constant_rule(0), 1, 1, F(1)).achieved_regret == 1

    def test_alpha_one_data_driven_pinned(self):
        # treats for sure exactly on the sample a degenerate state produces
        table = {
            (u, v): F(1) if (u, v) == ((1,), (0,)) else F(1, 2)
            for u in ((0,), (1,))
            for v in ((0,), (1,))
        }
        rule = tabular_rule(FIXED, table, label="pinned")
        cert = worst_case_fixed(rule, 1, 1, F(1))
        assert cert.branch == "alpha1-pinned-to-treat"
        assert cert.achieved_regret == 1

    def test_bernoulli_scope(self):
        cert = worst_case_fixed(constant_rule(F(2, 3)), 1, 2, F("0.9"))
        for marginal in (cert.state.y0, cert.state.y1):
            assert all(p in (0, 1) for p, _ in marginal.atoms)
            assert not marginal.segments


class TestWorstCaseRandom:
    def test_no_data_case(self):
        cert = worst_case_random(constant_rule(F(1, 2)), 0, F(1, 2), F(1, 2))
        assert cert.achieved_regret == 1

    def test_always_treat(self):
        cert = worst_case_random(constant_rule(1), 2, F(1, 2), F(1, 2))
        assert cert.branch == "a0=alpha-eps,a1=1"
        assert cert.achieved_regret == 1

    @pytest.mark.parametrize("alpha", ALPHAS)
    def test_random_rules_reach_full_regret(self, alpha):
        for seed in range(6):
            rule = random_tabular_rule(RANDOM, seed=seed, n=3)
            cert = worst_case_random(rule, 3, F(3, 10), alpha)
            assert cert.achieved_regret == 1
            assert cert.recheck(rule)

    def test_alpha_zero(self):
        cert = worst_case_random(constant_rule(F(1, 4)), 2, F(1, 2), F(0))
        assert cert.achieved_regret == 1

    def test_alpha_one_interior(self):
        cert = worst_case_random(constant_rule(F(1, 2)), 1, F(1, 2), F(1))
        assert cert.branch == "alpha1-degenerate"
        assert cert.achieved_regret == 0


class TestWorstCaseInnovation:
    def test_no_data_full_quantile_regret(self):
        cert = worst_case_innovation(constant_rule(1), 0, F("0.9"), F(1, 2))
        assert cert.achieved_regret == F("0.9")

    def test_q0_zero_trivial(self):
        cert = worst_case_innovation(constant_rule(1), 2, F(0), F(1, 2))
        assert cert.branch == "trivial-q0-zero"
        assert cert.achieved_regret == 0

    def test_esr_with_witness(self):
        rule = empirical_success_rule(F("0.3"), QuantileSpec(F(1, 2)))
        cert = worst_case_innovation(
            rule, 2, F("0.3"), F(1, 2), witness=(1, 1)
        )
        assert cert.achieved_regret == F("0.3")
        assert cert.recheck(rule)

    def test_witness_found_automatically(self):
        rule = empirical_success_rule(F("0.5"), QuantileSpec(F(1, 2)))
        cert = worst_case_innovation(rule, 3, F("0.5"), F(1, 2))
        assert cert.achieved_regret == F(1, 2)

    def test_zero_rule_signals(self):
        with pytest.raises(RuleIsZeroError):
            worst_case_innovation(constant_rule(0), 2, F(1, 2), F(1, 2))

    def test_alpha_zero_variant(self):
        cert = worst_case_innovation(constant_rule(F(1, 2)), 1, F("0.7"), F(0))
        assert cert.achieved_regret == F("0.7")

    def test_treated_support_within_bound(self):
        for seed in range(8):
            rule = random_tabular_rule(INNOVATION, seed=seed, n=4)
            try:
                cert = worst_case_innovation(rule, 4, F("0.6"), F("0.5"))
            except RuleIsZeroError:
                continue
            assert len(cert.state.y1.points) <= 5
            assert cert.achieved_regret == F("0.6")

    def test_rejects_level_one(self):
        with pytest.raises(ValueError):
            worst_case_innovation(constant_rule(1), 1, F(1, 2), F(1))


class TestQ1EqualsOne:
    def test_never_treat_pays_the_gap(self):
        cert = q1_equals_one_case(constant_rule(0), 5, F("0.9"), F(1, 2))
        assert cert.achieved_regret == F("0.1")

    def test_always_treat_attains_benchmark(self):
        cert = q1_equals_one_case(constant_rule(1), 0, F("0.9"), F(1, 2))
        assert cert.achieved_regret == 0

    def test_half_rule_exact_value(self):
        cert = q1_equals_one_case(constant_rule(F(1, 2)), 0, F(1, 2), F(1, 2))
        assert cert.achieved_regret == F(1, 2)

    def test_combined_floor_for_any_rule(self):
        # positive-witness branch gives q0, the treated-quantile-1 state
        # gives 1-q0 to never-treat: max regret >= min{q0, 1-q0}
        q0, alpha = F("0.3"), F(1, 2)
        for seed in range(6):
            rule = random_tabular_rule(INNOVATION, seed=seed, n=2)
            try:
                lemma = worst_case_innovation(rule, 2, q0, alpha).achieved_regret
            except RuleIsZeroError:
                lemma = 0
            other = q1_equals_one_case(rule, 2, q0, alpha).achieved_regret
            assert max(lemma, other) >= maximal_regret_innovation(q0)


class TestMaximalRegret:
    @pytest.mark.parametrize(
        "q0,expected",
        [(F("0.9"), F("0.1")), (F("0.5"), F("0.5")), (F(0), F(0)), (F("0.2"), F("0.2"))],
    )
    def test_formula(self, q0, expected):
        assert maximal_regret_innovation(q0) == expected


THREE_ATOM = DiscreteDist.from_pairs(
    ((0, F(3, 10)), (F(6, 10), F(4, 10)), (1, F(3, 10)))
)


class TestQDelta:
    def test_endpoints(self):
        q_alpha = quantile(THREE_ATOM, QuantileSpec(F(1, 2)))
        assert q_delta(THREE_ATOM, F(1, 2), F(0)) == q_alpha
        assert q_delta(THREE_ATOM, F(1, 2), F(1)) == 0

    def test_threshold_at_two_sevenths(self):
        assert q_delta(THREE_ATOM, F(1, 2), F(1, 4)) == F(6, 10)
        assert q_delta(THREE_ATOM, F(1, 2), F(1, 3)) == 0
        assert q_delta(THREE_ATOM, F(1, 2), F(2, 7)) == 0

    def test_weakly_decreasing_in_delta(self):
        grid = [F(k, 40) for k in range(41)]
        values = [q_delta(THREE_ATOM, F(1, 2), d) for d in grid]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_boundary_case_refused(self):
        uniform = MixedDist(segments=((0, 1, F(1)),))
        with pytest.raises(UnsupportedBoundaryCaseError):
            q_delta(uniform, F(1, 2), F(1, 4))


class TestMinimaxSet:
    def test_low_quantile_unique_rule(self):
        y0 = DiscreteDist.from_pairs(((0, F(3, 10)), (F(2, 5), F(4, 10)), (1, F(3, 10))))
        result = minimax_set_known_y0(y0, F(1, 2))
        assert (result.lower, result.upper) == (1, 1)
        assert result.max_regret == F(2, 5)

    def test_half_quantile_everything(self):
        y0 = DiscreteDist.from_pairs(((0, F(3, 10)), (F(1, 2), F(4, 10)), (1, F(3, 10))))
        result = minimax_set_known_y0(y0, F(1, 2))
        assert (result.lower, result.upper) == (0, 1)
        assert result.max_regret == F(1, 2)

    def test_high_quantile_initial_segment(self):
        result = minimax_set_known_y0(THREE_ATOM, F("0.35"))
        assert result.q_alpha == F(6, 10)
        assert result.max_regret == F(4, 10)
        assert result.lower == 0
        assert is_minimax_known_y0(THREE_ATOM, F("0.35"), result.upper)
        step = F(1, 2) ** 50
        assert not is_minimax_known_y0(THREE_ATOM, F("0.35"), result.upper + 2 * step)

    def test_membership_matches_two_family_brute_force(self):
        alpha = F("0.35")
        q_alpha = quantile(THREE_ATOM, QuantileSpec(alpha))
        design = DesignSpec.innovation(0, q_alpha)
        spec = QuantileSpec(alpha, 0)

        def brute_worst(delta):
            rule = constant_rule(delta)
            candidates = []
            for k in range(1, 8):
                eps = F(1, 10**k)
                if eps >= alpha:
                    continue
                bern = StateOfNature(THREE_ATOM, DiscreteDist.bernoulli(alpha - eps))
                candidates.append(regret(rule, bern, design, spec))
            point = StateOfNature(THREE_ATOM, DiscreteDist.point_mass(0))
            candidates.append(regret(rule, point, design, spec))
            return max(candidates)

        threshold = 1 - q_alpha
        disagreements = [
            d
            for d in (F(k, 100) for k in range(101))
            if (brute_worst(d) <= threshold) != is_minimax_known_y0(THREE_ATOM, alpha, d)
        ]
        assert disagreements == []


class TestCertificateSerialization:
    def test_plain_text_fractions_only(self):
        cert = worst_case_fixed(constant_rule(F(1, 2)), 1, 1, F(1, 2))
        text = cert.serialize()
        assert "achieved_regret: 1" in text
        assert "epsilon: 1/" in text
        assert "." not in text.split("y0:")[1].split("\n")[0]
