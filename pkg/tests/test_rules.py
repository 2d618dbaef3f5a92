import math
import random
from fractions import Fraction as F

import pytest

from quantile_regret.dists import DiscreteDist, QuantileSpec, quantile
from quantile_regret.rules import (
    INNOVATION,
    Sample,
    constant_rule,
    empirical_success_rule,
    load_rule_table,
    parse_rule,
    random_tabular_rule,
    sample_quantile,
    tabular_rule,
)

HALF = QuantileSpec(F(1, 2))


class TestConstantRule:
    @pytest.mark.parametrize("c", [0, F(1, 2), 1])
    def test_ignores_sample(self, c):
        rule = constant_rule(c)
        assert rule(Sample.innovation((0, 1, 1))) == c
        assert rule(Sample.fixed((0,), (1, 1))) == c
        assert rule(Sample.random_assignment((0, 1), (1, 0))) == c

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            constant_rule(F(3, 2))


class TestSampleQuantile:
    def test_majority_zero(self):
        assert sample_quantile((0, 0, 1), HALF) == 0

    def test_all_ones(self):
        for alpha in (F(1, 10), F(1, 2), F(9, 10)):
            assert sample_quantile((1, 1, 1, 1), QuantileSpec(alpha)) == 1

    def test_two_point_upper_choice(self):
        assert sample_quantile((0, 1), QuantileSpec(F(1, 2), r=1)) == 1
        assert sample_quantile((0, 1), QuantileSpec(F(1, 2), r=0)) == 0

    def test_empty_sample_raises(self):
        with pytest.raises(ValueError):
            sample_quantile((), HALF)

    def test_matches_empirical_distribution_quantile(self):
        rng = random.Random(3)
        for _ in range(1000):
            n = rng.randint(1, 8)
            values = [F(rng.randint(0, 6), 6) for _ in range(n)]
            spec = QuantileSpec(F(rng.randint(1, 19), 20), F(rng.randint(0, 2), 2))
            emp = DiscreteDist.from_sample(values)
            assert sample_quantile(values, spec) == quantile(emp, spec)


class TestEmpiricalSuccessRule:
    def test_clear_win(self):
        rule = empirical_success_rule(F(1, 2), HALF)
        assert rule(Sample.innovation((1, 1, 1))) == 1

    def test_clear_loss(self):
        rule = empirical_success_rule(F(1, 2), HALF)
        assert rule(Sample.innovation((0, 0, 1))) == 0

    def test_tie_randomizes(self):
        rule = empirical_success_rule(F(1, 2), HALF)
        assert rule(Sample.innovation((F(1, 2), F(1, 2), 1))) == F(1, 2)

    def test_buffer_width(self):
        xi = F(1, 10)
        rule = empirical_success_rule(F(1, 2), HALF, xi=xi)
        assert rule(Sample.innovation((F(55, 100),) * 3)) == F(1, 2)
        assert rule(Sample.innovation((F(65, 100),) * 3)) == 1

    def test_output_range(self):
        rule = empirical_success_rule(F(3, 10), HALF)
        rng = random.Random(5)
        for _ in range(300):
            y = tuple(F(rng.randint(0, 10), 10) for _ in range(rng.randint(1, 6)))
            assert rule(Sample.innovation(y)) in (0, F(1, 2), 1)

    def test_wrong_design_rejected(self):
        rule = empirical_success_rule(F(1, 2), HALF)
        with pytest.raises(ValueError):
            rule(Sample.fixed((0,), (1,)))


class TestTabularRules:
    def test_random_table_deterministic(self):
        a = random_tabular_rule(INNOVATION, seed=42, n=3)
        b = random_tabular_rule(INNOVATION, seed=42, n=3)
        assert a.table == b.table
        assert len(a.table) == 8
        assert all(0 <= v <= 1 for v in a.table.values())

    def test_random_table_covers_fixed_design(self):
        rule = random_tabular_rule("fixed", seed=1, n0=2, n1=1)
        assert len(rule.table) == 8
        assert rule(Sample.fixed((0, 1), (1,))) == rule.table[((0, 1), (1,))]

    def test_missing_key_raises(self):
        rule = tabular_rule(INNOVATION, {(0,): F(1, 2)}, label="t")
        with pytest.raises(KeyError):
            rule(Sample.innovation((1,)))

    def test_constant_one_aggregate_is_binomial(self):
        # summing an all-ones table over samples with j ones among the
        # treated block counts the samples: C(n1, j)
        n1 = 4
        rule = random_tabular_rule("fixed", seed=9, n0=0, n1=n1)
        ones_table = {k: F(1) for k in rule.table}
        agg = {}
        for (u, v), val in ones_table.items():
            agg[sum(v)] = agg.get(sum(v), 0) + val
        assert agg == {j: math.comb(n1, j) for j in range(n1 + 1)}


class TestParsing:
    def test_const(self):
        assert parse_rule("const:0.5").constant == F(1, 2)

    def test_esr(self):
        rule = parse_rule("esr", q0=F(1, 2), quantile_spec=HALF)
        assert rule.label == "esr"

    def test_table_file(self, tmp_path):
        path = tmp_path / "rule.txt"
        path.write_text("# treated-outcome bits -> probability\n00 -> 1/4\n01 -> 1\n10 -> 0.5\n11 -> 0\n")
        rule = load_rule_table(path, INNOVATION)
        assert rule(Sample.innovation((0, 1))) == 1
        assert rule(Sample.innovation((1, 0))) == F(1, 2)

    def test_unknown_spec(self):
        with pytest.raises(ValueError):
            parse_rule("always")
