"""Truncated graded series: arithmetic, exp/log, substitution, reversion."""

import random
from fractions import Fraction

import pytest

from toricmirror.series import (
    GradedQSeries,
    Grading,
    SeriesError,
    expand_hz_exponential,
    invert_exponential_change,
    qseries_combine,
    qseries_exp_log,
)

G1 = Grading((Fraction(1),))
G2 = Grading((Fraction(1), Fraction(2)))  # the projective-bundle truncation class


def series1(bound, coeffs):
    return GradedQSeries(G1, bound, {(d,): Fraction(c) for d, c in coeffs.items()})


class TestCombine:
    def test_product_truncates(self):
        a = series1(2, {0: 1, 1: 1})
        b = series1(2, {0: 1, 1: -1})
        assert qseries_combine(a, b, "mul") == series1(2, {0: 1, 2: -1})

    def test_zero_annihilates(self):
        a = series1(3, {0: 1, 1: 5})
        z = GradedQSeries(G1, 3, {})
        assert (a * z).is_zero

    def test_mixed_grading_cross_terms(self):
        # coefficients q1^a q2^b survive iff a + 2b <= bound
        a = GradedQSeries(G2, 3, {(d, 0): Fraction(1) for d in range(4)})
        b = GradedQSeries(G2, 3, {(0, e): Fraction(1) for e in range(2)})
        got = a * b
        # brute-force pairs
        want = {}
        for d in range(4):
            for e in range(2):
                if d + 2 * e <= 3:
                    want[(d, e)] = Fraction(1)
        assert got == GradedQSeries(G2, 3, want)

    def test_min_truncation_carries(self):
        a = series1(5, {0: 1})
        b = series1(2, {0: 1, 1: 1})
        assert (a * b).bound == 2
        assert (a + b).bound == 2

    def test_associativity_and_commutativity_random(self):
        rng = random.Random(99)
        for _ in range(20):
            def rand_series():
                return series1(
                    4, {d: rng.randint(-5, 5) for d in range(rng.randint(1, 4))}
                )

            a, b, c = rand_series(), rand_series(), rand_series()
            assert (a * b) * c == a * (b * c)
            assert a * b == b * a
            assert (a + b) + c == a + (b + c)


class TestExpLog:
    def test_exp_of_zero(self):
        z = GradedQSeries(G1, 3, {})
        assert z.exp() == series1(3, {0: 1})

    def test_log_mercator(self):
        s = series1(3, {0: 1, 1: 1})
        assert s.log() == series1(3, {1: Fraction(1), 2: Fraction(-1, 2), 3: Fraction(1, 3)})

    def test_round_trip(self):
        s = series1(2, {0: 1, 1: 1, 2: 1})
        assert s.log().exp() == s

    def test_random_round_trips(self):
        rng = random.Random(4)
        for _ in range(15):
            coeffs = {d: rng.randint(-6, 6) for d in range(1, rng.randint(2, 8))}
            s = series1(8, coeffs)
            assert s.exp().log() == s

    def test_exp_requires_zero_constant(self):
        with pytest.raises(SeriesError):
            series1(2, {0: 1, 1: 1}).exp()

    def test_log_requires_unit_constant(self):
        with pytest.raises(SeriesError):
            series1(2, {0: 2}).log()

    def test_dispatch(self):
        s = series1(2, {1: 1})
        assert qseries_exp_log(s, "exp") == series1(2, {0: 1, 1: 1, 2: Fraction(1, 2)})


class TestInverse:
    def test_geometric(self):
        s = series1(4, {0: 1, 1: -1})
        inv = s.inverse([(d,) for d in range(5)])
        assert inv == series1(4, {d: 1 for d in range(5)})

    def test_random_inverse(self):
        rng = random.Random(17)
        universe = [(d,) for d in range(7)]
        for _ in range(10):
            coeffs = {0: rng.choice([1, 2, -3, Fraction(1, 2)])}
            coeffs.update({d: rng.randint(-4, 4) for d in range(1, 6)})
            s = series1(6, coeffs)
            prod = s * s.inverse(universe)
            assert prod == series1(6, {0: 1})


class TestSubstitution:
    def test_identity_shift(self):
        s = series1(3, {0: 2, 1: 3, 2: -1})
        zero = GradedQSeries(G1, 3, {})
        assert s.substitute_exponential([zero]) == s

    def test_oracle_expansion(self):
        # q * exp(2 f) with f = q + 3/2 q^2, expanded by an independent
        # truncated-Taylor oracle
        f = series1(4, {1: 1, 2: Fraction(3, 2)})
        a = series1(4, {1: 1})
        got = a.substitute_exponential([f.scale(2)])

        def oracle(order):
            # exp(2f) = sum (2f)^n / n! with plain list convolution
            twof = [Fraction(0), 2, 3, 0, 0]
            acc = [Fraction(1)] + [Fraction(0)] * order
            power = [Fraction(1)] + [Fraction(0)] * order
            fact = 1
            for n in range(1, order + 1):
                nxt = [Fraction(0)] * (order + 1)
                for i, pi in enumerate(power):
                    for j in range(order + 1 - i):
                        if j < len(twof):
                            nxt[i + j] += pi * twof[j]
                power = nxt
                fact *= n
                for i in range(order + 1):
                    acc[i] += power[i] / fact
            return acc

        exp2f = oracle(3)
        want = {d + 1: exp2f[d] for d in range(4)}
        assert got == series1(4, {d: c for d, c in want.items()})
        # frozen values from the oracle itself
        assert got.get((1,)) == 1
        assert got.get((2,)) == 2
        assert got.get((3,)) == 5

    def test_nonzero_constant_rejected(self):
        s = series1(2, {1: 1})
        with pytest.raises(SeriesError, match="constant"):
            s.substitute_exponential([series1(2, {0: 1})])

    def test_exp_hz_mode(self):
        # q (k=1) with zcap 2: coefficients of z^m carry d^m/m! (times h^m)
        table = expand_hz_exponential((1,), 2)
        assert table == {(0,): 1, (1,): 1, (2,): Fraction(1, 2)}
        table3 = expand_hz_exponential((3,), 2)
        assert table3[(2,)] == Fraction(9, 2)


class TestReversion:
    def test_round_trip_single_variable(self):
        rng = random.Random(31)
        universe = [(d,) for d in range(7)]
        for _ in range(8):
            phi = series1(6, {d: rng.randint(-3, 3) for d in range(1, 5)})
            psi = invert_exponential_change([phi], universe)
            # going there and back is the identity on a test series
            s = series1(6, {1: 1, 2: 7})
            roundtrip = s.substitute_exponential([phi]).substitute_exponential(psi[0:1])
            assert roundtrip == s

    def test_two_variables(self):
        rng = random.Random(77)
        universe = [(a, b) for a in range(7) for b in range(4) if a + 2 * b <= 6]
        phi = [
            GradedQSeries(G2, 6, {(1, 0): Fraction(2), (2, 0): Fraction(-1)}),
            GradedQSeries(G2, 6, {(1, 0): Fraction(-1), (0, 1): Fraction(1, 3)}),
        ]
        psi = invert_exponential_change(phi, universe)
        s = GradedQSeries(G2, 6, {(1, 0): Fraction(1), (0, 1): Fraction(5)})
        roundtrip = s.substitute_exponential(phi).substitute_exponential(psi)
        assert roundtrip == s
