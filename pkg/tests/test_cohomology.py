"""Residue-sum integration against independent symbolic oracles."""

import itertools
import random
from fractions import Fraction

import pytest
import sympy

from toricmirror.algebra import RationalFunction
from toricmirror.cohomology import (
    CohomologyError,
    class_from_symbol,
    integrate_X,
    integrate_virtual_Y,
    nonequivariant_limit,
    p_class,
    pairing,
    u_class,
)
from toricmirror.toric import ToricInput, ToricModel

P1 = ToricInput.make([[1, 1]], [1], name="p1")
P2 = ToricInput.make([[1, 1, 1]], [1], name="p2")
X1 = ToricInput.make([[1, 1, 0, -1, -1], [0, 0, 1, 1, 1]], [1, 2], name="x1")
QUINTIC = ToricInput.make([[1, 1, 1, 1, 1]], [1], L=[[5]], name="quintic")


@pytest.fixture(scope="module")
def p2_model():
    return ToricModel.build(P2)


@pytest.fixture(scope="module")
def x1_model():
    return ToricModel.build(X1)


def sympy_oracle_projective(power, n):
    """Oracle for integrals over projective (n-1)-space: sum_j l_j^power /
    prod_{s != j} (l_j - l_s), simplified by sympy's independent machinery."""
    lams = sympy.symbols(f"x1:{n + 1}")
    total = 0
    for j in range(n):
        den = sympy.prod([lams[j] - lams[s] for s in range(n) if s != j])
        total += lams[j] ** power / den
    return sympy.cancel(sympy.together(total))


class TestIntegrateProjective:
    def test_unit_class_integrates_to_zero(self, p2_model):
        one = class_from_symbol(p2_model, {(): Fraction(1)})
        cv = integrate_X(p2_model, one)
        assert cv.value.is_zero
        assert nonequivariant_limit(p2_model, cv) == 0

    def test_p_squared_is_one(self, p2_model):
        p = p_class(p2_model, 1)
        cv = integrate_X(p2_model, p * p)
        assert nonequivariant_limit(p2_model, cv) == 1
        # independent symbolic oracle
        assert sympy_oracle_projective(2, 3) == 1

    def test_below_top_degree_vanishes(self, p2_model):
        # classical: sum of residues of a form of degree < dim vanishes
        for power in (0, 1):
            p = p_class(p2_model, 1)
            cv = integrate_X(p2_model, p**power)
            assert cv.value.is_zero
            assert sympy_oracle_projective(power, 3) == 0

    def test_above_top_degree_matches_oracle(self, p2_model):
        p = p_class(p2_model, 1)
        cv = integrate_X(p2_model, p**4)
        oracle = sympy_oracle_projective(4, 3)
        # compare by evaluating both at rational points
        rng = random.Random(5)
        lams = sympy.symbols("x1:4")
        for _ in range(5):
            vals = [Fraction(rng.randint(1, 50)) * (i + 1) for i in range(3)]
            want = oracle.subs(dict(zip(lams, [sympy.Rational(v) for v in vals])))
            got = _eval_certificate(p2_model, cv.certificate, vals)
            assert sympy.Rational(got) == want


def _eval_certificate(model, poly, weight_values, hval=Fraction(0)):
    total = Fraction(0)
    for mon, coef in poly.terms():
        c = Fraction(int(model.ctx.ring.domain.numer(coef)), int(model.ctx.ring.domain.denom(coef)))
        for exp, v in zip(mon, list(weight_values) + [hval]):
            c *= Fraction(v) ** exp
        total += c
    return total


class TestIntegrateX1:
    def test_ring_pairings(self, x1_model):
        p1 = p_class(x1_model, 1)
        p2 = p_class(x1_model, 2)
        assert nonequivariant_limit(x1_model, integrate_X(x1_model, p1 * p2 * p2)) == 1
        assert nonequivariant_limit(x1_model, integrate_X(x1_model, p2**3)) == 2
        assert nonequivariant_limit(x1_model, integrate_X(x1_model, p1 * p1 * p2)) == 0

    def test_gram_matrix_matches_presented_ring(self, x1_model):
        # basis 1, p1, p2, p1 p2, p2^2, p1 p2^2 of Z[p1,p2]/(p1^2, p2^3-2 p2^2 p1)
        basis = [(), (("p", 1),), (("p", 2),), (("p", 1), ("p", 2)),
                 (("p", 2), ("p", 2)), (("p", 1), ("p", 2), ("p", 2))]
        classes = [class_from_symbol(x1_model, {m: Fraction(1)}) for m in basis]
        # ring oracle: reduce p1^a p2^b modulo (p1^2, p2^3 - 2 p2^2 p1), read
        # the coefficient of p1 p2^2 (the top cell, integral 1)
        p1s, p2s = sympy.symbols("a b")
        def ring_integral(mono):
            expr = 1
            for kind, idx in mono:
                expr *= p1s if idx == 1 else p2s
            expr = sympy.expand(expr)
            # reduce: p1^2 -> 0, p2^3 -> 2 p2^2 p1, iterate
            for _ in range(6):
                expr = sympy.expand(expr.subs(p1s**2, 0).subs(p2s**3, 2 * p2s**2 * p1s))
            return expr.coeff(p1s * p2s**2)

        gram_expected = []
        gram_got = []
        for x, mx in zip(classes, basis):
            for y, my in zip(classes, basis):
                got = nonequivariant_limit(x1_model, integrate_X(x1_model, x * y))
                gram_got.append(Fraction(got))
                gram_expected.append(Fraction(int(ring_integral(mx + my))))
        assert gram_got == gram_expected
        # rank 6 over Q
        mat = sympy.Matrix(6, 6, [sympy.Rational(v) for v in gram_got])
        assert mat.rank() == 6

    def test_monomial_sweep_below_top_degree(self, x1_model):
        for e1, e2 in itertools.product(range(3), range(3)):
            if e1 + e2 >= 3 or (e1, e2) == (0, 0):
                continue
            mono = (("p", 1),) * e1 + (("p", 2),) * e2
            cls = class_from_symbol(x1_model, {mono: Fraction(1)})
            cv = integrate_X(x1_model, cls)
            assert nonequivariant_limit(x1_model, cv) == 0


class TestVirtual:
    def test_quintic_degree(self):
        model = ToricModel.build(QUINTIC)
        p = p_class(model, 1)
        cv = integrate_virtual_Y(model, p**3)
        assert nonequivariant_limit(model, cv) == 5

    def test_no_bundle_reduces_to_plain(self, p2_model):
        p = p_class(p2_model, 1)
        a = integrate_X(p2_model, p * p)
        b = integrate_virtual_Y(p2_model, p * p)
        assert a.value == b.value

    def test_wrong_degree_vanishes_in_limit(self):
        model = ToricModel.build(QUINTIC)
        p = p_class(model, 1)
        for power in (0, 1, 2, 4):
            cv = integrate_virtual_Y(model, p**power)
            out = nonequivariant_limit(model, cv)
            assert out == 0 or power == 4  # degree-4 has weight-linear terms only
            if power == 4:
                # certificate is weight-linear; value at 0 still vanishes
                z = model.ctx.eval_weights_zero(cv.certificate)
                assert not z


class TestPairing:
    def test_p1_pairing_form(self):
        model = ToricModel.build(P1)
        p = p_class(model, 1)
        cv = pairing(model, p, p)
        # residue sum = l1 + l2 exactly
        expect = model.ctx.lin_to_poly(
            model.fps[0].p_forms[0] + model.fps[1].p_forms[0]
        )
        assert cv.certificate == expect
        assert nonequivariant_limit(model, cv) == 0

    def test_symmetry(self, x1_model):
        rng = random.Random(11)
        for _ in range(5):
            mono_a = tuple((("p", rng.randint(1, 2)),) * rng.randint(0, 2))
            mono_b = tuple((("p", rng.randint(1, 2)),) * rng.randint(0, 2))
            a = class_from_symbol(x1_model, {mono_a: Fraction(rng.randint(-3, 3))})
            b = class_from_symbol(x1_model, {mono_b: Fraction(1)})
            ab = pairing(x1_model, a, b).certificate
            ba = pairing(x1_model, b, a).certificate
            assert ab == ba

    def test_uncertified_specialization_rejected(self, p2_model):
        p = p_class(p2_model, 1)
        cv = integrate_X(p2_model, p * p, certify=False)
        with pytest.raises(CohomologyError, match="uncertified"):
            nonequivariant_limit(p2_model, cv)


class TestSymbols:
    def test_u_vanishes_on_own_chart(self, x1_model):
        for j in range(1, 6):
            cls = u_class(x1_model, j)
            for fp in x1_model.fps:
                if (j - 1) in fp.alpha:
                    assert cls.value(fp).is_zero

    def test_p2_u2_at_first_chart(self, p2_model):
        cls = u_class(p2_model, 2)
        fp = p2_model.fixed_point((0,))
        # l1 - l2
        expect = RationalFunction.from_form(
            p2_model.ctx, fp.p_forms[0]
        ) - RationalFunction.from_form(
            p2_model.ctx, p2_model.fixed_point((1,)).p_forms[0]
        )
        assert cls.value(fp) == expect

    def test_x1_difference_class(self, x1_model):
        # u4 and u5 equal p2 - p1 shifted by their own weight
        diff = class_from_symbol(
            x1_model, {(("p", 2),): Fraction(1), (("p", 1),): Fraction(-1)}
        )
        from toricmirror.algebra import LinForm

        for j in (4, 5):
            lamj = RationalFunction.from_form(
                x1_model.ctx, LinForm.weight(x1_model.ctx.nlam, j - 1)
            )
            shifted = diff - lamj
            assert shifted == u_class(x1_model, j)

    def test_unknown_symbol_rejected(self, x1_model):
        with pytest.raises(CohomologyError):
            class_from_symbol(x1_model, ("w", 1))
        with pytest.raises(CohomologyError):
            class_from_symbol(x1_model, ("p", 7))


class TestModeAgreement:
    def test_specialized_matches_symbolic_at_points(self, x1_model):
        p2c = p_class(x1_model, 2)
        cv = integrate_X(x1_model, p2c**3)
        for seed in range(1, 21):
            smodel = ToricModel.build(X1, mode="specialized", seed=seed)
            sval = integrate_X(smodel, p_class(smodel, 2) ** 3)
            want = _eval_certificate(x1_model, cv.certificate, smodel.ctx.values)
            got = sval.value.as_fraction()
            assert got == want
