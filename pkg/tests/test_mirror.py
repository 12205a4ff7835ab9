"""Asymptotics, flattening, annihilation, relation symbols, transport."""

from fractions import Fraction
from math import factorial

import pytest

from toricmirror.hyper import build_hyper_series
from toricmirror.mirror import (
    BoxOperator,
    MirrorError,
    PPoly,
    anticanonical_pform,
    apply_box_operator,
    check_annihilation,
    check_transport_annihilation,
    classical_relations,
    expand_asymptotics,
    normalize_to_flat,
    quantum_relations,
)
from toricmirror.series import GradedQSeries, Grading
from toricmirror.toric import ToricInput, ToricModel

P1 = ToricInput.make([[1, 1]], [1], name="p1")
P2 = ToricInput.make([[1, 1, 1]], [1], name="p2")
P1XP1 = ToricInput.make([[1, 1, 0, 0], [0, 0, 1, 1]], [1, 1], name="p1xp1")
X1 = ToricInput.make([[1, 1, 0, -1, -1], [0, 0, 1, 1, 1]], [1, 2], name="x1")
X2 = ToricInput.make([[1, 1, 0, 0, -2], [0, 0, 1, 1, 1]], [1, 2], name="x2")
QUINTIC = ToricInput.make([[1, 1, 1, 1, 1]], [1], L=[[5]], name="quintic")


def harmonic(n):
    return sum(Fraction(1, m) for m in range(1, n + 1))


def series_divide(num, den, order):
    """Oracle: one-variable power series division with plain Fractions."""
    out = [Fraction(0)] * (order + 1)
    for d in range(order + 1):
        acc = num[d]
        for e in range(1, d + 1):
            acc -= den[e] * out[d - e]
        out[d] = acc / den[0]
    return out


class TestAsymptotics:
    def test_fano_is_trivial(self):
        for inp in (P2, P1XP1):
            model = ToricModel.build(inp)
            hs = build_hyper_series(model, 3)
            asym = expand_asymptotics(model, hs)
            assert asym.leading == GradedQSeries.constant(asym.grading, asym.bound)
            assert all(s.is_zero for s in asym.variable_shift)
            assert all(s.is_zero for s in asym.divisor_shift)
            assert asym.scalar_shift.is_zero

    def test_quintic_leading_series(self):
        model = ToricModel.build(QUINTIC)
        hs = build_hyper_series(model, 4)
        asym = expand_asymptotics(model, hs)
        for d in range(5):
            want = Fraction(factorial(5 * d), factorial(d) ** 5)
            assert asym.leading.get((d,)) == want
        # frozen values
        assert [asym.leading.get((d,)) for d in range(5)] == [
            1, 120, 113400, 168168000, 305540235000,
        ]

    def test_quintic_variable_shift_against_expansion_oracle(self):
        # oracle: expand the series over Q[p]/(p^2) directly: the p-coefficient
        # of the 1/h term is 5 (5d)!/(d!)^5 (H_{5d} - H_d), then divide by the
        # leading series
        model = ToricModel.build(QUINTIC)
        hs = build_hyper_series(model, 3)
        asym = expand_asymptotics(model, hs)
        lead = [Fraction(factorial(5 * d), factorial(d) ** 5) for d in range(4)]
        raw = [5 * lead[d] * (harmonic(5 * d) - harmonic(d)) for d in range(4)]
        want = series_divide(raw, lead, 3)
        got = asym.variable_shift[0]
        for d in range(4):
            assert got.get((d,)) == want[d]

    def test_x2_shifts_match_catalan_like_series(self):
        model = ToricModel.build(X2)
        hs = build_hyper_series(model, 4)
        asym = expand_asymptotics(model, hs)
        f = {d: Fraction(factorial(2 * d - 1), factorial(d) ** 2) for d in range(1, 5)}
        for d, c in f.items():
            assert asym.variable_shift[0].get((d, 0)) == 2 * c
            assert asym.variable_shift[1].get((d, 0)) == -c
            assert asym.divisor_shift[4].get((d, 0)) == c
        for j in range(4):
            assert asym.divisor_shift[j].is_zero
        assert asym.scalar_shift.is_zero
        assert asym.leading == GradedQSeries.constant(asym.grading, asym.bound)

    def test_requires_symbolic_context(self):
        model = ToricModel.build(P2, mode="specialized", seed=1)
        hs = build_hyper_series(model, 2)
        with pytest.raises(MirrorError, match="symbolic"):
            expand_asymptotics(model, hs)


class TestNormalize:
    def test_fano_identity(self):
        model = ToricModel.build(P2)
        hs = build_hyper_series(model, 3)
        flat, mm = normalize_to_flat(model, hs)
        assert mm.identity
        assert mm.f0.is_zero
        for fp in model.fps:
            series = flat.per_vertex[fp.alpha]
            for d in hs.degrees:
                assert series.get(d) == hs.coefficient(d, fp).to_rational(model.ctx)

    def test_x2_inverse_change_of_variables(self):
        model = ToricModel.build(X2)
        hs = build_hyper_series(model, 6)
        flat, mm = normalize_to_flat(model, hs)
        assert not mm.identity
        grading = Grading(model.inp.tstar)
        universe = hs.degrees
        # oracle: the inverse is Q1 = q1/(1+q1)^2, Q2 = q2 (1+q1), so
        # exp(inverse_shift_1) = (1+q1)^-2 and inverse_shift_2 = log(1+q1)
        one_plus = GradedQSeries(grading, 6, {(0, 0): Fraction(1), (1, 0): Fraction(1)})
        inv_sq = (one_plus * one_plus).inverse(universe)
        got1 = mm.inverse_shift[0].exp()
        assert got1 == inv_sq
        assert mm.inverse_shift[1] == one_plus.log()

    def test_x2_flat_is_certified(self):
        model = ToricModel.build(X2)
        hs = build_hyper_series(model, 4)
        flat, _ = normalize_to_flat(model, hs)  # check=True asserts 1 + O(1/h^2)
        assert flat.bound == 4


class TestAnnihilation:
    @pytest.mark.parametrize(
        "inp,degrees,bound",
        [
            (P1, [(1,)], 4),
            (P2, [(1,)], 3),
            (P1XP1, [(1, 0), (0, 1)], 3),
            (X1, [(1, 0), (0, 1)], 4),
            (X2, [(1, 0), (0, 1)], 4),
            (QUINTIC, [(1,)], 3),
        ],
    )
    def test_box_operators_annihilate(self, inp, degrees, bound):
        model = ToricModel.build(inp)
        hs = build_hyper_series(model, bound)
        reports = check_annihilation(model, hs, degrees)
        for rep in reports:
            assert rep.ok and rep.checked > 0

    def test_degree_zero_operator_is_zero(self):
        model = ToricModel.build(P2)
        hs = build_hyper_series(model, 2)
        out = apply_box_operator(model, hs, (0,))
        assert all(v.is_zero for v in out.values())

    def test_materialized_action_is_zero_series(self):
        model = ToricModel.build(P2)
        hs = build_hyper_series(model, 3)
        out = apply_box_operator(model, hs, (1,))
        assert all(v.is_zero for v in out.values())

    def test_violation_detected(self):
        # operator of the wrong degree must not annihilate
        model = ToricModel.build(P2)
        hs = build_hyper_series(model, 3)
        bad = check_annihilation(model, hs, [(2,)])
        # degree (2,) is the square relation; it is *also* satisfied.
        # A genuinely wrong operator: shift the bundle-free data by hand.
        op = BoxOperator(degree=(1,), Dvals=(1, 1, 0), Lvals=())
        rep = check_annihilation.__wrapped__ if hasattr(check_annihilation, "__wrapped__") else None
        t1 = bad  # keep flake quiet; the real assertion:
        from toricmirror.mirror import _box_factors

        fp = model.fps[0]
        pos, neg, dshift = _box_factors(model, op, fp, (1,))
        t1 = pos * hs.coefficient((1,), fp)
        t2 = neg * hs.coefficient(dshift, fp)
        assert not (t1 == t2)

    def test_quintic_operator_shape(self):
        model = ToricModel.build(QUINTIC)
        op = BoxOperator.for_degree(model, (1,))
        assert op.Dvals == (1, 1, 1, 1, 1)
        assert op.Lvals == (5,)

    def test_bad_bundle_degree_rejected(self):
        model = ToricModel.build(QUINTIC)
        with pytest.raises(MirrorError, match="undefined"):
            BoxOperator.for_degree(model, (-1,))


class TestRelations:
    def test_p2(self):
        model = ToricModel.build(P2)
        (rel,) = quantum_relations(model, [(1,)])
        assert rel.lhs == PPoly.from_dict(1, {(3,): Fraction(1)})
        assert rel.rhs == PPoly.from_dict(1, {(0,): Fraction(1)})
        assert rel.pretty() == "p1^3 = q"

    def test_x1_pair(self):
        model = ToricModel.build(X1)
        r10, r01 = quantum_relations(model, [(1, 0), (0, 1)])
        assert r10.lhs == PPoly.from_dict(2, {(2, 0): Fraction(1)})
        assert r10.rhs == PPoly.from_dict(
            2, {(0, 2): Fraction(1), (1, 1): Fraction(-2), (2, 0): Fraction(1)}
        )
        assert r10.pretty() == "p1^2 = q1 (- p1 + p2)^2"
        assert r01.lhs == PPoly.from_dict(
            2, {(0, 3): Fraction(1), (1, 2): Fraction(-2), (2, 1): Fraction(1)}
        )
        assert r01.rhs == PPoly.from_dict(2, {(0, 0): Fraction(1)})

    def test_x2_pair(self):
        model = ToricModel.build(X2)
        r10, r01 = quantum_relations(model, [(1, 0), (0, 1)])
        # U1 U2 = Q1 U5^2 with U5 = p2 - 2 p1
        assert r10.lhs == PPoly.from_dict(2, {(2, 0): Fraction(1)})
        assert r10.rhs == PPoly.from_dict(
            2, {(0, 2): Fraction(1), (1, 1): Fraction(-4), (2, 0): Fraction(4)}
        )

    def test_classical_relations(self):
        model = ToricModel.build(X1)
        rels = classical_relations(model)
        assert [r.indices for r in rels] == [(0, 1), (2, 3, 4)]
        assert rels[0].poly == PPoly.from_dict(2, {(2, 0): Fraction(1)})
        # u3 u4 u5 = p2 (p2 - p1)^2
        assert rels[1].poly == PPoly.from_dict(
            2, {(0, 3): Fraction(1), (1, 2): Fraction(-2), (2, 1): Fraction(1)}
        )

    def test_anticanonical(self):
        model = ToricModel.build(X1)
        assert anticanonical_pform(model) == PPoly.from_dict(2, {(0, 1): Fraction(3)})

    def test_ineffective_degree_rejected(self):
        model = ToricModel.build(P2)
        with pytest.raises(MirrorError):
            quantum_relations(model, [(-1,)])


class TestTransport:
    def test_x2_flat_series_satisfies_x1_operators(self):
        # symbolic extraction on the projectivization with the twisted factor,
        # heavy series work on a ray, annihilation by the other presentation
        sym = ToricModel.build(X2)
        hs_sym = build_hyper_series(sym, 3)
        asym = expand_asymptotics(sym, hs_sym)
        ray = ToricModel.build(X2, mode="ray", seed=7)
        hs_ray = build_hyper_series(ray, 3)
        flat, _ = normalize_to_flat(ray, hs_ray, asym=asym, ctx=ray.ctx)
        x1 = ToricModel.build(X1)
        reports = check_transport_annihilation(ray, flat, x1, [(1, 0), (0, 1)])
        for rep in reports:
            assert rep.ok and rep.checked > 0

    def test_transport_detects_wrong_map(self):
        # skipping the normalization (using the raw series) must fail
        from toricmirror.mirror import FlatSeries

        ray = ToricModel.build(X2, mode="ray", seed=7)
        hs_ray = build_hyper_series(ray, 2)
        grading = Grading(ray.inp.tstar)
        raw = FlatSeries(
            model=ray, bound=Fraction(2),
            per_vertex={
                fp.alpha: GradedQSeries(
                    grading, 2,
                    {d: hs_ray.coefficient(d, fp).to_rational(ray.ctx)
                     for d in hs_ray.degrees},
                )
                for fp in ray.fps
            },
        )
        x1 = ToricModel.build(X1)
        reports = check_transport_annihilation(ray, raw, x1, [(1, 0)])
        assert any(not rep.ok for rep in reports)
