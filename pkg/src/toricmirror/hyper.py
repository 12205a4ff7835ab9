"""The equivariant hypergeometric series, its map-space counterpart, and the
two structural identities that tie them together.

Per fixed point and degree the series coefficient is a ratio of products of
linear forms in the weights and h, kept in factored shape
(:class:`~toricmirror.algebra.FactoredValue`).  The localization recursion is
then a statement about residues of factored products and is checked by unique
factorization, never by expanding polynomials.  The map-space series needs
genuine sums of residues; those go through the ring of the ambient context.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from .algebra import (
    FactoredValue,
    LinForm,
    NonGenericPoleError,
    RationalFunction,
    SymbolContext,
    rf_expand_hbar_infinity,
    sum_factored,
)
from .cones import dot
from .series import expand_hz_exponential
from .toric import Edge, FixedPoint, ToricModel


class HyperError(ValueError):
    pass


# ---------------------------------------------------------------------------
# the hypergeometric series


def hyper_coefficient(model: ToricModel, fp: FixedPoint, d) -> FactoredValue:
    """Coefficient of q^d localized at one fixed point, factored.

    Zero whenever some defining index of the vertex pairs negatively with d;
    bundle pairings must be non-negative on effective degrees.
    """
    inp = model.inp
    D, La = inp.degree_pairings(d)
    if any(x < 0 for x in La):
        raise HyperError(f"bundle not non-negative: L(d) = {La} at d = {tuple(d)}")
    for j in fp.alpha:
        if D[j] < 0:
            return FactoredValue.zero()
    nlam = model.ctx.nlam
    hb = LinForm.hbar(nlam)
    val = FactoredValue.one()
    for a in range(inp.l):
        for m in range(1, La[a] + 1):
            val = val.times_form(fp.v_forms[a].plus_hbar(m))
    for j in fp.alpha:
        if D[j]:
            val = val.times_scalar(Fraction(1, factorial(D[j])))
            val = val.times_form(hb, -D[j])
    for j in range(inp.N):
        if j in fp.alpha:
            continue
        Dj = D[j]
        if Dj > 0:
            for m in range(1, Dj + 1):
                val = val.times_form(fp.u_forms[j].plus_hbar(m), -1)
        elif Dj < 0:
            for m in range(Dj + 1, 1):
                val = val.times_form(fp.u_forms[j].plus_hbar(m))
    if not val.is_zero and val.total_degree() != -(sum(D) - sum(La)):
        raise HyperError(f"homogeneity violated at d = {tuple(d)}, vertex {fp.label}")
    return val


@dataclass
class HyperSeries:
    """All coefficients up to the truncation bound, factored per vertex."""

    model: ToricModel
    bound: Fraction
    degrees: list[tuple[int, ...]]
    coeffs: dict  # d -> {alpha: FactoredValue}

    def coefficient(self, d, fp: FixedPoint) -> FactoredValue:
        entry = self.coeffs.get(tuple(d))
        if entry is None:
            return FactoredValue.zero()
        return entry.get(fp.alpha, FactoredValue.zero())

    def degree_pair(self, d) -> Fraction:
        return self.model.lattice.pair_tstar(d)


def build_hyper_series(model: ToricModel, bound) -> HyperSeries:
    degrees = model.degrees(bound)
    coeffs = {}
    for d in degrees:
        per = {}
        for fp in model.fps:
            v = hyper_coefficient(model, fp, d)
            if not v.is_zero:
                per[fp.alpha] = v
        coeffs[d] = per
    hs = HyperSeries(model=model, bound=Fraction(bound), degrees=degrees, coeffs=coeffs)
    zero = (0,) * model.inp.k
    for fp in model.fps:
        if hs.coefficient(zero, fp) != FactoredValue.one():
            raise HyperError("unit coefficient at degree zero is broken")
    return hs


# ---------------------------------------------------------------------------
# recursion coefficients and the pole-matching check


def recursion_coefficient(model: ToricModel, edge: Edge, n: int) -> FactoredValue:
    """Weight of the n-fold cover of one edge in the localization recursion.

    h-free by construction; evaluates the factored product with every
    doubly-infinite ratio telescoped to a finite one.
    """
    if n < 1:
        raise HyperError("cover multiplicity must be positive")
    fp, beta = edge.source, edge.target
    w = fp.u_forms[edge.j]
    val = FactoredValue.one()
    for a in range(model.inp.l):
        nL = n * edge.Lvals[a]
        if nL < 0:
            raise HyperError("bundle pairs negatively with an edge class")
        for m in range(1, nL + 1):
            val = val.times_form(fp.v_forms[a] - w.scale(Fraction(m, n)))
    shared = set(fp.alpha) | set(beta.alpha)
    for s in range(model.inp.N):
        if s in shared:
            continue
        A = n * edge.Dvals[s]
        us = fp.u_forms[s]
        if A > 0:
            for m in range(1, A + 1):
                val = val.times_form(us - w.scale(Fraction(m, n)), -1)
        elif A < 0:
            for m in range(A + 1, 1):
                val = val.times_form(us - w.scale(Fraction(m, n)))
    # (n-1)! (w/n)^(n-1) from the cover itself, n! (-w/n)^n from the leaving index
    val = val.times_form(w, -(2 * n - 1))
    val = val.times_scalar(
        Fraction((-1) ** n * n ** (2 * n - 1), factorial(n - 1) * factorial(n))
    )
    up, down = val.hbar_order()
    if up or down:
        raise HyperError("recursion coefficient failed to be h-free")
    return val


@dataclass
class PoleRecord:
    alpha: tuple
    degree: tuple
    j: int
    n: int
    matched: bool


@dataclass
class RecursionReport:
    checked: int = 0
    matched: int = 0
    failures: list = field(default_factory=list)
    remainders: dict = field(default_factory=dict)  # (alpha, d) -> tuple of tails

    @property
    def ok(self) -> bool:
        return not self.failures


def check_recursion(model: ToricModel, hs: HyperSeries, bound=None,
                    emit_remainders: bool = True) -> RecursionReport:
    """Decompose every coefficient into simple h-fractions and match each pole
    against the recursion prediction from the matching edge cover.

    Oracle independence: the poles are read off the stored factorization and
    residues are computed by evaluation; the prediction multiplies the cover
    coefficient into the shifted series at the other end of the edge.
    """
    bound = Fraction(bound) if bound is not None else hs.bound
    report = RecursionReport()
    inp = model.inp
    for d in hs.degrees:
        if hs.degree_pair(d) > bound:
            continue
        D, _ = inp.degree_pairings(d)
        for fp in model.fps:
            Z = hs.coefficient(d, fp)
            if Z.is_zero:
                continue
            report.checked += 1
            # expected pole table: (j, n) -> canonical key of u_j + n h
            table = {}
            collisions = False
            for j in range(inp.N):
                if j in fp.alpha or D[j] <= 0:
                    continue
                for n in range(1, D[j] + 1):
                    _, key = fp.u_forms[j].plus_hbar(n).canonical()
                    if key in table:
                        collisions = True
                    table[key] = (j, n)
            if collisions:
                report.failures.append((fp.alpha, d, "non-generic weights: pole collision"))
                continue
            residues = []
            ok_here = True
            for key, (rep, exp) in sorted(Z.powers.items()):
                if exp >= 0 or rep.hcoef == 0 or rep.lambda_part_zero:
                    continue
                hit = table.get(key)
                if hit is None:
                    report.failures.append((fp.alpha, d, f"unexpected pole {rep!r}"))
                    ok_here = False
                    continue
                if exp != -1:
                    report.failures.append((fp.alpha, d, f"pole of order {-exp} at {rep!r}"))
                    ok_here = False
                    continue
                j, n = hit
                value = fp.u_forms[j].scale(Fraction(-1, n))  # h at the pole
                try:
                    lhs = Z.times_form(rep, 1).subs_hbar(value).times_scalar(
                        Fraction(1, 1) / rep.hcoef
                    )
                    edge = model.edge(fp.alpha, j)
                    shifted = tuple(di - n * ei for di, ei in zip(d, edge.degree))
                    zb = hs.coefficient(shifted, edge.target)
                    rhs = (
                        recursion_coefficient(model, edge, n)
                        * zb.subs_hbar(value)
                    ).times_scalar(Fraction(1, n)) if not zb.is_zero else FactoredValue.zero()
                except NonGenericPoleError as err:
                    report.failures.append((fp.alpha, d, str(err)))
                    ok_here = False
                    continue
                if lhs == rhs:
                    report.matched += 1
                    residues.append((FactoredValue.one().times_form(value), lhs))
                else:
                    report.failures.append(
                        (fp.alpha, d, f"residue mismatch at pole j={j + 1}, n={n}")
                    )
                    ok_here = False
            if ok_here and emit_remainders:
                report.remainders[(fp.alpha, d)] = _laurent_remainder(
                    model.ctx, Z, residues
                )
    return report


def _laurent_remainder(ctx: SymbolContext, Z: FactoredValue, residues) -> tuple:
    """Coefficients (h^0, h^-1, ..., h^-E) once all simple fractions are removed.

    Valid because the nonzero poles were verified simple with matching
    residues: the difference of the coefficient and its simple fractions is a
    Laurent polynomial in 1/h whose coefficients are read off the expansion
    at h = infinity (res/(h - h0) expands to sum res * h0^(m-1) h^-m).
    """
    order = Z.powers.get(LinForm.hbar(ctx.nlam).canonical()[1], (None, 0))[1]
    E = max(0, -order)
    tail = rf_expand_hbar_infinity(Z.to_rational(ctx), E)
    out = []
    for m in range(E + 1):
        c = tail[m]
        for loc, res in residues:
            if m >= 1:
                c = c - (res * loc ** (m - 1)).to_rational(ctx)
        out.append(c.reduce() if hasattr(c, "reduce") else c)
    return tuple(out)


# ---------------------------------------------------------------------------
# the map-space series


@dataclass
class MapSpaceCoefficient:
    degree: tuple
    zmono: tuple
    value: RationalFunction
    polynomial: object | None
    homogeneous: bool | None

    @property
    def certified(self) -> bool:
        return self.polynomial is not None


@dataclass
class MapSpaceSeries:
    model: ToricModel
    bound: Fraction
    zcap: int
    table: dict  # (d, zmono) -> MapSpaceCoefficient

    def value(self, d, zmono) -> MapSpaceCoefficient:
        return self.table[(tuple(d), tuple(zmono))]


def _zmonomials(k: int, zcap: int):
    out = []
    for total in range(zcap + 1):
        for mono in itertools.product(range(zcap + 1), repeat=k):
            if sum(mono) == total:
                out.append(mono)
    return out


def map_space_residue_terms(model: ToricModel, d, zmono) -> list[FactoredValue]:
    """All fixed-point residues of the degree-d map space against one
    z-monomial of the exponential class.
    """
    inp = model.inp
    D, La = inp.degree_pairings(d)
    nlam = model.ctx.nlam
    hb = LinForm.hbar(nlam)
    terms = []
    for fp in model.fps:
        if any(D[j] < 0 for j in fp.alpha):
            continue
        ranges = [range(D[j] + 1) for j in fp.alpha]
        for r in itertools.product(*ranges):
            # p* = p(alpha) + h * delta with the defining block solving to r
            delta = [
                sum(fp.minv[s][i] * r[s] for s in range(inp.k)) for i in range(inp.k)
            ]
            base = FactoredValue(Fraction(fp.det_sign))
            for s, j in enumerate(fp.alpha):
                rs, Dj = r[s], D[j]
                base = base.times_scalar(
                    Fraction((-1) ** (Dj - rs), factorial(rs) * factorial(Dj - rs))
                )
                if Dj:
                    base = base.times_form(hb, -Dj)
            singular = base.is_zero
            if singular:
                continue
            for j in range(inp.N):
                if j in fp.alpha:
                    continue
                shift = sum(delta[i] * inp.M[i][j] for i in range(inp.k))
                ustar = fp.u_forms[j].plus_hbar(shift)
                if D[j] >= 0:
                    for m in range(0, D[j] + 1):
                        base = base.times_form(ustar.plus_hbar(-m), -1)
                else:
                    for m in range(D[j] + 1, 0):
                        base = base.times_form(ustar.plus_hbar(-m))
            for a in range(inp.l):
                shift = sum(delta[i] * inp.L[i][a] for i in range(inp.k))
                vstar = fp.v_forms[a].plus_hbar(shift)
                for m in range(0, La[a] + 1):
                    base = base.times_form(vstar.plus_hbar(-m))
            for i, mi in enumerate(zmono):
                if mi:
                    pstar = fp.p_forms[i].plus_hbar(delta[i])
                    base = base.times_form(pstar, mi).times_scalar(
                        Fraction(1, factorial(mi))
                    )
            if not base.is_zero:
                terms.append(base)
    return terms


def build_map_space_series(model: ToricModel, bound, zcap: int,
                           require_certificates: bool = True) -> MapSpaceSeries:
    """Sum the residues per degree and z-monomial; certify polynomiality and
    exact weighted homogeneity wherever the context permits.
    """
    inp = model.inp
    ctx = model.ctx
    table = {}
    expected_total = inp.l + inp.k - inp.N
    for d in model.degrees(bound):
        degq = int(dot(inp.grading_weights, d))
        for zmono in _zmonomials(inp.k, zcap):
            terms = map_space_residue_terms(model, d, zmono)
            value = sum_factored(ctx, terms)
            poly = value.as_polynomial()
            homog = None
            if poly is not None and ctx.mode != "specialized":
                want = expected_total + sum(zmono) - degq
                homog = (not poly) or all(sum(m) == want for m in poly.monoms())
            if require_certificates and poly is None:
                raise HyperError(
                    f"non-polynomial map-space coefficient at d={tuple(d)}, z={zmono}"
                )
            if require_certificates and homog is False:
                raise HyperError(
                    f"inhomogeneous map-space coefficient at d={tuple(d)}, z={zmono}"
                )
            table[(tuple(d), tuple(zmono))] = MapSpaceCoefficient(
                degree=tuple(d), zmono=tuple(zmono), value=value,
                polynomial=poly, homogeneous=homog,
            )
    return MapSpaceSeries(model=model, bound=Fraction(bound), zcap=zcap, table=table)


# ---------------------------------------------------------------------------
# the double-construction identity


@dataclass
class DoubleReport:
    compared: int = 0
    failures: list = field(default_factory=list)
    symmetry_checked: int = 0
    symmetry_failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures and not self.symmetry_failures


def check_double_construction(model: ToricModel, hs: HyperSeries,
                              phi: MapSpaceSeries, bound=None,
                              zcap: int | None = None,
                              check_symmetry: bool = True) -> DoubleReport:
    """Pair the series against its own h-flip across every degree split and
    compare with the map-space residues, coefficient by coefficient.
    """
    inp = model.inp
    ctx = model.ctx
    bound = Fraction(bound) if bound is not None else min(hs.bound, phi.bound)
    zcap = zcap if zcap is not None else phi.zcap
    degrees = [d for d in hs.degrees if hs.degree_pair(d) <= bound]
    report = DoubleReport()
    # vertex-level constants
    euler_over_u = {}
    for fp in model.fps:
        c = FactoredValue(Fraction(fp.det_sign))
        for a in range(inp.l):
            c = c.times_form(fp.v_forms[a])
        for j in range(inp.N):
            if j not in fp.alpha:
                c = c.times_form(fp.u_forms[j], -1)
        euler_over_u[fp.alpha] = c
    neg_cache: dict = {}

    def neg_coeff(d, fp):
        key = (d, fp.alpha)
        if key not in neg_cache:
            neg_cache[key] = hs.coefficient(d, fp).negate_hbar()
        return neg_cache[key]

    for d in degrees:
        splits = []
        for d1 in degrees:
            d2 = tuple(a - b for a, b in zip(d, d1))
            if d2 in hs.coeffs:
                splits.append((d1, d2))
        for zmono in _zmonomials(inp.k, zcap):
            terms = []
            for d1, d2 in splits:
                for fp in model.fps:
                    a1 = hs.coefficient(d1, fp)
                    if a1.is_zero:
                        continue
                    a2 = neg_coeff(d2, fp)
                    if a2.is_zero:
                        continue
                    t = a1 * a2 * euler_over_u[fp.alpha]
                    # z-coefficient of exp((p + h d1) z)
                    for i, mi in enumerate(zmono):
                        if mi:
                            t = t.times_form(
                                fp.p_forms[i].plus_hbar(d1[i]), mi
                            ).times_scalar(Fraction(1, factorial(mi)))
                    terms.append(t)
            lhs = sum_factored(ctx, terms)
            rhs = phi.value(d, zmono)
            report.compared += 1
            same = (
                lhs.num * rhs.value.den == rhs.value.num * lhs.den
            )
            if not same:
                report.failures.append((tuple(d), tuple(zmono)))
    if check_symmetry:
        _check_flip_symmetry(model, phi, degrees, zcap, report)
    return report


def _check_flip_symmetry(model, phi: MapSpaceSeries, degrees, zcap, report):
    """The generating series is invariant under swapping its two parameter
    slots with h negated: coefficientwise,
    value(d, m)(h) = sum_{m' + m'' = m} (h d)^{m'} / m'! * value(d, m'')(-h).
    """
    ctx = model.ctx
    for d in degrees:
        shift_table = expand_hz_exponential(d, zcap)
        for zmono in _zmonomials(model.inp.k, zcap):
            lhs = phi.value(d, zmono).value
            rhs = RationalFunction.const(ctx, 0)
            for m2 in _zmonomials(model.inp.k, zcap):
                m1 = tuple(a - b for a, b in zip(zmono, m2))
                if any(x < 0 for x in m1):
                    continue
                coef = Fraction(1)
                for di, mi in zip(d, m1):
                    coef *= Fraction(di) ** mi / factorial(mi)
                if coef == 0 and any(m1):
                    continue
                flipped = _negate_hbar_rf(ctx, phi.value(d, m2).value)
                hpow = RationalFunction(ctx, ctx.hbar ** sum(m1))
                rhs = rhs + flipped * hpow * coef
            report.symmetry_checked += 1
            if not (lhs == rhs):
                report.symmetry_failures.append((tuple(d), tuple(zmono)))


def _negate_hbar_rf(ctx: SymbolContext, rf: RationalFunction) -> RationalFunction:
    return RationalFunction(ctx, _negate_hbar_poly(ctx, rf.num),
                            _negate_hbar_poly(ctx, rf.den))


def _negate_hbar_poly(ctx: SymbolContext, p):
    hi = ctx.hbar_index()
    out = {}
    for mon, c in p.terms():
        out[mon] = -c if mon[hi] % 2 else c
    return ctx.ring.from_dict(out) if out else ctx.ring.zero
