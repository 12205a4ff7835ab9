"""Asymptotics of the hypergeometric series, the change of variables to flat
coordinates, box-operator annihilation, and quantum-relation symbols.

The 1/h asymptotics of each coefficient decomposes against the span of the
unit and the divisor/bundle weights; the scalar and variable shifts read off
that decomposition drive the three normalization steps.  Box operators act
coefficientwise through the conjugation divisor -> weight + h * pairing, so
annihilation is an exact statement about factored products per vertex and
degree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

from .algebra import (
    FactoredValue,
    LinForm,
    RationalFunction,
    SymbolContext,
    expand_factored_at_infinity,
    poly_to_fraction,
)
from .cones import dot, mat_rank, solve_linear
from .hyper import HyperSeries, build_hyper_series
from .series import GradedQSeries, Grading, invert_exponential_change
from .toric import ToricModel, anticanonical_nonnegative


class MirrorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# asymptotics


@dataclass
class AsymptoticData:
    """Order-0 and order-1 data of the series at h = infinity.

    leading        scalar series with constant term 1 (order 0)
    scalar_shift   rational series multiplying the unit in the order-1 part
    divisor_shift  per-divisor rational series (coefficient of its weight)
    bundle_shift   per-summand rational series (coefficient of its weight)
    variable_shift one rational series per quantum variable (the p-part)
    All are normalized by the leading series, ready for the flattening steps.
    """

    grading: Grading
    bound: Fraction
    leading: GradedQSeries
    scalar_shift: GradedQSeries
    divisor_shift: list
    bundle_shift: list
    variable_shift: list

    def exponent_coefficient(self, d) -> tuple[Fraction, LinForm]:
        """(constant, weight-linear form) of the step-two exponent at q^d."""
        raise NotImplementedError  # assembled in normalize_to_flat


def expand_asymptotics(model: ToricModel, hs: HyperSeries) -> AsymptoticData:
    """Extract the order-0/order-1 expansion data of every coefficient.

    Requires a symbolic context (the decomposition separates the individual
    weights) and non-negative anticanonical pairing on the degree cone.
    """
    if not model.ctx.is_symbolic:
        raise MirrorError("asymptotic decomposition needs the symbolic context")
    if not anticanonical_nonnegative(model.lattice):
        raise MirrorError("anticanonical class pairs negatively with a curve class")
    ctx = model.ctx
    inp = model.inp
    grading = Grading(inp.tstar)
    zero_d = (0,) * inp.k
    lead: dict = {}
    scal: dict = {}
    divs: list[dict] = [dict() for _ in range(inp.N)]
    bund: list[dict] = [dict() for _ in range(inp.l)]
    vars_: list[dict] = [dict() for _ in range(inp.k)]
    for d in hs.degrees:
        degq = model.lattice.degree_of_q(d)
        c0_per = {}
        c1_per = {}
        for fp in model.fps:
            fv = hs.coefficient(d, fp)
            if fv.is_zero:
                c0_per[fp.alpha] = ctx.ring.zero
                c1_per[fp.alpha] = ctx.ring.zero
                continue
            leadord, tail = expand_factored_at_infinity(ctx, fv, 1)
            if leadord < 0:
                raise MirrorError(
                    f"coefficient at d={tuple(d)} grows at h = infinity; "
                    "asymptotics outside the expected form"
                )
            c0 = tail[0] if leadord == 0 else RationalFunction.const(ctx, 0)
            c1 = (
                tail[1 - leadord]
                if leadord <= 1
                else RationalFunction.const(ctx, 0)
            )
            p0 = c0.as_polynomial()
            p1 = c1.as_polynomial()
            if p0 is None or p1 is None:
                raise MirrorError("expansion coefficient failed to clear")
            c0_per[fp.alpha] = p0
            c1_per[fp.alpha] = p1
        # order 0 must be one scalar across vertices
        consts = set()
        for alpha, p0 in c0_per.items():
            if p0 and any(any(m) for m in p0.monoms()):
                raise MirrorError(
                    f"order-0 part at d={tuple(d)} is not scalar at {alpha}"
                )
            consts.add(poly_to_fraction(p0))
        if len(consts) != 1:
            raise MirrorError(f"order-0 part at d={tuple(d)} varies across vertices")
        (c0_val,) = consts
        if c0_val:
            if degq != 0:
                raise MirrorError("order-0 support violates the grading")
            lead[d] = c0_val
        hbar_i = ctx.hbar_index()
        # order 1: constant + weight-linear, decomposed
        const_vals = set()
        gamma = {}  # alpha -> list of weight-linear coefficients
        for alpha, p1 in c1_per.items():
            const = Fraction(0)
            lin = [Fraction(0)] * ctx.nlam
            for mon, c in p1.terms():
                if mon[hbar_i]:
                    raise MirrorError("stray h in an expansion coefficient")
                tot = sum(mon)
                if tot == 0:
                    const = Fraction(int(ctx.ring.domain.numer(c)),
                                     int(ctx.ring.domain.denom(c)))
                elif tot == 1:
                    idx = mon.index(1)
                    lin[idx] = Fraction(int(ctx.ring.domain.numer(c)),
                                        int(ctx.ring.domain.denom(c)))
                else:
                    raise MirrorError(
                        f"order-1 part at d={tuple(d)} is not weight-linear"
                    )
            const_vals.add(const)
            gamma[alpha] = lin
        if len(const_vals) != 1:
            raise MirrorError(f"order-1 constant varies across vertices at d={tuple(d)}")
        (h_val,) = const_vals
        if h_val:
            if degq != 1:
                raise MirrorError("order-1 scalar support violates the grading")
            scal[d] = h_val
        # bundle weights only enter through their own slots
        bundle_coeffs = []
        for a in range(inp.l):
            slot = inp.N + a
            vals = {alpha: g[slot] for alpha, g in gamma.items()}
            if len(set(vals.values())) != 1:
                raise MirrorError(
                    f"bundle slot {a + 1} varies across vertices at d={tuple(d)}"
                )
            bundle_coeffs.append(-next(iter(vals.values())))
        phi_vals, div_coeffs = _solve_divisor_decomposition(model, gamma, d)
        if any(x != 0 for x in phi_vals) or any(x != 0 for x in div_coeffs) \
                or any(x != 0 for x in bundle_coeffs):
            if degq != 0:
                raise MirrorError("order-1 weight-linear support violates the grading")
        for a, val in enumerate(bundle_coeffs):
            if val:
                bund[a][d] = val
        for j, val in enumerate(div_coeffs):
            if val:
                divs[j][d] = val
        for i, val in enumerate(phi_vals):
            if val:
                vars_[i][d] = val
    if lead.get(zero_d) != 1:
        raise MirrorError("leading series must start at 1")
    bound = hs.bound
    leading = GradedQSeries(grading, bound, lead)
    universe = hs.degrees
    inv_lead = leading.inverse(universe)

    def normalized(dd: dict) -> GradedQSeries:
        return GradedQSeries(grading, bound, dd) * inv_lead

    return AsymptoticData(
        grading=grading,
        bound=bound,
        leading=leading,
        scalar_shift=normalized(scal),
        divisor_shift=[normalized(x) for x in divs],
        bundle_shift=[normalized(x) for x in bund],
        variable_shift=[normalized(x) for x in vars_],
    )


def _solve_divisor_decomposition(model: ToricModel, gamma: dict, d):
    """Split the base-weight-linear part into p-span and explicit weights.

    gamma[alpha][j] must equal F_j + sum_i phi_i * p_i(alpha)_j for rationals
    F_j, phi_i; the differences across vertices pin phi, the base vertex then
    pins F.  Raises when the system is inconsistent or underdetermined.
    """
    inp = model.inp
    fps = model.fps
    base = fps[0]
    rows = []
    rhs = []
    for fp in fps[1:]:
        for j in range(inp.N):
            row = [
                fp.p_forms[i].coeffs[j] - base.p_forms[i].coeffs[j]
                for i in range(inp.k)
            ]
            rows.append(row)
            rhs.append(gamma[fp.alpha][j] - gamma[base.alpha][j])
    if mat_rank(rows) != inp.k:
        raise MirrorError("vertex weights do not determine the variable shifts")
    # solve by picking independent rows, then verify all equations
    picked = []
    for i, row in enumerate(rows):
        if mat_rank([rows[j] for j in picked] + [row]) > len(picked):
            picked.append(i)
            if len(picked) == inp.k:
                break
    sol = solve_linear([rows[i] for i in picked], [rhs[i] for i in picked])
    for row, want in zip(rows, rhs):
        if dot(row, sol) != want:
            raise MirrorError(
                f"order-1 part at d={tuple(d)} is outside the unit/weight span"
            )
    phi = [Fraction(x) for x in sol]
    F = []
    for j in range(inp.N):
        F.append(
            gamma[base.alpha][j]
            - sum(phi[i] * base.p_forms[i].coeffs[j] for i in range(inp.k))
        )
    return phi, F


# ---------------------------------------------------------------------------
# normalization to flat coordinates


@dataclass
class MirrorMap:
    """The triangular change of variables extracted from the asymptotics.

    f0             log of the leading series (degree-0 scalar)
    variable_shift one series per variable: flat_i = q_i * exp(shift_i(q))
    divisor_shift / bundle_shift / scalar_shift: the step-two exponent parts
    inverse_shift  series giving q_i = Q_i * exp(inverse_shift_i(Q))
    identity       whether the whole change is trivial
    """

    f0: GradedQSeries
    scalar_shift: GradedQSeries
    divisor_shift: list
    bundle_shift: list
    variable_shift: list
    inverse_shift: list
    identity: bool


@dataclass
class FlatSeries:
    """Per-vertex scalar series after the three normalization steps."""

    model: ToricModel
    bound: Fraction
    per_vertex: dict  # alpha -> GradedQSeries with RationalFunction payload

    def coefficient(self, d, fp):
        return self.per_vertex[fp.alpha].get(tuple(d))


def normalize_to_flat(model: ToricModel, hs: HyperSeries,
                      asym: AsymptoticData | None = None,
                      ctx: SymbolContext | None = None,
                      check: bool = True) -> tuple[FlatSeries, MirrorMap]:
    """Run the three flattening steps and certify the 1 + O(1/h^2) shape.

    The asymptotic data is extracted symbolically when not supplied; the
    series work itself runs in ``ctx`` (defaults to the model context), so a
    ray or specialized context can be used for the heavy arithmetic after a
    symbolic extraction on the same input.
    """
    if asym is None:
        asym = expand_asymptotics(model, hs)
    ctx = ctx if ctx is not None else model.ctx
    inp = model.inp
    grading = asym.grading
    bound = min(asym.bound, hs.bound)
    universe = hs.degrees
    one = RationalFunction.const(ctx, 1)
    h_rf = RationalFunction(ctx, ctx.hbar)

    inv_lead = asym.leading.inverse(universe)
    # step two exponent: scalar + sum_j F_j l_j - sum_a G_a lp_a, over h
    exp_coeffs: dict = {}
    for d in set(asym.scalar_shift.coeffs) | {
        dd for s in asym.divisor_shift for dd in s.coeffs
    } | {dd for s in asym.bundle_shift for dd in s.coeffs}:
        form = LinForm.zero(ctx.nlam)
        for j in range(inp.N):
            cj = asym.divisor_shift[j].get(d)
            if cj:
                form = form + LinForm.weight(ctx.nlam, j).scale(cj)
        for a in range(inp.l):
            ca = asym.bundle_shift[a].get(d)
            if ca:
                form = form - LinForm.weight(ctx.nlam, inp.N + a).scale(ca)
        val = RationalFunction.from_form(ctx, form) + asym.scalar_shift.get(d)
        exp_coeffs[d] = val
    step2_exponent = GradedQSeries(grading, bound, exp_coeffs)
    exp_factor = (-step2_exponent.map(lambda c: c / h_rf)).exp(one=one) \
        if not step2_exponent.is_zero else GradedQSeries.constant(grading, bound, one)

    phi = asym.variable_shift
    identity = asym.leading == GradedQSeries.constant(grading, bound) and \
        step2_exponent.is_zero and all(s.is_zero for s in phi)
    inverse_shift = invert_exponential_change(phi, universe) if not identity else [
        GradedQSeries(grading, bound, {}) for _ in range(inp.k)
    ]

    per_vertex = {}
    for fp in model.fps:
        z = GradedQSeries(
            grading, bound,
            {d: hs.coefficient(d, fp).to_rational(ctx) for d in hs.degrees},
        )
        z = z * inv_lead
        if not step2_exponent.is_zero:
            z = z * exp_factor
        if not identity:
            arg: dict = {}
            for i in range(inp.k):
                for d, c in phi[i].coeffs.items():
                    pv = RationalFunction.from_form(ctx, fp.p_forms[i]) * c / h_rf
                    arg[d] = arg.get(d, RationalFunction.const(ctx, 0)) - pv
            pfac = GradedQSeries(grading, bound, arg)
            if not pfac.is_zero:
                z = z * pfac.exp(one=one)
            z = z.substitute_exponential(inverse_shift, one=one)
        per_vertex[fp.alpha] = z
    flat = FlatSeries(model=model, bound=bound, per_vertex=per_vertex)
    if check:
        _assert_flat(model, flat, ctx)
    mirror_map = MirrorMap(
        f0=asym.leading.log(),
        scalar_shift=asym.scalar_shift,
        divisor_shift=asym.divisor_shift,
        bundle_shift=asym.bundle_shift,
        variable_shift=phi,
        inverse_shift=inverse_shift,
        identity=identity,
    )
    return flat, mirror_map


def _assert_flat(model: ToricModel, flat: FlatSeries, ctx: SymbolContext):
    zero_d = (0,) * model.inp.k
    for fp in model.fps:
        series = flat.per_vertex[fp.alpha]
        c0 = series.get(zero_d)
        if not (c0 == 1):
            raise MirrorError(f"flat series does not start at 1 at {fp.label}")
        for d, c in series.coeffs.items():
            if d == zero_d:
                continue
            if isinstance(c, (int, Fraction)):
                if c != 0:
                    raise MirrorError(
                        f"normalization failed: constant residue at q^{d}, {fp.label}"
                    )
                continue
            if c.is_zero:
                continue
            if ctx.hbar_degree(c.num) > ctx.hbar_degree(c.den) - 2:
                raise MirrorError(
                    f"normalization failed: 1/h term survives at q^{d}, {fp.label}"
                )


# ---------------------------------------------------------------------------
# box operators and annihilation


@dataclass(frozen=True)
class BoxOperator:
    """Degree-d annihilation operator in conjugated, per-coefficient form.

    On the q^(d') slot at a vertex, the positive side multiplies by
    prod_{j: D_j(d) > 0} prod_{m=0}^{D_j-1} (u_j + h D_j(d') - m h) and the
    shifted side multiplies the q^(d'-d) slot by the matching products over
    indices with D_j(d) < 0 together with the bundle factors
    prod_a prod_{m=1}^{L_a(d)} (v_a + h L_a(d'-d) + m h).
    """

    degree: tuple[int, ...]
    Dvals: tuple[int, ...]
    Lvals: tuple[int, ...]

    @staticmethod
    def for_degree(model: ToricModel, d) -> "BoxOperator":
        D, La = model.inp.degree_pairings(d)
        if any(x < 0 for x in La):
            raise MirrorError(
                f"operator undefined for degree {tuple(d)}: bundle pairing negative"
            )
        return BoxOperator(degree=tuple(int(x) for x in d),
                           Dvals=tuple(D), Lvals=tuple(La))


def _box_factors(model: ToricModel, op: BoxOperator, fp, dprime):
    """(positive-side factors, shifted-side factors) as factored values."""
    inp = model.inp
    Dp, _ = inp.degree_pairings(dprime)
    dshift = tuple(a - b for a, b in zip(dprime, op.degree))
    Ds, Ls = inp.degree_pairings(dshift)
    pos = FactoredValue.one()
    for j in range(inp.N):
        if op.Dvals[j] > 0:
            base = fp.u_forms[j].plus_hbar(Dp[j])
            for m in range(op.Dvals[j]):
                pos = pos.times_form(base.plus_hbar(-m))
                if pos.is_zero:
                    break
        if pos.is_zero:
            break
    neg = FactoredValue.one()
    for j in range(inp.N):
        if op.Dvals[j] < 0:
            base = fp.u_forms[j].plus_hbar(Ds[j])
            for m in range(-op.Dvals[j]):
                neg = neg.times_form(base.plus_hbar(-m))
    for a in range(inp.l):
        base = fp.v_forms[a].plus_hbar(Ls[a])
        for m in range(1, op.Lvals[a] + 1):
            neg = neg.times_form(base.plus_hbar(m))
    return pos, neg, dshift


@dataclass
class AnnihilationReport:
    operator: tuple
    checked: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def check_annihilation(model: ToricModel, hs: HyperSeries, degrees,
                       bound=None) -> list[AnnihilationReport]:
    """Exact per-vertex, per-degree annihilation of the series by each
    operator, decided on factored products.
    """
    bound = Fraction(bound) if bound is not None else hs.bound
    reports = []
    for d in degrees:
        op = BoxOperator.for_degree(model, d)
        rep = AnnihilationReport(operator=op.degree)
        for dprime in hs.degrees:
            if hs.degree_pair(dprime) > bound:
                continue
            for fp in model.fps:
                pos, neg, dshift = _box_factors(model, op, fp, dprime)
                t1 = pos * hs.coefficient(dprime, fp)
                t2 = neg * hs.coefficient(dshift, fp)
                rep.checked += 1
                if not (t1 == t2):
                    rep.failures.append((op.degree, dprime, fp.alpha))
        reports.append(rep)
    return reports


def apply_box_operator(model: ToricModel, hs: HyperSeries, d,
                       bound=None) -> dict:
    """Materialized operator action: (d', alpha) -> difference as a
    RationalFunction.  Zero everywhere iff the operator annihilates.
    """
    bound = Fraction(bound) if bound is not None else hs.bound
    op = BoxOperator.for_degree(model, d)
    ctx = model.ctx
    out = {}
    for dprime in hs.degrees:
        if hs.degree_pair(dprime) > bound:
            continue
        for fp in model.fps:
            pos, neg, dshift = _box_factors(model, op, fp, dprime)
            t1 = pos * hs.coefficient(dprime, fp)
            t2 = neg * hs.coefficient(dshift, fp)
            out[(dprime, fp.alpha)] = (
                t1.to_rational(ctx) - t2.to_rational(ctx)
            )
    return out


# ---------------------------------------------------------------------------
# transported annihilation at weight zero


def ray_limit(ctx: SymbolContext, rf: RationalFunction) -> RationalFunction:
    """Weight -> 0 limit along a ray context; stays rational in h."""
    if ctx.mode != "ray":
        raise MirrorError("ray limits need a ray context")
    red = rf.reduce()
    if red.is_zero:
        return red
    den0 = ctx.eval_weights_zero(red.den)
    if not den0:
        raise MirrorError("weight -> 0 limit does not exist (denominator vanishes)")
    num0 = ctx.eval_weights_zero(red.num)
    return RationalFunction(ctx, num0, den0)


def check_transport_annihilation(
    source_model: ToricModel,
    flat: FlatSeries,
    operator_model: ToricModel,
    degrees,
    bound=None,
    basis=None,
) -> list[AnnihilationReport]:
    """Annihilation of a transported series by the operators of a different
    model presentation, verified at weight zero through the pairing.

    The source model must carry a ray context.  Operators are taken at their
    non-equivariant values (their own weights set to zero); the flat series
    is paired against a monomial basis of the common cohomology and each
    pairing must vanish in the weight -> 0 limit.
    """
    ctx = source_model.ctx
    if ctx.mode != "ray":
        raise MirrorError("transport check needs the source model in ray mode")
    inp_src = source_model.inp
    inp_op = operator_model.inp
    if inp_src.k != inp_op.k:
        raise MirrorError("variable counts differ between the two presentations")
    bound = Fraction(bound) if bound is not None else flat.bound
    if basis is None:
        basis = _default_monomial_basis(inp_src.k, inp_src.N - inp_src.k)
    h_rf = RationalFunction(ctx, ctx.hbar)
    # vertex data of the source model
    vertex_const = {}
    for fp in source_model.fps:
        c = FactoredValue(Fraction(fp.det_sign))
        for j in range(inp_src.N):
            if j not in fp.alpha:
                c = c.times_form(fp.u_forms[j], -1)
        vertex_const[fp.alpha] = c.to_rational(ctx)
    reports = []
    grading = Grading(inp_src.tstar)
    degree_list = sorted(
        {d for series in flat.per_vertex.values() for d in series.coeffs},
        key=lambda d: (grading.pair(d), d),
    )
    for d in degrees:
        Dop, Lop = inp_op.degree_pairings(d)
        if any(x < 0 for x in Lop):
            raise MirrorError("operator bundle pairing negative")
        rep = AnnihilationReport(operator=tuple(d))
        for dprime in degree_list:
            if grading.pair(dprime) > bound:
                continue
            dshift = tuple(a - b for a, b in zip(dprime, d))
            Dp = [sum(dprime[i] * inp_op.M[i][j] for i in range(inp_op.k))
                  for j in range(inp_op.N)]
            Dsh = [sum(dshift[i] * inp_op.M[i][j] for i in range(inp_op.k))
                   for j in range(inp_op.N)]
            Lsh = [sum(dshift[i] * inp_op.L[i][a] for i in range(inp_op.k))
                   for a in range(inp_op.l)]
            values = {}
            for fp in source_model.fps:
                c1 = flat.per_vertex[fp.alpha].get(dprime)
                c2 = flat.per_vertex[fp.alpha].get(dshift, None)
                pos = RationalFunction.const(ctx, 1)
                for j in range(inp_op.N):
                    if Dop[j] > 0:
                        conj = _conjugated_divisor(ctx, fp, inp_op, j, Dp[j])
                        for m in range(Dop[j]):
                            pos = pos * (conj - h_rf * m)
                neg = RationalFunction.const(ctx, 1)
                for j in range(inp_op.N):
                    if Dop[j] < 0:
                        conj = _conjugated_divisor(ctx, fp, inp_op, j, Dsh[j])
                        for m in range(-Dop[j]):
                            neg = neg * (conj - h_rf * m)
                for a in range(inp_op.l):
                    conj = _conjugated_bundle(ctx, fp, inp_op, a, Lsh[a])
                    for m in range(1, Lop[a] + 1):
                        neg = neg * (conj + h_rf * m)
                term = pos * _coerce_rf(ctx, c1)
                if c2 is not None:
                    term = term - neg * _coerce_rf(ctx, c2)
                values[fp.alpha] = term
            for mono in basis:
                total = RationalFunction.const(ctx, 0)
                for fp in source_model.fps:
                    wval = RationalFunction.const(ctx, 1)
                    for i, e in enumerate(mono):
                        if e:
                            wval = wval * RationalFunction.from_form(
                                ctx, fp.p_forms[i]
                            ) ** e
                    total = total + values[fp.alpha] * wval * vertex_const[fp.alpha]
                rep.checked += 1
                limit = ray_limit(ctx, total)
                if not limit.is_zero:
                    rep.failures.append((tuple(d), dprime, mono))
        reports.append(rep)
    return reports


def _coerce_rf(ctx, c):
    if c is None:
        return RationalFunction.const(ctx, 0)
    if isinstance(c, (int, Fraction)):
        return RationalFunction.const(ctx, c)
    return c


def _conjugated_divisor(ctx, fp, inp_op, j, pairing_val):
    """sum_i m_ij (p_i(alpha) + h d_i) at operator weights zero."""
    form = LinForm.zero(ctx.nlam)
    for i in range(inp_op.k):
        form = form + fp.p_forms[i].scale(inp_op.M[i][j])
    form = form.plus_hbar(pairing_val)
    return RationalFunction.from_form(ctx, form)


def _conjugated_bundle(ctx, fp, inp_op, a, pairing_val):
    form = LinForm.zero(ctx.nlam)
    for i in range(inp_op.k):
        form = form + fp.p_forms[i].scale(inp_op.L[i][a])
    form = form.plus_hbar(pairing_val)
    return RationalFunction.from_form(ctx, form)


def _default_monomial_basis(k: int, dim: int):
    out = []
    for total in range(dim + 1):
        for mono in itertools.product(range(dim + 1), repeat=k):
            if sum(mono) == total:
                out.append(mono)
    return out


# ---------------------------------------------------------------------------
# relation symbols


@dataclass(frozen=True)
class PPoly:
    """Tiny exact polynomial in the quantum variables p_1..p_k."""

    k: int
    terms: tuple  # ((exponents, Fraction), ...) sorted

    @staticmethod
    def from_dict(k: int, d: dict) -> "PPoly":
        items = tuple(sorted((e, c) for e, c in d.items() if c != 0))
        return PPoly(k=k, terms=items)

    @staticmethod
    def linear(k: int, coeffs) -> "PPoly":
        d = {}
        for i, c in enumerate(coeffs):
            if c:
                e = tuple(1 if s == i else 0 for s in range(k))
                d[e] = Fraction(c)
        return PPoly.from_dict(k, d)

    def __mul__(self, other: "PPoly") -> "PPoly":
        out: dict = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return PPoly.from_dict(self.k, out)

    def __pow__(self, n: int) -> "PPoly":
        out = PPoly.from_dict(self.k, {(0,) * self.k: Fraction(1)})
        for _ in range(n):
            out = out * self
        return out

    def pretty(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for e, c in sorted(self.terms, key=lambda t: (sum(t[0]), t[0]), reverse=True):
            mono = " ".join(
                f"p{i + 1}" + (f"^{x}" if x > 1 else "")
                for i, x in enumerate(e) if x
            )
            if not mono:
                bits.append((c, "1"))
            else:
                bits.append((c, mono))
        out = ""
        for c, mono in bits:
            sign = "-" if c < 0 else "+"
            mag = abs(c)
            coef = "" if (mag == 1 and mono != "1") else f"{mag}"
            body = mono if coef == "" else (coef if mono == "1" else f"{coef} {mono}")
            out += f" {sign} {body}"
        out = out.strip()
        return out[2:] if out.startswith("+ ") else "-" + out[2:]


@dataclass
class RelationSymbol:
    """u^(D+) = q^d u^(D-) v^L at weight zero, expanded in the p basis."""

    degree: tuple
    lhs: PPoly
    rhs: PPoly
    lhs_text: str
    rhs_text: str

    def pretty(self) -> str:
        return f"{self.lhs_text} = {self.rhs_text}"


def _divisor_pform(inp, j) -> PPoly:
    return PPoly.linear(inp.k, [inp.M[i][j] for i in range(inp.k)])


def _bundle_pform(inp, a) -> PPoly:
    return PPoly.linear(inp.k, [inp.L[i][a] for i in range(inp.k)])


def _factor_text(poly: PPoly, exp: int) -> str:
    body = poly.pretty()
    if len(poly.terms) > 1 or body.startswith("-"):
        body = f"({body})"
    return body + (f"^{exp}" if exp > 1 else "")


def quantum_relations(model: ToricModel, degrees) -> list[RelationSymbol]:
    """One relation symbol per degree: positive pairings on the left,
    the q-monomial with negative pairings and bundle factors on the right.
    """
    inp = model.inp
    out = []
    for d in degrees:
        if not model.lattice.contains(d):
            raise MirrorError(f"degree {tuple(d)} is not an effective class")
        D, La = inp.degree_pairings(d)
        if any(x < 0 for x in La):
            raise MirrorError(f"bundle pairing negative at {tuple(d)}")
        lhs = PPoly.from_dict(inp.k, {(0,) * inp.k: Fraction(1)})
        lhs_factors: list[tuple[PPoly, int]] = []
        rhs = PPoly.from_dict(inp.k, {(0,) * inp.k: Fraction(1)})
        rhs_factors: list[tuple[PPoly, int]] = []
        for j in range(inp.N):
            if D[j] > 0:
                f = _divisor_pform(inp, j)
                lhs = lhs * f**D[j]
                _merge_factor(lhs_factors, f, D[j])
            elif D[j] < 0:
                f = _divisor_pform(inp, j)
                rhs = rhs * f ** (-D[j])
                _merge_factor(rhs_factors, f, -D[j])
        for a in range(inp.l):
            if La[a] > 0:
                f = _bundle_pform(inp, a)
                rhs = rhs * f ** La[a]
                _merge_factor(rhs_factors, f, La[a])
        qmono = "q" if inp.k == 1 and d[0] == 1 else _q_text(d)
        lhs_text = " ".join(_factor_text(f, e) for f, e in lhs_factors) or "1"
        rhs_body = " ".join(_factor_text(f, e) for f, e in rhs_factors)
        rhs_text = f"{qmono} {rhs_body}".strip() if rhs_body else qmono
        out.append(
            RelationSymbol(degree=tuple(d), lhs=lhs, rhs=rhs,
                           lhs_text=lhs_text, rhs_text=rhs_text)
        )
    return out


def _merge_factor(factors: list, f: PPoly, e: int):
    for i, (g, eg) in enumerate(factors):
        if g == f:
            factors[i] = (g, eg + e)
            return
    factors.append((f, e))


def _q_text(d) -> str:
    bits = []
    for i, di in enumerate(d):
        if di == 0:
            continue
        bits.append(f"q{i + 1}" + (f"^{di}" if di != 1 else ""))
    return " ".join(bits) if bits else "1"


@dataclass
class ClassicalRelation:
    indices: tuple
    poly: PPoly

    def pretty(self) -> str:
        mono = " ".join(f"u{j + 1}" for j in self.indices)
        return f"{mono} = 0   [{self.poly.pretty()} = 0]"


def classical_relations(model: ToricModel) -> list[ClassicalRelation]:
    """Monomial relations from the minimal index sets with empty common
    divisor intersection, expanded in the p basis at weight zero.
    """
    from .toric import primitive_collections

    out = []
    for S in primitive_collections(model.inp, model.fps):
        poly = PPoly.from_dict(model.inp.k, {(0,) * model.inp.k: Fraction(1)})
        for j in S:
            poly = poly * _divisor_pform(model.inp, j)
        out.append(ClassicalRelation(indices=tuple(S), poly=poly))
    return out


def anticanonical_pform(model: ToricModel) -> PPoly:
    inp = model.inp
    total = [Fraction(0)] * inp.k
    for i in range(inp.k):
        total[i] = Fraction(sum(inp.M[i][j] for j in range(inp.N)))
    return PPoly.linear(inp.k, total)
