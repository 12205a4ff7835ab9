"""Fixed points, edges and the curve-degree semigroup of a toric quotient.

The input is the integer matrix of the subtorus embedding, a chamber point
for the moment-map level, and one integer column per line-bundle summand.
Everything downstream (weights at fixed points, edge degrees, the grading)
is derived here in exact arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .algebra import LinForm, SymbolContext
from . import cones
from .cones import ConeError, dot, mat_det, mat_inverse, mat_rank, primitive, solve_linear


class ToricError(ValueError):
    pass


def _as_fraction_vector(v) -> tuple[Fraction, ...]:
    out = []
    for x in v:
        if isinstance(x, str):
            out.append(Fraction(x))
        else:
            out.append(Fraction(x))
    return tuple(out)


@dataclass(frozen=True)
class ToricInput:
    """Defining data: quotient of C^N by a rank-k subtorus, plus a split bundle.

    M is k x N (integer), t a chamber point in R^k, L is k x l (integer);
    column a of L is the class of the a-th line bundle in the divisor basis.
    tstar is the positive class used to truncate degree enumerations
    (defaults to t).
    """

    k: int
    N: int
    l: int
    M: tuple[tuple[int, ...], ...]
    t: tuple[Fraction, ...]
    L: tuple[tuple[int, ...], ...] = ()
    tstar: tuple[Fraction, ...] = ()
    name: str = ""

    @staticmethod
    def make(M: Sequence[Sequence[int]], t: Sequence, L: Sequence[Sequence[int]] = (),
             tstar: Sequence | None = None, name: str = "") -> "ToricInput":
        M = tuple(tuple(int(x) for x in row) for row in M)
        k = len(M)
        if k == 0 or len({len(r) for r in M}) != 1:
            raise ToricError("M must be a nonempty rectangular integer matrix")
        N = len(M[0])
        L = tuple(tuple(int(x) for x in row) for row in L) if L else ()
        if L:
            if len(L) != k or len({len(r) for r in L}) != 1:
                raise ToricError("L must have one row per torus factor")
            l = len(L[0])
        else:
            l = 0
        t = _as_fraction_vector(t)
        if len(t) != k:
            raise ToricError("chamber point has wrong length")
        ts = _as_fraction_vector(tstar) if tstar is not None else t
        if len(ts) != k:
            raise ToricError("truncation class has wrong length")
        if mat_rank(M) != k:
            raise ToricError("M must have full rank k")
        return ToricInput(k=k, N=N, l=l, M=M, t=t, L=L, tstar=ts, name=name)

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(self.M[i][j] for i in range(self.k))

    def bundle_column(self, a: int) -> tuple[int, ...]:
        return tuple(self.L[i][a] for i in range(self.k))

    def degree_pairings(self, d: Sequence[int]) -> tuple[list[int], list[int]]:
        """(D_j(d) for all j, L_a(d) for all a)."""
        D = [sum(d[i] * self.M[i][j] for i in range(self.k)) for j in range(self.N)]
        La = [sum(d[i] * self.L[i][a] for i in range(self.k)) for a in range(self.l)]
        return D, La

    @property
    def grading_weights(self) -> tuple[int, ...]:
        """deg q_i = sum_j m_ij - sum_a l_ia (first Chern class pairing)."""
        return tuple(
            sum(self.M[i][j] for j in range(self.N))
            - sum(self.L[i][a] for a in range(self.l))
            for i in range(self.k)
        )


@dataclass(frozen=True)
class FixedPoint:
    """A torus-fixed point: a k-subset of coordinate indices with its weights."""

    alpha: tuple[int, ...]            # 0-based, increasing
    p_forms: tuple[LinForm, ...]      # length k
    u_forms: tuple[LinForm, ...]      # length N; zero exactly on alpha
    v_forms: tuple[LinForm, ...]      # length l
    det_sign: int
    minv: tuple[tuple[Fraction, ...], ...]  # inverse of the alpha column block

    def __repr__(self):
        return f"FixedPoint({{{','.join(str(j + 1) for j in self.alpha)}}})"

    @property
    def label(self) -> str:
        return "{" + ",".join(str(j + 1) for j in self.alpha) + "}"


@dataclass(frozen=True)
class Edge:
    """A one-dimensional orbit joining two fixed points."""

    source: FixedPoint
    j: int                      # index entering (not in source.alpha)
    target: FixedPoint
    jprime: int                 # index leaving (in source.alpha)
    degree: tuple[int, ...]
    Dvals: tuple[int, ...]      # D_s(degree) for all s
    Lvals: tuple[int, ...]      # L_a(degree) for all a

    def __repr__(self):
        return f"Edge({self.source.label} --{self.j + 1}--> {self.target.label}, d={self.degree})"


def enumerate_fixed_points(inp: ToricInput, nlam: int | None = None) -> list[FixedPoint]:
    """All k-subsets alpha with invertible column block and positive solution.

    Raises if the chamber point sits on a wall (a zero coordinate in some
    admissible solution) or if the moment polytope is empty.
    """
    nlam = nlam if nlam is not None else inp.N + inp.l
    fps = []
    walls = []
    for alpha in itertools.combinations(range(inp.N), inp.k):
        block = [[inp.M[i][j] for j in alpha] for i in range(inp.k)]
        det = mat_det(block)
        if det == 0:
            continue
        inv = mat_inverse(block)
        sol = [dot(row, inp.t) for row in inv]
        if any(x == 0 for x in sol):
            walls.append(alpha)
            continue
        if any(x < 0 for x in sol):
            continue
        # p solves sum_i p_i m_{i j_s} = l_{j_s}: p_i = sum_s inv[s][i] * l_{j_s}
        p_forms = []
        for i in range(inp.k):
            form = LinForm.zero(nlam)
            for s, j in enumerate(alpha):
                form = form + LinForm.weight(nlam, j).scale(inv[s][i])
            p_forms.append(form)
        u_forms = []
        for j in range(inp.N):
            form = LinForm.weight(nlam, j).scale(-1)
            for i in range(inp.k):
                form = form + p_forms[i].scale(inp.M[i][j])
            u_forms.append(form)
        for j in alpha:
            assert u_forms[j].is_zero, "weight of a defining divisor must vanish"
        v_forms = []
        for a in range(inp.l):
            form = LinForm.weight(nlam, inp.N + a).scale(-1)
            for i in range(inp.k):
                form = form + p_forms[i].scale(inp.L[i][a])
            v_forms.append(form)
        fps.append(
            FixedPoint(
                alpha=alpha,
                p_forms=tuple(p_forms),
                u_forms=tuple(u_forms),
                v_forms=tuple(v_forms),
                det_sign=1 if det > 0 else -1,
                minv=tuple(tuple(r) for r in inv),
            )
        )
    if walls:
        labels = ", ".join("{" + ",".join(str(j + 1) for j in a) + "}" for a in walls)
        raise ToricError(f"chamber point on a wall of the cones {labels}")
    if not fps:
        raise ToricError("empty momentum polyhedron: no admissible vertex")
    return fps


@dataclass(frozen=True)
class SmoothnessReport:
    ok: bool
    violations: tuple[tuple[tuple[int, ...], int], ...] = ()

    def __bool__(self):
        return self.ok


def verify_smooth(inp: ToricInput, fps: Sequence[FixedPoint]) -> SmoothnessReport:
    """Unimodularity of every vertex chart (|det| = 1)."""
    bad = []
    for fp in fps:
        block = [[inp.M[i][j] for j in fp.alpha] for i in range(inp.k)]
        det = mat_det(block)
        if abs(det) != 1:
            bad.append((fp.alpha, int(det)))
    return SmoothnessReport(ok=not bad, violations=tuple(bad))


def build_edges(inp: ToricInput, fps: Sequence[FixedPoint]) -> list[Edge]:
    """One directed edge per (fixed point, outgoing index).

    The degree d solves D_s(d) = 0 on the retained indices and D_j(d) = 1;
    the unique admissible leaving index is certified by the partner vertex
    being a fixed point and D_(leaving) = 1.  All weight identities along the
    edge are asserted exactly.
    """
    by_alpha = {fp.alpha: fp for fp in fps}
    edges = []
    for fp in fps:
        for j in range(inp.N):
            if j in fp.alpha:
                continue
            found = None
            for jprime in fp.alpha:
                kept = [s for s in fp.alpha if s != jprime]
                rows = [[inp.M[i][s] for i in range(inp.k)] for s in kept]
                rows.append([inp.M[i][j] for i in range(inp.k)])
                rhs = [0] * (inp.k - 1) + [1]
                sol = solve_linear(rows, rhs)
                if sol is None:
                    continue
                if any(x.denominator != 1 for x in sol):
                    continue
                d = tuple(int(x) for x in sol)
                D, La = inp.degree_pairings(d)
                if D[jprime] != 1:
                    continue
                beta = tuple(sorted(kept + [j]))
                partner = by_alpha.get(beta)
                if partner is None:
                    continue
                if found is not None:
                    raise ToricError(
                        f"ambiguous edge from {fp.label} along {j + 1}: "
                        "non-simplicial structure"
                    )
                found = Edge(
                    source=fp, j=j, target=partner, jprime=jprime,
                    degree=d, Dvals=tuple(D), Lvals=tuple(La),
                )
            if found is None:
                raise ToricError(
                    f"no admissible partner for {fp.label} along index {j + 1}: "
                    "non-simplicial or non-compact edge structure"
                )
            _assert_edge_identities(found)
            edges.append(found)
    return edges


def _assert_edge_identities(e: Edge) -> None:
    a, b = e.source, e.target
    uj = a.u_forms[e.j]
    for s in set(a.alpha) & set(b.alpha):
        if e.Dvals[s] != 0:
            raise ToricError(f"edge invariant D_s = 0 fails at s={s + 1} on {e}")
    if e.Dvals[e.j] != 1 or e.Dvals[e.jprime] != 1:
        raise ToricError(f"edge invariant D_j = D_j' = 1 fails on {e}")
    if not (a.u_forms[e.j] + b.u_forms[e.jprime]).is_zero:
        raise ToricError(f"edge invariant u_j(a) = -u_j'(b) fails on {e}")
    for s in range(len(a.u_forms)):
        if not (a.u_forms[s] - b.u_forms[s] - uj.scale(e.Dvals[s])).is_zero:
            raise ToricError(f"edge weight identity fails at s={s + 1} on {e}")
    for idx in range(len(a.v_forms)):
        if not (a.v_forms[idx] - b.v_forms[idx] - uj.scale(e.Lvals[idx])).is_zero:
            raise ToricError(f"edge bundle-weight identity fails at a={idx + 1} on {e}")


@dataclass(frozen=True)
class DegreeLattice:
    """The semigroup of curve degrees with its grading and truncation data."""

    k: int
    tstar: tuple[Fraction, ...]
    grading_weights: tuple[int, ...]
    edge_classes: tuple[tuple[int, ...], ...]
    kahler_rays: tuple[tuple[Fraction, ...], ...]   # extreme rays of the closed chamber
    mori_rays: tuple[tuple[Fraction, ...], ...]     # extreme rays of the degree cone
    inequalities: tuple[tuple[Fraction, ...], ...]  # d in cone iff each row . d >= 0

    def contains(self, d: Sequence[int]) -> bool:
        return all(dot(row, d) >= 0 for row in self.inequalities)

    def pair_tstar(self, d: Sequence[int]) -> Fraction:
        return dot(self.tstar, d)

    def degree_of_q(self, d: Sequence[int]) -> int:
        if not self.contains(d):
            raise ToricError(f"degree {tuple(d)} is not an effective curve class")
        return int(dot(self.grading_weights, d))

    def enumerate(self, bound) -> list[tuple[int, ...]]:
        pts = cones.lattice_points_under(self.inequalities, self.mori_rays, self.tstar, bound)
        # certify generation by edge classes (dual test against the edge cone)
        edge_ineqs = cones.dual_rays(self.edge_classes, self.k)
        for d in pts:
            if any(dot(row, d) < 0 for row in edge_ineqs):
                raise ToricError(
                    f"degree {d} is not a nonnegative combination of edge classes"
                )
        return pts


def build_lattice(inp: ToricInput, fps: Sequence[FixedPoint],
                  edges: Sequence[Edge]) -> DegreeLattice:
    rows = []
    for fp in fps:
        rows.extend(fp.minv)
    kahler_rays = cones.cone_rays(rows, inp.k)
    if not kahler_rays or mat_rank(kahler_rays) != inp.k:
        raise ToricError("chamber closure is not a full-dimensional pointed cone")
    # effective degrees pair >= 0 against the chamber closure
    ineqs = tuple(tuple(r) for r in kahler_rays)
    mori_rays = cones.cone_rays(ineqs, inp.k) if inp.k > 1 else cones.cone_rays(ineqs, 1)
    edge_classes = sorted({e.degree for e in edges})
    lattice = DegreeLattice(
        k=inp.k,
        tstar=inp.tstar,
        grading_weights=inp.grading_weights,
        edge_classes=tuple(edge_classes),
        kahler_rays=tuple(tuple(r) for r in kahler_rays),
        mori_rays=tuple(tuple(r) for r in mori_rays),
        inequalities=ineqs,
    )
    for d in edge_classes:
        if not lattice.contains(d):
            raise ToricError(f"edge class {d} escapes the degree cone")
        if lattice.pair_tstar(d) <= 0:
            raise ToricError("truncation class not ample: nonpositive on an edge class")
    for ray in mori_rays:
        if dot(inp.tstar, ray) <= 0:
            raise ToricError("truncation class not ample: nonpositive on a ray")
    # bundle classes must sit in the closed chamber and be nonzero
    for a in range(inp.l):
        col = inp.bundle_column(a)
        if all(x == 0 for x in col):
            raise ToricError(f"bundle summand {a + 1} has zero class")
        if any(dot(col, ray) < 0 for ray in mori_rays):
            raise ToricError(f"bundle summand {a + 1} is not non-negative")
    return lattice


def anticanonical_nonnegative(lattice: DegreeLattice) -> bool:
    """Whether deg q^d >= 0 on the whole degree cone."""
    return all(dot(lattice.grading_weights, ray) >= 0 for ray in lattice.mori_rays)


def anticanonical_positive(lattice: DegreeLattice) -> bool:
    return all(dot(lattice.grading_weights, ray) > 0 for ray in lattice.mori_rays)


def primitive_collections(inp: ToricInput, fps: Sequence[FixedPoint]) -> list[tuple[int, ...]]:
    """Minimal index sets whose divisors have empty common intersection.

    A set S meets every vertex chart complement; these give the classical
    monomial relations u_{j1}...u_{jr} = 0.
    """
    alphas = [set(fp.alpha) for fp in fps]
    minimal: list[set] = []
    for size in range(1, inp.N + 1):
        for S in itertools.combinations(range(inp.N), size):
            sS = set(S)
            if any(m <= sS for m in minimal):
                continue
            if all(sS & a for a in alphas):
                minimal.append(sS)
    return sorted(tuple(sorted(s)) for s in minimal)


# ---------------------------------------------------------------------------
# bundled model


@dataclass
class ToricModel:
    """Derived data for one input, tied to a scalar context."""

    inp: ToricInput
    ctx: SymbolContext
    fps: list[FixedPoint]
    edges: list[Edge]
    lattice: DegreeLattice
    smooth: SmoothnessReport
    edges_by_source: dict = field(default_factory=dict)

    @staticmethod
    def build(inp: ToricInput, mode: str = "symbolic",
              seed: int | None = None) -> "ToricModel":
        fps = enumerate_fixed_points(inp)
        smooth = verify_smooth(inp, fps)
        if not smooth.ok:
            raise ToricError(
                "input is not smooth: determinant violations at "
                + ", ".join(f"{a} (det {d})" for a, d in smooth.violations)
            )
        edges = build_edges(inp, fps)
        lattice = build_lattice(inp, fps, edges)
        if mode == "symbolic":
            ctx = SymbolContext(inp.N, inp.l)
        else:
            values = _generic_weight_values(inp, fps, seed if seed is not None else 1)
            ctx = SymbolContext(inp.N, inp.l, mode=mode, values=values)
        model = ToricModel(inp=inp, ctx=ctx, fps=fps, edges=edges,
                           lattice=lattice, smooth=smooth)
        model.edges_by_source = {
            (e.source.alpha, e.j): e for e in edges
        }
        return model

    def fixed_point(self, alpha: Sequence[int]) -> FixedPoint:
        key = tuple(sorted(alpha))
        for fp in self.fps:
            if fp.alpha == key:
                return fp
        raise KeyError(f"no fixed point {key}")

    def edge(self, alpha: Sequence[int], j: int) -> Edge:
        return self.edges_by_source[(tuple(sorted(alpha)), j)]

    def degrees(self, bound) -> list[tuple[int, ...]]:
        return self.lattice.enumerate(bound)


def _generic_weight_values(inp: ToricInput, fps: Sequence[FixedPoint],
                           seed: int) -> list[Fraction]:
    """Random rational weights at which no fixed-point weight or pole
    difference collapses.

    Deterministic in the seed; draws are retried (bounded) until all
    genericity constraints hold.
    """
    import random

    nlam = inp.N + inp.l
    rng = random.Random(seed * 1_000_003 + 17)
    for _ in range(64):
        values = [Fraction(rng.randint(-10_000, 10_000), rng.randint(1, 40)) for _ in range(nlam)]
        if _values_are_generic(inp, fps, values):
            return values
    raise ToricError("failed to find generic specialized weights")


def _values_are_generic(inp, fps, values) -> bool:
    def val(form: LinForm) -> Fraction:
        return sum((c * v for c, v in zip(form.coeffs, values)), Fraction(0))

    for fp in fps:
        nonzero = [val(fp.u_forms[j]) for j in range(inp.N) if j not in fp.alpha]
        nonzero += [val(v) for v in fp.v_forms]
        if any(x == 0 for x in nonzero):
            return False
        # pole locations -u_j/n must stay distinct for n up to a safe range
        ratios = set()
        for j in range(inp.N):
            if j in fp.alpha:
                continue
            w = val(fp.u_forms[j])
            for n in range(1, 13):
                r = w / n
                if r in ratios:
                    return False
                ratios.add(r)
    return True
