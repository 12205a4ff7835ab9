"""Exact rational polyhedral-cone utilities (small dimension, Fractions only).

All cones here are pointed and live in dimension <= 4 for realistic inputs,
so ray enumeration by active-subset search is entirely adequate.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence


class ConeError(ValueError):
    pass


Vec = tuple[Fraction, ...]


def dot(a: Sequence, b: Sequence) -> Fraction:
    return sum((Fraction(x) * Fraction(y) for x, y in zip(a, b)), Fraction(0))


def mat_det(rows: Sequence[Sequence]) -> Fraction:
    """Determinant by fraction-free-ish Gaussian elimination."""
    n = len(rows)
    m = [[Fraction(x) for x in r] for r in rows]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = 1 / m[col][col]
        for r in range(col + 1, n):
            if m[r][col] != 0:
                f = m[r][col] * inv
                for c in range(col, n):
                    m[r][c] -= f * m[col][c]
    return det


def mat_inverse(rows: Sequence[Sequence]) -> list[list[Fraction]]:
    n = len(rows)
    m = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)]
         for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ConeError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        inv = 1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return [r[n:] for r in m]


def mat_rank(rows: Sequence[Sequence]) -> int:
    if not rows:
        return 0
    m = [[Fraction(x) for x in r] for r in rows]
    nr, nc = len(m), len(m[0])
    rank = 0
    row = 0
    for col in range(nc):
        piv = next((r for r in range(row, nr) if m[r][col] != 0), None)
        if piv is None:
            continue
        m[row], m[piv] = m[piv], m[row]
        inv = 1 / m[row][col]
        for r in range(row + 1, nr):
            if m[r][col] != 0:
                f = m[r][col] * inv
                for c in range(col, nc):
                    m[r][c] -= f * m[row][c]
        rank += 1
        row += 1
        if row == nr:
            break
    return rank


def solve_linear(rows: Sequence[Sequence], rhs: Sequence) -> list[Fraction] | None:
    """Unique solution of a square system, or None if singular."""
    n = len(rows)
    if mat_det(rows) == 0:
        return None
    inv = mat_inverse(rows)
    return [dot(r, rhs) for r in inv]


def primitive(vec: Sequence) -> Vec:
    """Scale a nonzero rational vector to a primitive integer vector."""
    fr = [Fraction(x) for x in vec]
    if all(x == 0 for x in fr):
        raise ConeError("zero vector has no primitive representative")
    den = math.lcm(*(x.denominator for x in fr))
    ints = [int(x * den) for x in fr]
    g = math.gcd(*ints)
    return tuple(Fraction(i // g) for i in ints)


def _nullspace_vector(rows: list[Vec], dim: int) -> Vec | None:
    """A nonzero vector orthogonal to the given rank dim-1 rows."""
    if dim == 1:
        return (Fraction(1),)
    for cols in itertools.combinations(range(dim), dim - 1):
        sub = [[r[c] for c in cols] for r in rows]
        if mat_rank(sub) == dim - 1:
            # express the excluded coordinate as the free one
            free = next(c for c in range(dim) if c not in cols)
            rhs = [-r[free] for r in rows]
            # solve (dim-1)x(dim-1) from a row-independent subset
            idx = _independent_rows(sub, dim - 1)
            sq = [sub[i] for i in idx]
            b = [rhs[i] for i in idx]
            sol = solve_linear(sq, b)
            if sol is None:
                continue
            vec = [Fraction(0)] * dim
            vec[free] = Fraction(1)
            for c, v in zip(cols, sol):
                vec[c] = v
            return tuple(vec)
    return None


def _independent_rows(rows: list[list[Fraction]], need: int) -> list[int]:
    picked: list[int] = []
    for i in range(len(rows)):
        trial = picked + [i]
        if mat_rank([rows[j] for j in trial]) == len(trial):
            picked = trial
            if len(picked) == need:
                break
    return picked


def cone_rays(inequalities: Sequence[Sequence], dim: int) -> list[Vec]:
    """Extreme rays of the pointed cone {x : A x >= 0}.

    Requires the cone to be pointed (no line); raises otherwise.  Rows may be
    redundant or repeated.
    """
    rows = [primitive(r) for r in inequalities if any(Fraction(x) != 0 for x in r)]
    rows = sorted(set(rows))
    if not rows:
        raise ConeError("no inequalities: cone is all of space, not pointed")
    if dim == 1:
        signs = {r[0] > 0 for r in rows}
        if len(signs) == 2:
            return []  # only the origin
        return [(Fraction(1),)] if True in signs else [(Fraction(-1),)]
    rays: dict[Vec, Vec] = {}
    for subset in itertools.combinations(range(len(rows)), dim - 1):
        sub = [rows[i] for i in subset]
        if mat_rank(sub) != dim - 1:
            continue
        v = _nullspace_vector(sub, dim)
        if v is None:
            continue
        for cand in (v, tuple(-x for x in v)):
            vals = [dot(r, cand) for r in rows]
            if all(x >= 0 for x in vals):
                active = [rows[i] for i, x in enumerate(vals) if x == 0]
                if mat_rank(active) == dim - 1:
                    rays[primitive(cand)] = primitive(cand)
    return sorted(rays)


def dual_rays(rays: Sequence[Sequence], dim: int) -> list[Vec]:
    """Extreme rays of {y : <y, r> >= 0 for all r}."""
    return cone_rays(list(rays), dim)


def in_cone(point: Sequence, inequalities: Sequence[Sequence]) -> bool:
    return all(dot(r, point) >= 0 for r in inequalities)


def lattice_points_under(
    inequalities: Sequence[Sequence],
    rays: Sequence[Vec],
    tstar: Sequence[Fraction],
    bound,
    cap: int = 2_000_000,
) -> list[tuple[int, ...]]:
    """Integer points d with A d >= 0 and <tstar, d> <= bound.

    The truncated cone is the convex hull of 0 and bound/<tstar,r> * r over
    extreme rays r, which yields exact coordinate bounds for a box scan.
    """
    bound = Fraction(bound)
    dim = len(tstar)
    if bound < 0:
        return []
    vertices = [(Fraction(0),) * dim]
    for r in rays:
        pr = dot(tstar, r)
        if pr <= 0:
            raise ConeError("truncation class not ample: nonpositive on a ray")
        vertices.append(tuple(bound / pr * x for x in r))
    lo = [min(v[i] for v in vertices) for i in range(dim)]
    hi = [max(v[i] for v in vertices) for i in range(dim)]
    ranges = [range(math.ceil(a), math.floor(b) + 1) for a, b in zip(lo, hi)]
    size = 1
    for r in ranges:
        size *= max(len(r), 1)
    if size > cap:
        raise ConeError(f"degree box of size {size} exceeds enumeration cap")
    out = []
    for d in itertools.product(*ranges):
        if dot(tstar, d) <= bound and in_cone(d, inequalities):
            out.append(tuple(int(x) for x in d))
    out.sort(key=lambda d: (dot(tstar, d), d))
    return out
