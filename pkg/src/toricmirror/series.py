"""Truncated series over the curve-degree semigroup.

A series holds finitely many coefficients indexed by integer degree vectors,
truncated against a fixed positive class tstar: every stored degree d has
<tstar, d> <= bound.  Coefficients are any payload supporting ring
arithmetic (Fraction, RationalFunction, LocalizedClass); scalar operations
(exp, log, inverse, substitution) additionally need a multiplicative unit,
supplied by the caller when it is not Fraction(1).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Callable, Iterable, Sequence

from .cones import dot


class SeriesError(ValueError):
    pass


@dataclass(frozen=True)
class Grading:
    tstar: tuple[Fraction, ...]

    @property
    def k(self) -> int:
        return len(self.tstar)

    def pair(self, d: Sequence[int]) -> Fraction:
        return dot(self.tstar, d)


def _is_zero_payload(c) -> bool:
    if isinstance(c, (int, Fraction)):
        return c == 0
    z = getattr(c, "is_zero", None)
    if z is not None:
        return bool(z)
    return False


class GradedQSeries:
    """Finitely supported coefficients d -> payload, truncated by <tstar, .>."""

    __slots__ = ("grading", "bound", "coeffs")

    def __init__(self, grading: Grading, bound, coeffs: dict | None = None):
        self.grading = grading
        self.bound = Fraction(bound)
        self.coeffs = {}
        if coeffs:
            for d, c in coeffs.items():
                d = tuple(int(x) for x in d)
                if self.grading.pair(d) > self.bound:
                    continue
                if not _is_zero_payload(c):
                    self.coeffs[d] = c

    # -- constructors --------------------------------------------------------

    @staticmethod
    def constant(grading: Grading, bound, c=Fraction(1)) -> "GradedQSeries":
        return GradedQSeries(grading, bound, {(0,) * grading.k: c})

    @staticmethod
    def monomial(grading: Grading, bound, d, c=Fraction(1)) -> "GradedQSeries":
        return GradedQSeries(grading, bound, {tuple(d): c})

    def copy(self) -> "GradedQSeries":
        return GradedQSeries(self.grading, self.bound, dict(self.coeffs))

    # -- basics ----------------------------------------------------------------

    @property
    def k(self) -> int:
        return self.grading.k

    @property
    def zero_degree(self) -> tuple[int, ...]:
        return (0,) * self.k

    def get(self, d, default=Fraction(0)):
        return self.coeffs.get(tuple(d), default)

    def constant_term(self):
        return self.coeffs.get(self.zero_degree, Fraction(0))

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def support(self) -> list[tuple[int, ...]]:
        return sorted(self.coeffs, key=lambda d: (self.grading.pair(d), d))

    def _check_compat(self, other: "GradedQSeries") -> Fraction:
        if self.grading.tstar != other.grading.tstar:
            raise SeriesError("series graded against different truncation classes")
        return min(self.bound, other.bound)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GradedQSeries):
            return NotImplemented
        keys = set(self.coeffs) | set(other.coeffs)
        zero = Fraction(0)
        for d in keys:
            a = self.coeffs.get(d, zero)
            b = other.coeffs.get(d, zero)
            if isinstance(a, (int, Fraction)) and not isinstance(b, (int, Fraction)):
                a, b = b, a
            if not (a == b):
                return False
        return True

    def __hash__(self):
        raise TypeError("GradedQSeries is not hashable")

    # -- linear structure -------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, GradedQSeries):
            bound = self._check_compat(other)
            out: dict = {}
            for d in set(self.coeffs) | set(other.coeffs):
                if self.grading.pair(d) > bound:
                    continue
                a = self.coeffs.get(d)
                b = other.coeffs.get(d)
                out[d] = b if a is None else (a if b is None else a + b)
            return GradedQSeries(self.grading, bound, out)
        # scalar: add at degree zero
        out = dict(self.coeffs)
        z = self.zero_degree
        out[z] = out.get(z, Fraction(0)) + other
        return GradedQSeries(self.grading, self.bound, out)

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda c: -c)

    def __sub__(self, other):
        if isinstance(other, GradedQSeries):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "GradedQSeries":
        return self.map(lambda x: x * c)

    def map(self, fn: Callable) -> "GradedQSeries":
        return GradedQSeries(
            self.grading, self.bound, {d: fn(c) for d, c in self.coeffs.items()}
        )

    # -- multiplication ----------------------------------------------------------

    def __mul__(self, other):
        if not isinstance(other, GradedQSeries):
            return self.scale(other)
        bound = self._check_compat(other)
        out: dict = {}
        for d1, c1 in self.coeffs.items():
            g1 = self.grading.pair(d1)
            if g1 > bound:
                continue
            for d2, c2 in other.coeffs.items():
                if g1 + self.grading.pair(d2) > bound:
                    continue
                d = tuple(a + b for a, b in zip(d1, d2))
                prod = c1 * c2
                if d in out:
                    out[d] = out[d] + prod
                else:
                    out[d] = prod
        return GradedQSeries(self.grading, bound, out)

    def __rmul__(self, other):
        return self.scale(other)

    # -- scalar series calculus ---------------------------------------------------

    def _assert_positive_support(self):
        z = self.zero_degree
        for d in self.coeffs:
            if d == z:
                raise SeriesError("series must have zero constant term")
            if self.grading.pair(d) <= 0:
                raise SeriesError("support must pair positively with the truncation class")

    def exp(self, one=Fraction(1)) -> "GradedQSeries":
        """Formal exponential; requires zero constant term."""
        self._assert_positive_support()
        result = GradedQSeries.constant(self.grading, self.bound, one)
        term = self
        n = 1
        while not term.is_zero:
            result = result + term.scale(Fraction(1, factorial(n)))
            n += 1
            nxt = term * self
            term = nxt
        return result

    def log(self) -> "GradedQSeries":
        """Formal logarithm; requires constant term 1."""
        c0 = self.constant_term()
        if not (c0 == 1):
            raise SeriesError("log needs constant term 1")
        x = self - Fraction(1)
        x = GradedQSeries(
            x.grading, x.bound,
            {d: c for d, c in x.coeffs.items() if d != self.zero_degree},
        )
        x._assert_positive_support()
        result = GradedQSeries(self.grading, self.bound, {})
        term = x
        n = 1
        while not term.is_zero:
            result = result + term.scale(Fraction((-1) ** (n + 1), n))
            n += 1
            term = term * x
        return result

    def inverse(self, universe: Iterable[Sequence[int]], one=Fraction(1)) -> "GradedQSeries":
        """Multiplicative inverse along a supplied ambient degree list."""
        c0 = self.constant_term()
        if _is_zero_payload(c0):
            raise SeriesError("cannot invert: constant term vanishes")
        inv0 = one / c0 if not isinstance(c0, (int, Fraction)) else Fraction(1) / c0 * one
        degrees = sorted(
            {tuple(int(x) for x in d) for d in universe},
            key=lambda d: (self.grading.pair(d), d),
        )
        out = {self.zero_degree: inv0}
        for d in degrees:
            if d == self.zero_degree or self.grading.pair(d) > self.bound:
                continue
            acc = None
            for e, ce in self.coeffs.items():
                if e == self.zero_degree:
                    continue
                rest = tuple(a - b for a, b in zip(d, e))
                prev = out.get(rest)
                if prev is None:
                    continue
                term = ce * prev
                acc = term if acc is None else acc + term
            if acc is not None:
                out[d] = -(inv0 * acc)
        result = GradedQSeries(self.grading, self.bound, out)
        return result

    def divide(self, other: "GradedQSeries", universe, one=Fraction(1)) -> "GradedQSeries":
        return self * other.inverse(universe, one=one)

    # -- substitution ----------------------------------------------------------------

    def substitute_exponential(self, shifts: Sequence["GradedQSeries"],
                               one=Fraction(1)) -> "GradedQSeries":
        """q^d -> q^d * exp(sum_i d_i * shift_i(q)), truncated.

        Every shift must be a scalar series with zero constant term.
        """
        if len(shifts) != self.k:
            raise SeriesError("need one exponent series per variable")
        for s in shifts:
            if not _is_zero_payload(s.constant_term()):
                raise SeriesError("non-triangular substitution: nonzero constant term")
        out = GradedQSeries(self.grading, self.bound, {})
        for d, c in self.coeffs.items():
            arg = GradedQSeries(self.grading, self.bound, {})
            for di, s in zip(d, shifts):
                if di:
                    arg = arg + s.scale(Fraction(di))
            factor = arg.exp(one=one) if not arg.is_zero else GradedQSeries.constant(
                self.grading, self.bound, one
            )
            shifted = {}
            for e, ce in factor.coeffs.items():
                nd = tuple(a + b for a, b in zip(d, e))
                if self.grading.pair(nd) <= self.bound:
                    shifted[nd] = c * ce
            out = out + GradedQSeries(self.grading, self.bound, shifted)
        return out

    def __repr__(self):
        bits = []
        for d in self.support():
            bits.append(f"q^{d}: {self.coeffs[d]!r}")
        return f"GradedQSeries(bound={self.bound}, {{{'; '.join(bits)}}})"


def invert_exponential_change(
    shifts: Sequence[GradedQSeries], universe, one=Fraction(1)
) -> list[GradedQSeries]:
    """Solve for psi with Q_i = q_i exp(psi_i(q)) inverting q_i = Q_i exp(shift_i(Q)).

    Fixed-point iteration psi <- -shift(q exp(psi)); one grading level
    stabilizes per pass, so the loop is bounded and the fixed point is
    asserted at the end.
    """
    if not shifts:
        return []
    grading = shifts[0].grading
    bound = min(s.bound for s in shifts)
    psi = [GradedQSeries(grading, bound, {}) for _ in shifts]
    levels = {grading.pair(d) for s in shifts for d in s.coeffs}
    steps = len({l for l in levels if l > 0})
    max_iter = max(2, 2 * steps + 2, int(bound / min(levels)) + 2 if levels else 2)
    for _ in range(max_iter):
        new = [(-s).substitute_exponential(psi, one=one) for s in shifts]
        if all(a == b for a, b in zip(new, psi)):
            return psi
        psi = new
    # final stability check
    new = [(-s).substitute_exponential(psi, one=one) for s in shifts]
    if not all(a == b for a, b in zip(new, psi)):
        raise SeriesError("exponential change of variables did not stabilize")
    return psi


def qseries_combine(a: GradedQSeries, b: GradedQSeries, op: str) -> GradedQSeries:
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise SeriesError(f"unknown combine op {op!r}")


def qseries_exp_log(a: GradedQSeries, op: str, one=Fraction(1)) -> GradedQSeries:
    if op == "exp":
        return a.exp(one=one)
    if op == "log":
        return a.log()
    raise SeriesError(f"unknown exp/log op {op!r}")


def expand_hz_exponential(d: Sequence[int], zcap: int) -> dict[tuple[int, ...], Fraction]:
    """Coefficients of exp(h <z, d>) as {z-monomial: rational * h^|m|}.

    The h power always equals |m|, so only the rational d^m / m! is returned.
    """
    k = len(d)
    out: dict[tuple[int, ...], Fraction] = {}

    def rec(i, mono, total):
        if i == k:
            c = Fraction(1)
            for di, mi in zip(d, mono):
                c *= Fraction(di) ** mi / factorial(mi)
            out[tuple(mono)] = c
            return
        for mi in range(zcap - total + 1):
            rec(i + 1, mono + [mi], total + mi)

    rec(0, [], 0)
    return out
