"""Classes by their fixed-point values; residue-sum integration with
polynomiality certificates.

A cohomology class is stored as one rational function per fixed point.
Integration is the signed sum of residues over the vertices; for classes
generated by the divisor symbols the sum must clear to a polynomial in the
weights, and that cleared polynomial is the certificate that makes the
weight -> 0 specialization legitimate.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .algebra import (
    AlgebraError,
    FactoredValue,
    LinForm,
    RationalFunction,
    SymbolContext,
    poly_to_fraction,
)
from .toric import FixedPoint, ToricModel


class CohomologyError(ValueError):
    pass


class LocalizedClass:
    """values: one scalar (RationalFunction / Fraction) per fixed point."""

    __slots__ = ("values",)

    def __init__(self, values: dict):
        self.values = values

    @staticmethod
    def constant(fps: Sequence[FixedPoint], c) -> "LocalizedClass":
        return LocalizedClass({fp.alpha: c for fp in fps})

    def value(self, fp: FixedPoint):
        return self.values[fp.alpha]

    def _zip(self, other, op):
        if isinstance(other, LocalizedClass):
            if set(self.values) != set(other.values):
                raise CohomologyError("classes live on different fixed-point sets")
            return LocalizedClass(
                {a: op(v, other.values[a]) for a, v in self.values.items()}
            )
        return LocalizedClass({a: op(v, other) for a, v in self.values.items()})

    def __add__(self, other):
        return self._zip(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._zip(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return self._zip(other, lambda x, y: y - x)

    def __mul__(self, other):
        return self._zip(other, lambda x, y: x * y)

    __rmul__ = __mul__

    def __neg__(self):
        return LocalizedClass({a: -v for a, v in self.values.items()})

    def __pow__(self, n: int):
        return LocalizedClass({a: v**n for a, v in self.values.items()})

    def __eq__(self, other):
        if not isinstance(other, LocalizedClass):
            return NotImplemented
        return set(self.values) == set(other.values) and all(
            self.values[a] == other.values[a] for a in self.values
        )

    def __hash__(self):
        raise TypeError("LocalizedClass is not hashable")

    def map(self, fn: Callable) -> "LocalizedClass":
        return LocalizedClass({a: fn(v) for a, v in self.values.items()})


# ---------------------------------------------------------------------------
# symbol evaluation


def class_from_symbol(model: ToricModel, symbol) -> LocalizedClass:
    """Evaluate a polynomial in the generators p_i, u_j, v_a at each vertex.

    ``symbol`` is an atom ("p", i) / ("u", j) / ("v", a) with 1-based index,
    or a dict mapping monomials (tuples of atoms) to rational coefficients.
    """
    if isinstance(symbol, tuple) and len(symbol) == 2 and isinstance(symbol[0], str):
        symbol = {(symbol,): Fraction(1)}
    if not isinstance(symbol, dict):
        raise CohomologyError("symbol must be an atom or a monomial dict")
    ctx = model.ctx
    values = {}
    for fp in model.fps:
        total = RationalFunction.const(ctx, 0)
        for mono, coef in symbol.items():
            term = RationalFunction.const(ctx, Fraction(coef))
            for atom in mono:
                kind, idx = atom
                form = _atom_form(model, fp, kind, idx)
                term = term * RationalFunction.from_form(ctx, form)
            total = total + term
        values[fp.alpha] = total
    return LocalizedClass(values)


def _atom_form(model: ToricModel, fp: FixedPoint, kind: str, idx: int) -> LinForm:
    i = idx - 1
    try:
        if kind == "p":
            return fp.p_forms[i]
        if kind == "u":
            return fp.u_forms[i]
        if kind == "v":
            return fp.v_forms[i]
    except IndexError:
        raise CohomologyError(f"symbol index out of range: {kind}{idx}") from None
    raise CohomologyError(f"unknown symbol kind {kind!r}")


def p_class(model: ToricModel, i: int) -> LocalizedClass:
    return class_from_symbol(model, ("p", i))


def u_class(model: ToricModel, j: int) -> LocalizedClass:
    return class_from_symbol(model, ("u", j))


def v_class(model: ToricModel, a: int) -> LocalizedClass:
    return class_from_symbol(model, ("v", a))


# ---------------------------------------------------------------------------
# integration


@dataclass
class CertifiedValue:
    """A residue sum together with its cleared-polynomial certificate."""

    value: RationalFunction
    certificate: object | None  # ring polynomial when certified

    @property
    def certified(self) -> bool:
        return self.certificate is not None


def vertex_denominator(model: ToricModel, fp: FixedPoint) -> FactoredValue:
    """Product of the nonzero coordinate weights at a vertex."""
    out = FactoredValue.one()
    for j in range(model.inp.N):
        if j not in fp.alpha:
            out = out.times_form(fp.u_forms[j])
    return out


def euler_factor(model: ToricModel, fp: FixedPoint) -> FactoredValue:
    out = FactoredValue.one()
    for a in range(model.inp.l):
        out = out.times_form(fp.v_forms[a])
    return out


def integrate_X(model: ToricModel, f: LocalizedClass,
                certify: bool = True) -> CertifiedValue:
    """Signed residue sum over the vertices, certified polynomial if asked."""
    return _integrate(model, f, twist=False, certify=certify)


def integrate_virtual_Y(model: ToricModel, f: LocalizedClass,
                        certify: bool = True) -> CertifiedValue:
    """Same sum with the bundle Euler factor inserted at every vertex."""
    return _integrate(model, f, twist=True, certify=certify)


def _integrate(model: ToricModel, f: LocalizedClass, twist: bool,
               certify: bool) -> CertifiedValue:
    ctx = model.ctx
    total = RationalFunction.const(ctx, 0)
    for fp in model.fps:
        den = vertex_denominator(model, fp)
        term = RationalFunction.const(ctx, fp.det_sign)
        if twist:
            term = term * euler_factor(model, fp).to_rational(ctx)
        term = term * f.value(fp) / den.to_rational(ctx)
        total = total + term
    if not certify:
        return CertifiedValue(total, None)
    poly = total.as_polynomial()
    if poly is None:
        raise CohomologyError(
            "non-polynomial integral: residue sum does not clear its denominator"
        )
    return CertifiedValue(total, poly)


def pairing(model: ToricModel, a: LocalizedClass, b: LocalizedClass,
            virtual: bool = False, certify: bool = True) -> CertifiedValue:
    if virtual:
        return integrate_virtual_Y(model, a * b, certify=certify)
    return integrate_X(model, a * b, certify=certify)


def nonequivariant_limit(model: ToricModel, cv: CertifiedValue, hbar_too: bool = False):
    """Value of a certified integral at weight = 0.

    Returns a Fraction when h is gone (or ``hbar_too``), otherwise the
    polynomial in h.
    """
    if not cv.certified:
        raise CohomologyError("cannot specialize an uncertified residue sum")
    ctx = model.ctx
    p = ctx.eval_weights_zero(cv.certificate)
    if hbar_too and p:
        from sympy import QQ

        p = p.subs(ctx.hbar, QQ(0))
    if not p:
        return Fraction(0)
    if ctx.hbar_degree(p) <= 0:
        return poly_to_fraction(p)
    return p
