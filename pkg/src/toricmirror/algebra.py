"""Exact scalar arithmetic shared by every other module.

All coefficients that appear downstream are rational functions of the torus
weights ``l1..lN`` (base torus), ``lp1..lpl`` (fiberwise torus) and the loop
parameter ``h``.  Three representations coexist:

* :class:`LinForm` -- an exact linear form ``sum c_j*l_j + c'_a*lp_a + c_h*h``
  with ``Fraction`` coefficients.  Fixed-point weights and every factor of a
  hypergeometric coefficient are of this shape.
* :class:`FactoredValue` -- a rational number times a product of linear forms
  with integer (possibly negative) exponents.  Linear forms are primes in the
  polynomial ring, so two factored values are equal as rational functions iff
  their canonical factor multisets agree; identities between products are
  decided without ever expanding a polynomial.
* :class:`RationalFunction` -- a lazy numerator/denominator pair of sparse
  multivariate polynomials (sympy ``PolyElement``), used whenever sums occur.
  Arithmetic does not cancel; ``reduce()`` produces the canonical form.

A :class:`SymbolContext` fixes the polynomial ring.  Besides the fully
symbolic ring it supports two exact specializations used to keep large
identity checks affordable: fixed random rational values for the weights
(``specialized``), and weights restricted to a single rational ray
``l_j = c_j * e`` (``ray``), which keeps the lambda -> 0 limit observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from sympy import QQ
from sympy.polys.rings import ring as _ring


class AlgebraError(ValueError):
    """Raised on contract violations in the scalar layer."""


class PoleAtInfinityError(AlgebraError):
    """1/h expansion requested for a function with a pole at h = infinity."""

    def __init__(self, order: int):
        super().__init__(f"pole of order {order} at h = infinity")
        self.order = order


def _fr(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise AlgebraError(f"expected rational, got {x!r}")


# ---------------------------------------------------------------------------
# linear forms


class LinForm:
    """Linear form in the weights and h, with exact rational coefficients.

    ``coeffs`` runs over the base weights first, then the bundle weights;
    ``hcoef`` multiplies h.  Instances are immutable and hashable.
    """

    __slots__ = ("coeffs", "hcoef", "_key")

    def __init__(self, coeffs: Sequence[Fraction], hcoef=Fraction(0)):
        self.coeffs = tuple(_fr(c) for c in coeffs)
        self.hcoef = _fr(hcoef)
        self._key = None

    @staticmethod
    def zero(nlam: int) -> "LinForm":
        return LinForm((Fraction(0),) * nlam)

    @staticmethod
    def weight(nlam: int, index: int) -> "LinForm":
        c = [Fraction(0)] * nlam
        c[index] = Fraction(1)
        return LinForm(c)

    @staticmethod
    def hbar(nlam: int, mult=Fraction(1)) -> "LinForm":
        return LinForm((Fraction(0),) * nlam, _fr(mult))

    def __add__(self, other: "LinForm") -> "LinForm":
        return LinForm(
            tuple(a + b for a, b in zip(self.coeffs, other.coeffs)),
            self.hcoef + other.hcoef,
        )

    def __sub__(self, other: "LinForm") -> "LinForm":
        return LinForm(
            tuple(a - b for a, b in zip(self.coeffs, other.coeffs)),
            self.hcoef - other.hcoef,
        )

    def __neg__(self) -> "LinForm":
        return LinForm(tuple(-a for a in self.coeffs), -self.hcoef)

    def scale(self, c) -> "LinForm":
        c = _fr(c)
        return LinForm(tuple(c * a for a in self.coeffs), c * self.hcoef)

    def plus_hbar(self, mult) -> "LinForm":
        return LinForm(self.coeffs, self.hcoef + _fr(mult))

    @property
    def is_zero(self) -> bool:
        return self.hcoef == 0 and all(c == 0 for c in self.coeffs)

    @property
    def lambda_part_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LinForm)
            and self.coeffs == other.coeffs
            and self.hcoef == other.hcoef
        )

    def __hash__(self):
        return hash((self.coeffs, self.hcoef))

    def canonical(self):
        """Return ``(scale, key)`` with ``self = scale * primitive_form(key)``.

        The key is an integer vector (weights then h) with content 1 and first
        nonzero entry positive; it identifies the prime factor up to scalars.
        Returns ``(0, None)`` for the zero form.
        """
        if self._key is not None:
            return self._key
        entries = list(self.coeffs) + [self.hcoef]
        if all(e == 0 for e in entries):
            self._key = (Fraction(0), None)
            return self._key
        den = math.lcm(*(e.denominator for e in entries))
        ints = [int(e * den) for e in entries]
        g = math.gcd(*ints)
        ints = [i // g for i in ints]
        first = next(i for i in ints if i != 0)
        sign = 1 if first > 0 else -1
        ints = [sign * i for i in ints]
        self._key = (Fraction(sign * g, den), tuple(ints))
        return self._key

    def pretty(self, names: Sequence[str]) -> str:
        parts = []
        entries = list(self.coeffs) + [self.hcoef]
        for c, n in zip(entries, names):
            if c == 0:
                continue
            if c == 1:
                parts.append(f"+ {n}")
            elif c == -1:
                parts.append(f"- {n}")
            elif c > 0:
                parts.append(f"+ {c}*{n}")
            else:
                parts.append(f"- {-c}*{n}")
        if not parts:
            return "0"
        out = " ".join(parts)
        return out[2:] if out.startswith("+ ") else "-" + out[2:]

    def __repr__(self):
        return f"LinForm({self.coeffs}, h={self.hcoef})"


# ---------------------------------------------------------------------------
# factored products of linear forms


class NonGenericPoleError(AlgebraError):
    """A substitution annihilated a denominator factor."""


class FactoredValue:
    """A rational number times a product of linear-form powers.

    Keys of ``powers`` are canonical primitive integer vectors; values are
    pairs ``(representative LinForm, exponent)``.  Exponents may be negative.
    Products, quotients, h -> -h and exact substitutions h -> rational
    multiple of a weight form all stay in factored shape, so equality is a
    dictionary comparison (unique factorization in the polynomial ring).
    """

    __slots__ = ("coef", "powers")

    def __init__(self, coef=Fraction(1), powers=None):
        self.coef = _fr(coef)
        self.powers = powers if powers is not None else {}
        if self.coef == 0:
            self.powers = {}

    @staticmethod
    def one() -> "FactoredValue":
        return FactoredValue(Fraction(1))

    @staticmethod
    def zero() -> "FactoredValue":
        return FactoredValue(Fraction(0))

    @property
    def is_zero(self) -> bool:
        return self.coef == 0

    def copy(self) -> "FactoredValue":
        return FactoredValue(self.coef, dict(self.powers))

    def times_form(self, form: LinForm, exp: int = 1) -> "FactoredValue":
        """Multiply by ``form**exp``; a zero form with exp < 0 is a pole."""
        if exp == 0 or self.coef == 0:
            return self
        scale, key = form.canonical()
        if key is None:
            if exp > 0:
                return FactoredValue.zero()
            raise NonGenericPoleError("division by an identically zero linear form")
        out = self.copy()
        out.coef *= scale**exp
        primitive = LinForm([Fraction(c) for c in key[:-1]], Fraction(key[-1]))
        old = out.powers.get(key, (primitive, 0))[1]
        new = old + exp
        if new == 0:
            out.powers.pop(key, None)
        else:
            out.powers[key] = (primitive, new)
        return out

    def times_scalar(self, c) -> "FactoredValue":
        c = _fr(c)
        if c == 0:
            return FactoredValue.zero()
        out = self.copy()
        out.coef *= c
        return out

    def __mul__(self, other: "FactoredValue") -> "FactoredValue":
        if self.coef == 0 or other.coef == 0:
            return FactoredValue.zero()
        out = self.copy()
        out.coef *= other.coef
        for key, (rep, exp) in other.powers.items():
            _, old = out.powers.get(key, (rep, 0))
            new = old + exp
            if new == 0:
                out.powers.pop(key, None)
            else:
                out.powers[key] = (rep, new)
        return out

    def inverse(self) -> "FactoredValue":
        if self.coef == 0:
            raise ZeroDivisionError("inverse of zero factored value")
        return FactoredValue(
            1 / self.coef, {k: (rep, -e) for k, (rep, e) in self.powers.items()}
        )

    def __truediv__(self, other: "FactoredValue") -> "FactoredValue":
        return self * other.inverse()

    def __pow__(self, n: int) -> "FactoredValue":
        if n == 0:
            return FactoredValue.one()
        if self.coef == 0:
            if n < 0:
                raise ZeroDivisionError
            return FactoredValue.zero()
        return FactoredValue(
            self.coef**n, {k: (rep, e * n) for k, (rep, e) in self.powers.items()}
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, FactoredValue):
            return NotImplemented
        if self.coef != other.coef:
            return False
        if set(self.powers) != set(other.powers):
            return False
        return all(self.powers[k][1] == other.powers[k][1] for k in self.powers)

    def __hash__(self):
        raise TypeError("FactoredValue is not hashable")

    def negate_hbar(self) -> "FactoredValue":
        out = FactoredValue(self.coef)
        for _, (rep, exp) in self.powers.items():
            out = out.times_form(LinForm(rep.coeffs, -rep.hcoef), exp)
        return out

    def subs_hbar(self, value: LinForm) -> "FactoredValue":
        """Substitute h -> ``value`` (a pure weight form, no h part)."""
        if value.hcoef != 0:
            raise AlgebraError("substitution target must be h-free")
        out = FactoredValue(self.coef)
        for _, (rep, exp) in self.powers.items():
            newform = LinForm(rep.coeffs) + value.scale(rep.hcoef)
            if newform.is_zero and exp < 0:
                raise NonGenericPoleError(
                    "pole collision while evaluating at a resonance value of h"
                )
            out = out.times_form(newform, exp)
            if out.is_zero:
                return out
        return out

    def hbar_order(self) -> tuple[int, int]:
        """(numerator, denominator) h-degrees of the factored product."""
        up = down = 0
        for _, (rep, exp) in self.powers.items():
            if rep.hcoef != 0:
                if exp > 0:
                    up += exp
                else:
                    down -= exp
        return up, down

    def total_degree(self) -> int:
        """Homogeneity degree in (weights, h)."""
        return sum(e for _, (_, e) in self.powers.items())

    def to_num_den(self, ctx: "SymbolContext"):
        """Expand into a (numerator, denominator) pair of ring elements."""
        num = ctx.ring_const(Fraction(self.coef.numerator))
        den = ctx.ring_const(Fraction(self.coef.denominator))
        for _, (rep, exp) in sorted(self.powers.items()):
            p = ctx.lin_to_poly(rep)
            if exp > 0:
                num = num * p**exp
            else:
                den = den * p ** (-exp)
        return num, den

    def to_rational(self, ctx: "SymbolContext") -> "RationalFunction":
        num, den = self.to_num_den(ctx)
        return RationalFunction(ctx, num, den)

    def __repr__(self):
        bits = [str(self.coef)]
        for _, (rep, exp) in sorted(self.powers.items()):
            bits.append(f"({rep!r})^{exp}")
        return " * ".join(bits)


# ---------------------------------------------------------------------------
# the polynomial ring context


class SymbolContext:
    """Fixes the polynomial ring for one toric problem.

    mode 'symbolic'     QQ[l1..lN, lp1..lpl, h], graded lex order
    mode 'specialized'  QQ[h]; every weight is a fixed rational
    mode 'ray'          QQ[e, h]; weight j is c_j * e for fixed rationals c_j
    """

    def __init__(self, nbase: int, nbundle: int, mode: str = "symbolic",
                 values: Sequence[Fraction] | None = None):
        self.nbase = nbase
        self.nbundle = nbundle
        self.nlam = nbase + nbundle
        self.mode = mode
        self.weight_names = [f"l{j + 1}" for j in range(nbase)] + [
            f"lp{a + 1}" for a in range(nbundle)
        ]
        self.names = self.weight_names + ["h"]
        if mode == "symbolic":
            self.values = None
            R, *gens = _ring(",".join(self.names), QQ, order="grlex")
            self.ring = R
            self._lam_gens = gens[:-1]
            self.hbar = gens[-1]
            self._eps = None
        elif mode in ("specialized", "ray"):
            if values is None or len(values) != self.nlam:
                raise AlgebraError("specialized context needs one value per weight")
            self.values = tuple(_fr(v) for v in values)
            if mode == "specialized":
                R, h = _ring("h", QQ, order="grlex")
                self.ring = R
                self.hbar = h
                self._eps = None
            else:
                R, e, h = _ring("e,h", QQ, order="grlex")
                self.ring = R
                self.hbar = h
                self._eps = e
            self._lam_gens = None
        else:
            raise AlgebraError(f"unknown mode {mode!r}")
        self.field = self.ring.to_field()

    @property
    def is_symbolic(self) -> bool:
        return self.mode == "symbolic"

    def ring_const(self, c) -> object:
        c = _fr(c)
        return self.ring.ground_new(QQ(c.numerator, c.denominator))

    def lin_to_poly(self, form: LinForm):
        p = self.ring.zero
        if self.mode == "symbolic":
            for c, g in zip(form.coeffs, self._lam_gens):
                if c != 0:
                    p += self.ring_const(c) * g
        elif self.mode == "specialized":
            s = Fraction(0)
            for c, v in zip(form.coeffs, self.values):
                s += c * v
            p += self.ring_const(s)
        else:  # ray
            s = Fraction(0)
            for c, v in zip(form.coeffs, self.values):
                s += c * v
            if s != 0:
                p += self.ring_const(s) * self._eps
        if form.hcoef != 0:
            p += self.ring_const(form.hcoef) * self.hbar
        return p

    def form_vanishes(self, form: LinForm) -> bool:
        """Whether the form collapses to zero in this context."""
        if self.mode == "symbolic":
            return form.is_zero
        if form.hcoef != 0:
            return False
        return sum(c * v for c, v in zip(form.coeffs, self.values)) == 0

    # -- polynomial helpers -------------------------------------------------

    def total_degree(self, p) -> int:
        if not p:
            return -1
        return max(sum(mon) for mon in p.monoms())

    def hbar_index(self) -> int:
        return len(self.ring.gens) - 1

    def hbar_degree(self, p) -> int:
        if not p:
            return -1
        hi = self.hbar_index()
        return max(mon[hi] for mon in p.monoms())

    def hbar_split(self, p) -> dict[int, object]:
        """Split a polynomial as sum_m coeff_m(lams) * h**m."""
        hi = self.hbar_index()
        out: dict[int, dict] = {}
        for mon, c in p.terms():
            key = mon[hi]
            rest = mon[:hi] + (0,) + mon[hi + 1:]
            out.setdefault(key, {})[rest] = c
        return {m: self.ring.from_dict(d) for m, d in out.items()}

    def eval_weights_zero(self, p):
        """Set every weight generator to 0, keeping h."""
        if self.mode == "specialized":
            raise AlgebraError("cannot take the weight -> 0 limit at specialized weights")
        if not p:
            return p
        if self.mode == "ray":
            return p.subs(self._eps, QQ(0))
        return p.subs([(g, QQ(0)) for g in self._lam_gens])

    def eval_all_zero_to_fraction(self, p) -> Fraction:
        """Value of a polynomial at all generators = 0."""
        if not p:
            return Fraction(0)
        const = p.coeff(1)
        return Fraction(const.numerator, const.denominator)


def poly_to_fraction(p) -> Fraction:
    """A degree-0 polynomial as a Fraction; raises if not constant."""
    if not p:
        return Fraction(0)
    if any(any(m) for m in p.monoms()):
        raise AlgebraError(f"expected a constant polynomial, got {p}")
    c = p.coeff(1)
    return Fraction(c.numerator, c.denominator)


# ---------------------------------------------------------------------------
# lazy rational functions


class RationalFunction:
    """num/den pair over the context ring; arithmetic does not reduce."""

    __slots__ = ("ctx", "num", "den")

    def __init__(self, ctx: SymbolContext, num, den=None):
        self.ctx = ctx
        self.num = num
        self.den = den if den is not None else ctx.ring.one
        if not self.den:
            raise AlgebraError("division by zero polynomial")
        if not self.num:
            self.den = ctx.ring.one

    # -- constructors -------------------------------------------------------

    @staticmethod
    def const(ctx: SymbolContext, c) -> "RationalFunction":
        c = _fr(c)
        return RationalFunction(
            ctx, ctx.ring_const(Fraction(c.numerator)), ctx.ring_const(Fraction(c.denominator))
        )

    @staticmethod
    def from_form(ctx: SymbolContext, form: LinForm) -> "RationalFunction":
        return RationalFunction(ctx, ctx.lin_to_poly(form))

    # -- arithmetic ----------------------------------------------------------

    def _coerce(self, other) -> "RationalFunction | None":
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, (int, Fraction)):
            return RationalFunction.const(self.ctx, other)
        if isinstance(other, FactoredValue):
            return other.to_rational(self.ctx)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if self.den == o.den:
            return RationalFunction(self.ctx, self.num + o.num, self.den)
        return RationalFunction(
            self.ctx, self.num * o.den + o.num * self.den, self.den * o.den
        )

    __radd__ = __add__

    def __neg__(self):
        return RationalFunction(self.ctx, -self.num, self.den)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return RationalFunction(self.ctx, self.num * o.num, self.den * o.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not o.num:
            raise ZeroDivisionError("division by zero rational function")
        return RationalFunction(self.ctx, self.num * o.den, self.den * o.num)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        return o / self

    def __pow__(self, n: int):
        if n < 0:
            return RationalFunction(self.ctx, self.den, self.num) ** (-n)
        return RationalFunction(self.ctx, self.num**n, self.den**n)

    @property
    def is_zero(self) -> bool:
        return not self.num

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.num * o.den == o.num * self.den

    def __hash__(self):
        raise TypeError("RationalFunction is not hashable")

    # -- reduction and certification ------------------------------------------

    def reduce(self) -> "RationalFunction":
        """Canonical representative: gcd removed, integral, positive den lead."""
        if not self.num:
            return RationalFunction(self.ctx, self.ctx.ring.zero, self.ctx.ring.one)
        g = self.num.gcd(self.den)
        num = self.num.quo(g)
        den = self.den.quo(g)
        # clear rational denominators jointly, then integer content
        dens = [QQ.denom(c) for c in num.coeffs()] + [QQ.denom(c) for c in den.coeffs()]
        m = dens[0]
        for d in dens[1:]:
            m = m * d // math.gcd(int(m), int(d))
        num = num * self.ctx.ring_const(Fraction(int(m)))
        den = den * self.ctx.ring_const(Fraction(int(m)))
        nums = [int(QQ.numer(c)) for c in num.coeffs()] + [int(QQ.numer(c)) for c in den.coeffs()]
        g2 = 0
        for v in nums:
            g2 = math.gcd(g2, v)
        if g2 > 1:
            inv = self.ctx.ring_const(Fraction(1, g2))
            num = num * inv
            den = den * inv
        if den.LC < 0:
            num = -num
            den = -den
        return RationalFunction(self.ctx, num, den)

    def as_polynomial(self):
        """The underlying polynomial if den | num, else None."""
        if not self.num:
            return self.ctx.ring.zero
        quo, rem = divmod(self.num, self.den)
        if rem:
            return None
        return quo

    def as_fraction(self) -> Fraction:
        p = self.as_polynomial()
        if p is None:
            raise AlgebraError("not a constant")
        return poly_to_fraction(p)

    def hbar_order_bound(self) -> int:
        """deg_h(den) - deg_h(num); the 1/h expansion starts at this order."""
        if not self.num:
            raise AlgebraError("zero has no h-order")
        return self.ctx.hbar_degree(self.den) - self.ctx.hbar_degree(self.num)

    def pretty(self) -> str:
        r = self.reduce()
        if r.den == self.ctx.ring.one:
            return str(r.num)
        return f"({r.num})/({r.den})"

    def __repr__(self):
        return f"RationalFunction({self.num}, {self.den})"


# ---------------------------------------------------------------------------
# spec operations on rational functions


def rf_normalize(num_or_rf, den=None, ctx: SymbolContext | None = None) -> RationalFunction:
    """Reduced canonical representative of num/den.

    Accepts either a RationalFunction or an explicit (num, den) pair of ring
    elements together with the context.
    """
    if isinstance(num_or_rf, RationalFunction):
        return num_or_rf.reduce()
    if den is None or ctx is None:
        raise AlgebraError("rf_normalize needs (num, den, ctx)")
    if not den:
        raise AlgebraError("division by zero polynomial")
    return RationalFunction(ctx, num_or_rf, den).reduce()


@dataclass(frozen=True)
class HbarTail:
    """Truncated expansion sum_{m<=K} c_m h^-m + O(h^-(K+1)) at h = infinity."""

    order: int
    coeffs: tuple

    def __iter__(self):
        return iter(self.coeffs)

    def __getitem__(self, m):
        return self.coeffs[m]


def rf_expand_hbar_infinity(f: RationalFunction, K: int) -> HbarTail:
    """Expand a rational function regular at h = infinity to order K."""
    ctx = f.ctx
    if f.is_zero:
        zero = RationalFunction.const(ctx, 0)
        return HbarTail(K, tuple(zero for _ in range(K + 1)))
    dn = ctx.hbar_degree(f.num)
    dd = ctx.hbar_degree(f.den)
    if dn > dd:
        raise PoleAtInfinityError(dn - dd)
    nsplit = ctx.hbar_split(f.num)
    dsplit = ctx.hbar_split(f.den)
    zero_p = ctx.ring.zero
    # a_hat[m], b_hat[m] are the coefficients of h^(dd - m)
    a_hat = [nsplit.get(dd - m, zero_p) for m in range(K + 1)]
    b_hat = [dsplit.get(dd - m, zero_p) for m in range(K + 1)]
    b0 = RationalFunction(ctx, b_hat[0])
    coeffs = []
    for m in range(K + 1):
        acc = RationalFunction(ctx, a_hat[m])
        for i in range(1, m + 1):
            acc = acc - RationalFunction(ctx, b_hat[i]) * coeffs[m - i]
        coeffs.append((acc / b0).reduce())
    return HbarTail(K, tuple(coeffs))


def hbar_tail_matches(f: RationalFunction, tail: HbarTail) -> bool:
    """Check f - sum c_m h^-m = O(h^-(K+1)) by clearing denominators."""
    ctx = f.ctx
    h = RationalFunction(ctx, ctx.hbar)
    acc = f
    for m, c in enumerate(tail.coeffs):
        acc = acc - c / (h ** m if m else RationalFunction.const(ctx, 1))
    if acc.is_zero:
        return True
    return acc.hbar_order_bound() >= tail.order + 1


class FactoredSum:
    """A deferred sum of factored values.

    Multiplication distributes term by term and stays factored; the sum is
    materialized once via :func:`sum_factored`, which joins denominators by
    max exponent instead of multiplying them up.  Addition never inspects
    cancellation, so ``is_zero`` is only a fast syntactic check.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        self.terms = [t for t in terms if not t.is_zero]

    @staticmethod
    def of(value) -> "FactoredSum":
        if isinstance(value, FactoredSum):
            return value
        if isinstance(value, FactoredValue):
            return FactoredSum([value])
        return FactoredSum([FactoredValue(_fr(value))])

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        o = FactoredSum.of(other)
        return FactoredSum(self.terms + o.terms)

    __radd__ = __add__

    def __neg__(self):
        return FactoredSum([t.times_scalar(-1) for t in self.terms])

    def __sub__(self, other):
        return self + (-FactoredSum.of(other))

    def __rsub__(self, other):
        return (-self) + FactoredSum.of(other)

    def __mul__(self, other):
        if isinstance(other, FactoredSum):
            return FactoredSum(
                [a * b for a in self.terms for b in other.terms]
            )
        if isinstance(other, FactoredValue):
            return FactoredSum([t * other for t in self.terms])
        c = _fr(other)
        if c == 0:
            return FactoredSum()
        return FactoredSum([t.times_scalar(c) for t in self.terms])

    __rmul__ = __mul__

    def to_rational(self, ctx: SymbolContext) -> RationalFunction:
        return sum_factored(ctx, self.terms)

    def __repr__(self):
        return f"FactoredSum({len(self.terms)} terms)"


def expand_factored_at_infinity(ctx: SymbolContext, fv: FactoredValue, K: int):
    """1/h expansion of a factored value without expanding full products.

    Returns (lead, coeffs): the value equals h^(-lead) * (c_0 + c_1/h + ...)
    with ``coeffs = (c_0 .. c_K)`` as RationalFunctions in the weights; lead
    can be negative when the value grows at infinity.  Only the top K+1
    h-slices of the numerator and denominator products are ever materialized.
    """
    if fv.is_zero:
        zero = RationalFunction.const(ctx, 0)
        return 0, HbarTail(K, tuple(zero for _ in range(K + 1)))

    def slices(forms):
        # product of (a_f + b_f h): keep slices at h^(top), h^(top-1), ...
        s = [ctx.ring.one] + [ctx.ring.zero] * K
        for rep, exp in forms:
            a = ctx.lin_to_poly(LinForm(rep.coeffs))
            b = ctx.ring_const(rep.hcoef) if rep.hcoef else None
            for _ in range(exp):
                if b is not None:
                    new = [ctx.ring.zero] * (K + 1)
                    for o in range(K + 1):
                        new[o] = s[o] * b
                        if o >= 1:
                            new[o] = new[o] + s[o - 1] * a
                    s = new
                else:
                    s = [x * a for x in s]
        return s

    num_forms = [(rep, e) for _, (rep, e) in sorted(fv.powers.items()) if e > 0]
    den_forms = [(rep, -e) for _, (rep, e) in sorted(fv.powers.items()) if e < 0]
    num_top = sum(e for rep, e in num_forms if rep.hcoef != 0)
    den_top = sum(e for rep, e in den_forms if rep.hcoef != 0)
    a_hat = slices(num_forms)
    b_hat = slices(den_forms)
    b0 = RationalFunction(ctx, b_hat[0])
    coeffs = []
    for m in range(K + 1):
        acc = RationalFunction(ctx, a_hat[m]) * fv.coef
        for i in range(1, m + 1):
            acc = acc - RationalFunction(ctx, b_hat[i]) * coeffs[m - i]
        coeffs.append((acc / b0).reduce())
    return den_top - num_top, HbarTail(K, tuple(coeffs))


def sum_factored(ctx: SymbolContext, terms: Iterable[FactoredValue]) -> RationalFunction:
    """Sum factored values over a joint denominator built from the factor keys.

    The common denominator is the max of the per-term denominator exponents,
    so shared pole factors are expanded only once.
    """
    terms = [t for t in terms if not t.is_zero]
    if not terms:
        return RationalFunction.const(ctx, 0)
    join: dict = {}
    for t in terms:
        for key, (rep, exp) in t.powers.items():
            if exp < 0:
                old = join.get(key)
                if old is None or -exp > old[1]:
                    join[key] = (rep, -exp)
    den = ctx.ring.one
    powers: dict = {}
    pow_cache: dict = {}

    def power(key, rep, e):
        cached = pow_cache.get((key, e))
        if cached is None:
            base = powers.get(key)
            if base is None:
                base = ctx.lin_to_poly(rep)
                powers[key] = base
            cached = base**e
            pow_cache[(key, e)] = cached
        return cached

    for key, (rep, exp) in sorted(join.items()):
        den = den * power(key, rep, exp)
    num = ctx.ring.zero
    for t in terms:
        part = ctx.ring_const(t.coef)
        keys = set(t.powers) | set(join)
        for key in sorted(keys):
            rep, exp = t.powers.get(key, (None, 0))
            jrep, jexp = join.get(key, (None, 0))
            e = exp + jexp
            if e:
                part = part * power(key, rep if rep is not None else jrep, e)
        num = num + part
    return RationalFunction(ctx, num, den)
