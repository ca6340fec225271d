"""Sparse multivariate polynomials over the exact Scalar ring.

Variables are (tag, index) pairs such as ("y", 1), ("z", 2), ("w", 3);
monomials are sorted tuples of (variable, exponent).  Division is only
needed against atoms whose leading coefficient is rational, so exact
divisibility testing stays inside the Scalar ring.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .scalars import Scalar

Var = tuple
Mono = tuple  # tuple[tuple[Var, int], ...] sorted by variable


def _mono_mul(a: Mono, b: Mono) -> Mono:
    exps: dict[Var, int] = dict(a)
    for v, e in b:
        exps[v] = exps.get(v, 0) + e
    return tuple(sorted((v, e) for v, e in exps.items() if e != 0))


def _mono_degree(m: Mono) -> int:
    return sum(e for _, e in m)


def _mono_divides(a: Mono, b: Mono) -> bool:
    exps = dict(b)
    return all(exps.get(v, 0) >= e for v, e in a)


def _mono_div(b: Mono, a: Mono) -> Mono:
    exps = dict(b)
    for v, e in a:
        exps[v] = exps[v] - e
    return tuple(sorted((v, e) for v, e in exps.items() if e != 0))


@dataclass
class Poly:
    terms: dict = field(default_factory=dict)  # Mono -> Scalar

    @staticmethod
    def _make(terms: Mapping[Mono, Scalar]) -> "Poly":
        return Poly({m: c for m, c in terms.items() if not c.is_zero()})

    @staticmethod
    def zero() -> "Poly":
        return Poly({})

    @staticmethod
    def const(c) -> "Poly":
        c = c if isinstance(c, Scalar) else Scalar.from_rational(c)
        return Poly._make({(): c})

    @staticmethod
    def one() -> "Poly":
        return Poly.const(1)

    @staticmethod
    def var(v: Var, exp: int = 1) -> "Poly":
        if exp < 0:
            raise ValueError("polynomial variables need nonnegative exponents")
        if exp == 0:
            return Poly.one()
        return Poly({((v, exp),): Scalar.one()})

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Scalar.zero()) + c
        return Poly._make(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        out: dict[Mono, Scalar] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                prod = c1 * c2
                out[m] = out.get(m, Scalar.zero()) + prod
        return Poly._make(out)

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative polynomial power")
        out = Poly.one()
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def scale(self, c) -> "Poly":
        c = c if isinstance(c, Scalar) else Scalar.from_rational(c)
        return Poly._make({m: c * v for m, v in self.terms.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.terms == other.terms

    def variables(self) -> set:
        return {v for m in self.terms for v, _ in m}

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(_mono_degree(m) for m in self.terms)

    def lowest_degree(self) -> int:
        if not self.terms:
            raise ValueError("zero polynomial has no lowest degree")
        return min(_mono_degree(m) for m in self.terms)

    def homogeneous_components(self) -> dict:
        """degree -> Poly, splitting by total degree."""
        out: dict[int, dict] = {}
        for m, c in self.terms.items():
            out.setdefault(_mono_degree(m), {})[m] = c
        return {d: Poly(t) for d, t in sorted(out.items())}

    def derivative(self, v: Var) -> "Poly":
        out: dict[Mono, Scalar] = {}
        for m, c in self.terms.items():
            exps = dict(m)
            e = exps.get(v, 0)
            if e == 0:
                continue
            exps[v] = e - 1
            m2 = tuple(sorted((w, k) for w, k in exps.items() if k != 0))
            out[m2] = out.get(m2, Scalar.zero()) + c * e
        return Poly._make(out)

    def substitute(self, env: Mapping[Var, "Poly"]) -> "Poly":
        """Replace variables by polynomials; unmapped variables stay."""
        out = Poly.zero()
        for m, c in self.terms.items():
            term = Poly.const(c)
            for v, e in m:
                base = env.get(v)
                term = term * (base ** e if base is not None else Poly.var(v, e))
            out = out + term
        return out

    def coefficient_of(self, v: Var, exp: int) -> "Poly":
        """Coefficient polynomial of v**exp (v removed from the result)."""
        out: dict[Mono, Scalar] = {}
        for m, c in self.terms.items():
            exps = dict(m)
            if exps.get(v, 0) != exp:
                continue
            exps.pop(v, None)
            m2 = tuple(sorted(exps.items()))
            out[m2] = out.get(m2, Scalar.zero()) + c
        return Poly._make(out)

    # -- division by a single divisor ------------------------------------

    def _leading(self) -> tuple:
        # lex order on the sorted monomial tuples is stable and total here
        m = max(self.terms, key=_lex_key)
        return m, self.terms[m]

    def try_divide(self, divisor: "Poly") -> "Poly | None":
        """Exact quotient self/divisor, or None if it does not divide."""
        if divisor.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        if self.is_zero():
            return Poly.zero()
        lead_m, lead_c = divisor._leading()
        if not lead_c.is_rational():
            raise ValueError("division needs a rational leading coefficient")
        lead_q = lead_c.as_fraction()
        rem = self
        quotient: dict[Mono, Scalar] = {}
        while not rem.is_zero():
            m, c = rem._leading()
            if not _mono_divides(lead_m, m):
                return None
            qm = _mono_div(m, lead_m)
            qc = c / lead_q
            quotient[qm] = quotient.get(qm, Scalar.zero()) + qc
            rem = rem - Poly({qm: qc}) * divisor
        return Poly._make(quotient)

    def evaluate(self, env: Mapping[Var, object], logmu: "float | None" = None):
        """Numeric evaluation; env values may be floats or numpy arrays."""
        total = None
        for m, c in self.terms.items():
            v = c.numeric(logmu=logmu)
            for var, e in m:
                v = v * env[var] ** e
            total = v if total is None else total + v
        return 0.0 if total is None else total

    def map_coefficients(self, f: Callable[[Scalar], Scalar]) -> "Poly":
        return Poly._make({m: f(c) for m, c in self.terms.items()})

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for m, c in sorted(self.terms.items(), key=lambda t: _lex_key(t[0]), reverse=True):
            factors = "*".join(
                f"{v[0]}{v[1]}^{e}" if e != 1 else f"{v[0]}{v[1]}" for v, e in m
            )
            parts.append(f"({c})" + (f"*{factors}" if factors else ""))
        return " + ".join(parts)

    __repr__ = __str__


def _lex_key(m: Mono):
    # Graded lex: total degree first, then exponent vectors compared from the
    # largest variable down.  This is a genuine monomial order (compatible
    # with multiplication), which the division loop needs to terminate.
    return (_mono_degree(m), tuple(sorted(m, reverse=True)))


def poly_sum(ps: Iterable[Poly]) -> Poly:
    out = Poly.zero()
    for p in ps:
        out = out + p
    return out
