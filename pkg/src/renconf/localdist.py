"""Distributions supported at a point: finite sums of delta derivatives.

A LocalDist over a variable tuple holds sparse terms r -> c representing
sum_r c_r delta^{(r)}.  Pairings follow <delta^{(r)}, x^s> = (-1)^{|r|} r! [r=s];
jets are always in Taylor-coefficient convention (the 1/r! is in the jet).

Coefficients are Scalar for the exact engine; plain floats are accepted so
numerically determined counterterms flow through the same bookkeeping.
Mixing floats with transcendental Scalars is an error rather than a silent
precision loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .corefn import chart_vars
from .poly import Mono, Poly, Var, _mono_div, _mono_divides
from .scalars import Scalar


def _as_coeff(c):
    if isinstance(c, float) or isinstance(c, Scalar):
        return c
    return Scalar.from_rational(c)


def _to_float(c) -> float:
    if isinstance(c, float):
        return c
    if isinstance(c, Scalar):
        if c.is_rational():
            return float(c.as_fraction())
        raise TypeError(f"cannot mix float coefficients with {c}")
    return float(c)


def _cadd(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return _to_float(a) + _to_float(b)
    return a + b


def _cmul(a, b):
    if isinstance(a, float) or isinstance(b, float):
        return _to_float(a) * _to_float(b)
    if isinstance(a, Scalar) and not isinstance(b, Scalar):
        return a * b
    if isinstance(b, Scalar) and not isinstance(a, Scalar):
        return b * a
    return a * b


def _cneg(c):
    return -c


def _is_zero(c) -> bool:
    if isinstance(c, float):
        return c == 0.0
    if isinstance(c, Scalar):
        return c.is_zero()
    return c == 0


def _mono_factorial(m: Mono) -> int:
    return math.prod(math.factorial(e) for _, e in m)


def _mono_order(m: Mono) -> int:
    return sum(e for _, e in m)


@dataclass
class LocalDist:
    D: int
    vars: tuple  # ordered tuple of Var forming the relative-coordinate space
    terms: dict = field(default_factory=dict)  # Mono -> coefficient
    max_order: "int | None" = None

    def __post_init__(self):
        vs = set(self.vars)
        cleaned = {}
        for m, c in self.terms.items():
            for v, e in m:
                if v not in vs:
                    raise ValueError(f"multi-index uses {v} outside the variable space")
            c = _as_coeff(c)
            if not _is_zero(c):
                cleaned[m] = c
        object.__setattr__(self, "terms", cleaned)
        if self.max_order is not None:
            actual = self.order()
            if actual > self.max_order:
                raise ValueError(
                    f"order {actual} exceeds the filtration bound {self.max_order}"
                )

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(D: int, vars: Iterable[Var]) -> "LocalDist":
        return LocalDist(D, tuple(vars), {})

    @staticmethod
    def delta(D: int, vars: Iterable[Var], c=1) -> "LocalDist":
        return LocalDist(D, tuple(vars), {(): _as_coeff(c)})

    @staticmethod
    def monomial(D: int, vars: Iterable[Var], r: Mono, c=1) -> "LocalDist":
        """c * delta^{(r)}."""
        return LocalDist(D, tuple(vars), {r: _as_coeff(c)})

    # -- structure ---------------------------------------------------------

    def order(self) -> int:
        return max((_mono_order(m) for m in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def _check_peer(self, other: "LocalDist"):
        if self.D != other.D or self.vars != other.vars:
            raise ValueError("local distributions live on different spaces")

    def __add__(self, other: "LocalDist") -> "LocalDist":
        self._check_peer(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = _cadd(terms.get(m, Scalar.zero()), c)
            if _is_zero(s):
                terms.pop(m, None)
            else:
                terms[m] = s
        return LocalDist(self.D, self.vars, terms)

    def __neg__(self) -> "LocalDist":
        return LocalDist(self.D, self.vars, {m: _cneg(c) for m, c in self.terms.items()})

    def __sub__(self, other: "LocalDist") -> "LocalDist":
        return self + (-other)

    def scale(self, c) -> "LocalDist":
        c = _as_coeff(c)
        return LocalDist(
            self.D, self.vars, {m: _cmul(cc, c) for m, cc in self.terms.items()}
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalDist):
            return NotImplemented
        return self.D == other.D and self.vars == other.vars and self.terms == other.terms

    def map_coefficients(self, fn) -> "LocalDist":
        return LocalDist(self.D, self.vars, {m: fn(c) for m, c in self.terms.items()})

    # -- text form -----------------------------------------------------------

    def _fmt_index(self, m: Mono) -> str:
        exps = {v: e for v, e in m}
        vec = tuple(exps.get(v, 0) for v in self.vars)
        if len(vec) == 1:
            return str(vec[0])
        return "(" + ",".join(str(e) for e in vec) + ")"

    def text_form(self, tag: str = "delta") -> str:
        if not self.terms:
            return f"0 {tag}"
        bits = []
        for m in sorted(self.terms, key=lambda m: (_mono_order(m), m)):
            c = self.terms[m]
            if _mono_order(m) == 0:
                bits.append(f"{c} * {tag}")
            else:
                bits.append(f"{c} * d^{{{self._fmt_index(m)}}} {tag}")
        return " + ".join(bits)

    def __str__(self) -> str:
        return self.text_form()


@dataclass
class PlacedLocalDist:
    """A LocalDist attached to the partial diagonal of a block of S."""

    S: frozenset
    block: frozenset
    dist: LocalDist

    def __post_init__(self):
        if not isinstance(self.S, frozenset):
            object.__setattr__(self, "S", frozenset(self.S))
        if not isinstance(self.block, frozenset):
            object.__setattr__(self, "block", frozenset(self.block))
        if not self.block <= self.S:
            raise ValueError("block must be contained in the ambient set")
        expected = tuple(chart_vars(self.dist.D, self.block))
        if tuple(self.dist.vars) != expected:
            raise ValueError(
                f"variable space {self.dist.vars} does not match the relative "
                f"coordinates {expected} of {sorted(self.block)}"
            )

    def __str__(self) -> str:
        label = "{" + ",".join(str(j) for j in sorted(self.block)) + "}"
        return self.dist.text_form(tag=f"delta[{label}]")


# -- operations ---------------------------------------------------------------


def poly_reduce(p: Poly, u: LocalDist) -> LocalDist:
    """Multiply a delta sum by a polynomial: x^s d^{(r)} kills or lowers r."""
    for v in p.variables():
        if v not in set(u.vars):
            raise ValueError(f"polynomial variable {v} outside the distribution space")
    terms: dict[Mono, object] = {}
    for s, a in p.terms.items():
        for r, c in u.terms.items():
            if not _mono_divides(s, r):
                continue
            rs = _mono_div(r, s)
            factor = Fraction(
                (-1) ** _mono_order(s) * _mono_factorial(r), _mono_factorial(rs)
            )
            add = _cmul(_cmul(c, a), factor)
            cur = terms.get(rs)
            new = add if cur is None else _cadd(cur, add)
            if _is_zero(new):
                terms.pop(rs, None)
            else:
                terms[rs] = new
    return LocalDist(u.D, u.vars, terms)


def derive(u: LocalDist, xi: Var) -> LocalDist:
    """Distributional derivative: <du, phi> = -<u, dphi>; d delta^{(r)} = delta^{(r+e)}."""
    if xi not in set(u.vars):
        raise ValueError(f"{xi} is not in the variable space")
    from .poly import _mono_mul

    terms = {}
    for r, c in u.terms.items():
        m = _mono_mul(r, ((xi, 1),))
        terms[m] = _cadd(terms.get(m, Scalar.zero()), c)
    return LocalDist(u.D, u.vars, terms)


def pair_with_jet(u: LocalDist, jet: Mapping[Mono, object], jet_order: int):
    """Pair with a test function given by its Taylor coefficients at 0.

    <sum c_r delta^{(r)}, phi> = sum c_r (-1)^{|r|} r! jet[r].
    The jet must be complete up to the distribution's order.
    """
    if jet_order < u.order():
        raise ValueError(
            f"jet of order {jet_order} too short for a distribution of order {u.order()}"
        )
    total = None
    for r, c in u.terms.items():
        t = jet.get(r)
        if t is None:
            t = 0.0 if isinstance(c, float) else Scalar.zero()
        factor = Fraction((-1) ** _mono_order(r) * _mono_factorial(r))
        piece = _cmul(_cmul(c, _as_coeff(t) if not isinstance(t, float) else t), factor)
        total = piece if total is None else _cadd(total, piece)
    return Scalar.zero() if total is None else total


def pair_with_poly(u: LocalDist, p: Poly):
    """Exact pairing with a polynomial test function."""
    total = Scalar.zero()
    for r, c in u.terms.items():
        a = p.terms.get(r)
        if a is None:
            continue
        factor = Fraction((-1) ** _mono_order(r) * _mono_factorial(r))
        total = _cadd(total, _cmul(_cmul(c, a), factor))
    return total


def place(u: LocalDist, block: Iterable[int], S: Iterable[int]) -> PlacedLocalDist:
    return PlacedLocalDist(frozenset(S), frozenset(block), u)
