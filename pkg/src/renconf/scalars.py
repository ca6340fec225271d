"""Exact coefficient ring: rationals extended by formal constants.

A Scalar is a finite sum of rational multiples of monomials in the
generators pi, logmu, prime logarithms log2, log3, ..., and the
irreducible zeta values z3, z5.  Reducible multiple zeta values up to
depth 3 and weight 6 (z2, z2_1, z4_1, ...) are rewritten into this basis
at construction time through a bundled relation table, so equality of
Scalars is plain dictionary equality.

Weights: pi has weight 1, zeta(k1,...,km) has weight k1+...+km, and all
logarithm generators have weight 0.  Scale logarithms of rational numbers
are decomposed into prime logarithms so that log(a) + log(b) = log(ab)
holds exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Iterator, Mapping, Union

RationalLike = Union[int, Fraction]

# Irreducible generators and their weights.  Prime-log generators (log2,
# log3, ...) are validated on first use and always have weight 0.
_STATIC_WEIGHTS = {"pi": 1, "logmu": 0, "z3": 3, "z5": 5}

_LOG_RE = re.compile(r"^log(\d+)$")
_ZETA_RE = re.compile(r"^z\d+(_\d+)*$")

Monomial = tuple  # tuple[tuple[str, int], ...], sorted by generator name


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def generator_weight(name: str) -> int:
    if name in _STATIC_WEIGHTS:
        return _STATIC_WEIGHTS[name]
    m = _LOG_RE.match(name)
    if m:
        p = int(m.group(1))
        if not _is_prime(p):
            raise ValueError(f"log generator must use a prime: {name}")
        return 0
    raise ValueError(f"unknown generator {name!r}")


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    exps: dict[str, int] = dict(a)
    for name, e in b:
        exps[name] = exps.get(name, 0) + e
    return tuple(sorted((n, e) for n, e in exps.items() if e != 0))


def _mono_weight(m: Monomial) -> int:
    return sum(generator_weight(name) * e for name, e in m)


@dataclass
class Scalar:
    """Element of the coefficient ring, kept in normal form."""

    terms: dict = field(default_factory=dict)  # Monomial -> Fraction

    # -- construction -----------------------------------------------------

    @staticmethod
    def _make(terms: Mapping[Monomial, Fraction]) -> "Scalar":
        return Scalar({m: c for m, c in terms.items() if c != 0})

    @staticmethod
    def from_rational(q: RationalLike) -> "Scalar":
        q = Fraction(q)
        return Scalar({(): q}) if q else Scalar({})

    @staticmethod
    def zero() -> "Scalar":
        return Scalar({})

    @staticmethod
    def one() -> "Scalar":
        return Scalar({(): Fraction(1)})

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "Scalar | RationalLike") -> "Scalar":
        other = _coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return Scalar._make(out)

    __radd__ = __add__

    def __neg__(self) -> "Scalar":
        return Scalar({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Scalar | RationalLike") -> "Scalar":
        return self + (-_coerce(other))

    def __rsub__(self, other: "Scalar | RationalLike") -> "Scalar":
        return _coerce(other) + (-self)

    def __mul__(self, other: "Scalar | RationalLike") -> "Scalar":
        other = _coerce(other)
        out: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, Fraction(0)) + c1 * c2
        return Scalar._make(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Scalar":
        if n < 0:
            raise ValueError("negative powers are not defined on Scalars")
        out = Scalar.one()
        for _ in range(n):
            out = out * self
        return out

    def __truediv__(self, other: "Scalar | RationalLike") -> "Scalar":
        if isinstance(other, Scalar):
            if not other.is_rational():
                raise ValueError("can only divide by rational Scalars")
            other = other.as_fraction()
        q = Fraction(other)
        return Scalar({m: c / q for m, c in self.terms.items()})

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Scalar.from_rational(other)
        if not isinstance(other, Scalar):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # -- inspection ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_rational(self) -> bool:
        return all(m == () for m in self.terms)

    def as_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"not a rational Scalar: {self}")
        return self.terms.get((), Fraction(0))

    def weight(self) -> "int | str":
        """Common weight of all monomials, or "mixed"."""
        if not self.terms:
            raise ValueError("weight of the zero Scalar is undefined")
        weights = {_mono_weight(m) for m in self.terms}
        return weights.pop() if len(weights) == 1 else "mixed"

    def normalize(self) -> "Scalar":
        # Terms are rewritten at construction; normalization is idempotent.
        return Scalar._make(self.terms)

    def numeric(self, logmu: "float | None" = None) -> float:
        """Floating evaluation; logmu must be supplied if present."""
        total = 0.0
        for m, c in self.terms.items():
            v = float(c)
            for name, e in m:
                v *= _generator_value(name, logmu) ** e
            total += v
        return total

    # -- text form -------------------------------------------------------

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts: list[str] = []
        for m, c in sorted(self.terms.items()):
            factors = [f"{n}^{e}" if e != 1 else n for n, e in m]
            if not factors:
                body = str(abs(c))
            elif abs(c) == 1:
                body = " ".join(factors)
            else:
                body = " ".join([str(abs(c))] + factors)
            sign = "-" if c < 0 else "+"
            parts.append((sign, body))
        first_sign, first_body = parts[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in parts[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self) -> str:
        return f"Scalar({self})"


def _coerce(x: "Scalar | RationalLike") -> Scalar:
    if isinstance(x, Scalar):
        return x
    return Scalar.from_rational(x)


def _generator_value(name: str, logmu_value: "float | None") -> float:
    if name == "pi":
        return math.pi
    if name == "logmu":
        if logmu_value is None:
            raise ValueError("numeric evaluation needs a value for logmu")
        return logmu_value
    m = _LOG_RE.match(name)
    if m:
        return math.log(int(m.group(1)))
    if name in ("z3", "z5"):
        from . import mzv

        return mzv.mzv((int(name[1]),))
    raise ValueError(f"unknown generator {name!r}")


# -- named constructors ----------------------------------------------------


def rational(q: RationalLike) -> Scalar:
    return Scalar.from_rational(q)


def pi() -> Scalar:
    return Scalar({(("pi", 1),): Fraction(1)})


def logmu() -> Scalar:
    return Scalar({(("logmu", 1),): Fraction(1)})


def zeta(*indices: int) -> Scalar:
    """zeta(k1,...,km), rewritten into the generator basis."""
    name = "z" + "_".join(str(k) for k in indices)
    return _resolve_name(name)


def log_rational(q: RationalLike) -> Scalar:
    """log(q) for positive rational q, as a sum of prime logarithms."""
    q = Fraction(q)
    if q <= 0:
        raise ValueError(f"log of a non-positive rational: {q}")
    out = Scalar.zero()
    for value, sign in ((q.numerator, 1), (q.denominator, -1)):
        p = 2
        while value > 1:
            while value % p == 0:
                out = out + Scalar({((f"log{p}", 1),): Fraction(sign)})
                value //= p
            p += 1 if p == 2 else 2
    return out


# -- relation table --------------------------------------------------------

_table: "dict[str, Scalar] | None" = None


def relation_table() -> dict:
    """name -> Scalar map for reducible zeta values (loaded once)."""
    global _table
    if _table is None:
        text = resources.files("renconf.data").joinpath("mzv_relations.txt").read_text()
        _table = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            lhs, rhs = (side.strip() for side in line.split("=", 1))
            if not _ZETA_RE.match(lhs):
                raise ValueError(f"bad relation lhs: {lhs!r}")
            _table[lhs] = parse_scalar(rhs)
    return _table


def _resolve_name(name: str) -> Scalar:
    if name in _STATIC_WEIGHTS or _LOG_RE.match(name):
        generator_weight(name)  # validates prime logs
        return Scalar({((name, 1),): Fraction(1)})
    if _ZETA_RE.match(name):
        table = relation_table()
        if name in table:
            return table[name]
        ks = [int(k) for k in name[1:].split("_")]
        if ks[0] < 2 or any(k < 1 for k in ks):
            raise ValueError(f"inadmissible zeta index {tuple(ks)}")
        raise ValueError(
            f"{name} is outside the bundled table (depth <= 3, weight <= 6)"
        )
    raise ValueError(f"unknown constant {name!r}")


# -- parsing ---------------------------------------------------------------

_RATIONAL_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


def _split_terms(text: str) -> Iterator[tuple[int, str]]:
    # Split on top-level + and - (no parentheses in this grammar).
    sign = 1
    buf: list[str] = []
    for token in re.split(r"([+-])", text):
        token = token.strip()
        if token == "+" or token == "-":
            if buf and "".join(buf).strip():
                yield sign, " ".join(buf).strip()
                buf = []
                sign = 1
            sign *= -1 if token == "-" else 1
        elif token:
            buf.append(token)
    if buf and "".join(buf).strip():
        yield sign, " ".join(buf).strip()


def parse_scalar(text: str) -> Scalar:
    """Parse expressions like `2 z5 - 1/6 pi^2 z3` or `23/15120 pi^6`.

    Factors are separated by whitespace or `*`; exponents use `^`.
    Reducible zeta names are rewritten through the relation table.
    """
    text = text.strip()
    if not text:
        raise ValueError("empty scalar expression")
    total = Scalar.zero()
    for sign, term in _split_terms(text):
        factors = [f for f in re.split(r"[\s*]+", term) if f]
        value = Scalar.from_rational(sign)
        for f in factors:
            if _RATIONAL_RE.match(f):
                value = value * Fraction(f)
                continue
            if "^" in f:
                name, _, exp_text = f.partition("^")
                exp = int(exp_text)
            else:
                name, exp = f, 1
            if exp < 0:
                raise ValueError(f"negative exponent in scalar factor {f!r}")
            value = value * (_resolve_name(name) ** exp)
        total = total + value
    return total
