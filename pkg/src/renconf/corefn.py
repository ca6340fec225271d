"""Translation-invariant rational functions on configuration spaces.

A ConfFn over a point set S is a single reduced fraction: a polynomial
numerator in difference coordinates divided by a monomial in pairwise
difference atoms.  Charts are anchored at the maximum label: the
coordinates are x_j - x_max for j in S (the anchor itself drops out), so
translation invariance holds by construction.

Atoms per dimension:
  D = 1   ("x", j, k)            the linear difference x_j - x_k
  D = 2   ("z", j, k), ("w", j, k)   light-cone factors z = x1 + i x2,
                                      w = x1 - i x2 of the squared distance
  D >= 3  ("q", j, k)            the irreducible quadric |x_j - x_k|^2
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

from .partitions import Partition, quotient
from .poly import Mono, Poly, Var
from .scalars import Scalar

AtomKey = tuple  # (tag, j, k) with j < k


def _coerce_scalar(c) -> Scalar:
    return c if isinstance(c, Scalar) else Scalar.from_rational(c)


def chart_vars(D: int, S: frozenset) -> list:
    """Difference coordinates of the chart anchored at max(S)."""
    anchor = max(S)
    out: list[Var] = []
    for j in sorted(S):
        if j == anchor:
            continue
        if D == 1:
            out.append(("y", j))
        elif D == 2:
            out.extend([("z", j), ("w", j)])
        else:
            out.extend([(f"y{mu}", j) for mu in range(1, D + 1)])
    return out


def atom_tags(D: int) -> tuple:
    if D == 1:
        return ("x",)
    if D == 2:
        return ("z", "w")
    return ("q",)


@lru_cache(maxsize=None)
def atom_poly(D: int, S: frozenset, key: AtomKey) -> Poly:
    """The atom as a polynomial in the chart of S."""
    tag, j, k = key
    anchor = max(S)

    def linear(var_tag: str) -> Poly:
        pj = Poly.var((var_tag, j)) if j != anchor else Poly.zero()
        pk = Poly.var((var_tag, k)) if k != anchor else Poly.zero()
        return pj - pk

    if tag == "x":
        if D != 1:
            raise ValueError("x-atoms only exist in dimension 1")
        return linear("y")
    if tag in ("z", "w"):
        if D != 2:
            raise ValueError("z/w-atoms only exist in dimension 2")
        return linear(tag)
    if tag == "q":
        if D < 3:
            raise ValueError("q-atoms are for dimension >= 3")
        total = Poly.zero()
        for mu in range(1, D + 1):
            d = linear(f"y{mu}")
            total = total + d * d
        return total
    raise ValueError(f"unknown atom tag {tag!r}")


def _atom_degree(tag: str) -> int:
    return 2 if tag == "q" else 1


@dataclass
class ConfFn:
    D: int
    S: frozenset
    num: Poly
    den: dict = field(default_factory=dict)  # AtomKey -> positive exponent

    def __post_init__(self):
        if not isinstance(self.S, frozenset):
            object.__setattr__(self, "S", frozenset(self.S))

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(D: int, S: Iterable[int]) -> "ConfFn":
        return ConfFn(D, frozenset(S), Poly.zero(), {})

    @staticmethod
    def const(D: int, S: Iterable[int], c) -> "ConfFn":
        return ConfFn(D, frozenset(S), Poly.const(_coerce_scalar(c)), {})

    @staticmethod
    def one(D: int, S: Iterable[int]) -> "ConfFn":
        return ConfFn.const(D, S, 1)

    @staticmethod
    def atom_power(D: int, S: Iterable[int], tag: str, j: int, k: int, exp: int) -> "ConfFn":
        """(atom)^exp for integer exp of either sign."""
        S = frozenset(S)
        if j not in S or k not in S or j == k:
            raise ValueError(f"atom endpoints {j},{k} must be distinct labels in S")
        sign = 1
        if j > k:
            j, k = k, j
            if tag in ("x", "z", "w"):
                sign = (-1) ** exp
        key = (tag, j, k)
        if exp == 0:
            return ConfFn.one(D, S)
        if exp > 0:
            num = atom_poly(D, S, key) ** exp
            return ConfFn(D, S, num.scale(sign), {})
        return ConfFn(D, S, Poly.const(sign), {key: -exp}).reduced()

    # -- normal form -------------------------------------------------------

    def reduced(self) -> "ConfFn":
        """Cancel atom factors common to numerator and denominator."""
        if self.num.is_zero():
            return ConfFn(self.D, self.S, Poly.zero(), {})
        num = self.num
        den: dict[AtomKey, int] = {}
        for key, e in sorted(self.den.items()):
            ap = atom_poly(self.D, self.S, key)
            while e > 0:
                q = num.try_divide(ap)
                if q is None:
                    break
                num = q
                e -= 1
            if e > 0:
                den[key] = e
        return ConfFn(self.D, self.S, num, den)

    def _check_peer(self, other: "ConfFn"):
        if self.D != other.D or self.S != other.S:
            raise ValueError("operands live on different configuration spaces")

    # -- algebra -----------------------------------------------------------

    def __add__(self, other: "ConfFn") -> "ConfFn":
        self._check_peer(other)
        keys = set(self.den) | set(other.den)
        num1, num2 = self.num, other.num
        den: dict[AtomKey, int] = {}
        for key in sorted(keys):
            e1, e2 = self.den.get(key, 0), other.den.get(key, 0)
            e = max(e1, e2)
            den[key] = e
            ap = atom_poly(self.D, self.S, key)
            if e > e1:
                num1 = num1 * ap ** (e - e1)
            if e > e2:
                num2 = num2 * ap ** (e - e2)
        return ConfFn(self.D, self.S, num1 + num2, den).reduced()

    def __neg__(self) -> "ConfFn":
        return ConfFn(self.D, self.S, -self.num, dict(self.den))

    def __sub__(self, other: "ConfFn") -> "ConfFn":
        return self + (-other)

    def __mul__(self, other: "ConfFn") -> "ConfFn":
        self._check_peer(other)
        den = dict(self.den)
        for key, e in other.den.items():
            den[key] = den.get(key, 0) + e
        return ConfFn(self.D, self.S, self.num * other.num, den).reduced()

    def scale(self, c) -> "ConfFn":
        return ConfFn(self.D, self.S, self.num.scale(_coerce_scalar(c)), dict(self.den))

    def mul_poly(self, p: Poly) -> "ConfFn":
        """Multiply by a translation-invariant polynomial in chart variables."""
        return ConfFn(self.D, self.S, self.num * p, dict(self.den)).reduced()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfFn):
            return NotImplemented
        a, b = self.reduced(), other.reduced()
        return a.D == b.D and a.S == b.S and a.num == b.num and a.den == b.den

    def is_zero(self) -> bool:
        return self.num.is_zero()

    # -- calculus ----------------------------------------------------------

    def _tags_for_direction(self, mu) -> str:
        if self.D == 1:
            if mu not in (1, "y"):
                raise ValueError(f"invalid direction {mu!r} in dimension 1")
            return "y"
        if self.D == 2:
            if mu not in ("z", "w"):
                raise ValueError("dimension-2 directions are 'z' and 'w'")
            return mu
        if not (isinstance(mu, int) and 1 <= mu <= self.D):
            raise ValueError(f"invalid direction {mu!r} in dimension {self.D}")
        return f"y{mu}"

    def derivative(self, xi: tuple) -> "ConfFn":
        """d/dx at coordinate xi = (point label k, direction mu)."""
        k, mu = xi
        if k not in self.S:
            raise ValueError(f"label {k} not in S")
        tag = self._tags_for_direction(mu)
        anchor = max(self.S)
        if k == anchor:
            coef = {(tag, j): -1 for j in sorted(self.S) if j != anchor}
        else:
            coef = {(tag, k): 1}
        return self.directional_derivative(coef)

    def directional_derivative(self, coef: Mapping[Var, int]) -> "ConfFn":
        """Derivative along sum(coef[v] * d/dv) for chart variables v."""
        out = ConfFn.zero(self.D, self.S)
        for v, c in coef.items():
            if c == 0:
                continue
            piece = self._var_derivative(v)
            out = out + piece.scale(c)
        return out

    def _var_derivative(self, v: Var) -> "ConfFn":
        dnum = self.num.derivative(v)
        out = ConfFn(self.D, self.S, dnum, dict(self.den)).reduced()
        for key, e in self.den.items():
            ap = atom_poly(self.D, self.S, key)
            dap = ap.derivative(v)
            if dap.is_zero():
                continue
            den = dict(self.den)
            den[key] = e + 1
            out = out + ConfFn(self.D, self.S, self.num * dap, den).scale(-e).reduced()
        return out

    def scaling_degree(self, along: Iterable[int]) -> int:
        """Rate of blow-up when the points of `along` collapse together."""
        Sp = frozenset(along)
        if not Sp <= self.S:
            raise ValueError("collapse set must be a subset of S")
        if len(Sp) < 2 and Sp != self.S:
            raise ValueError("collapse set needs at least two points")
        if self.num.is_zero():
            raise ValueError("scaling degree of the zero function is undefined")
        anchor = max(self.S)
        rep = max(Sp)
        # Grade-1 substitution: inside the collapse set, x_j - x_anchor picks
        # up a u-variable; outside it stays a t-variable.  Exact polynomial
        # arithmetic keeps cancellations (x_j - x_k inside the set is purely
        # grade 1 even though each chart variable alone is mixed).
        env: dict[Var, Poly] = {}
        tags = ["y"] if self.D == 1 else (["z", "w"] if self.D == 2 else [f"y{m}" for m in range(1, self.D + 1)])
        for tag in tags:
            for j in sorted(self.S):
                if j == anchor:
                    continue
                v = (tag, j)
                if j in Sp:
                    u = Poly.var(("u" + tag, j)) if j != rep else Poly.zero()
                    t = Poly.var(("t" + tag, rep)) if anchor not in Sp else Poly.zero()
                    env[v] = u + t
                else:
                    env[v] = Poly.var(("t" + tag, j))
        num_sub = self.num.substitute(env)
        u_grade = min(
            sum(e for (vt, _), e in m if vt.startswith("u"))
            for m in num_sub.terms
        )
        den_grade = 0
        for (tag, j, k), e in self.den.items():
            if j in Sp and k in Sp:
                den_grade += e * _atom_degree(tag)
        return den_grade - u_grade

    def is_homogeneous(self) -> bool:
        comps = self.num.homogeneous_components()
        return len(comps) <= 1

    def homogeneity_degree(self) -> int:
        """Total degree under scaling all differences; requires homogeneity."""
        if self.num.is_zero():
            raise ValueError("zero function has no homogeneity degree")
        if not self.is_homogeneous():
            raise ValueError("not homogeneous")
        den_deg = sum(e * _atom_degree(tag) for (tag, _, _), e in self.den.items())
        return self.num.degree() - den_deg

    def homogeneous_parts(self) -> dict:
        """degree -> homogeneous ConfFn summand."""
        den_deg = sum(e * _atom_degree(tag) for (tag, _, _), e in self.den.items())
        return {
            d - den_deg: ConfFn(self.D, self.S, p, dict(self.den))
            for d, p in self.num.homogeneous_components().items()
        }

    # -- evaluation ----------------------------------------------------------

    def _env_from_point(self, point: Mapping[int, object]) -> dict:
        anchor = max(self.S)
        env: dict[Var, object] = {}
        for j in sorted(self.S):
            if j == anchor:
                continue
            pj, pa = point[j], point[anchor]
            if self.D == 1:
                xj = pj[0] if isinstance(pj, (tuple, list)) else pj
                xa = pa[0] if isinstance(pa, (tuple, list)) else pa
                env[("y", j)] = xj - xa
            elif self.D == 2:
                zj = pj[0] + 1j * pj[1]
                za = pa[0] + 1j * pa[1]
                env[("z", j)] = zj - za
                env[("w", j)] = (zj - za).conjugate()
            else:
                for mu in range(1, self.D + 1):
                    env[(f"y{mu}", j)] = pj[mu - 1] - pa[mu - 1]
        return env

    def evaluate(self, point: Mapping[int, object], logmu: "float | None" = None):
        """Numeric value at a configuration point: label -> coordinates.

        Coordinates may be floats (D=1), tuples, or numpy arrays for batch
        evaluation.  Raises on configurations lying on a diagonal.
        """
        import numpy as np

        env = self._env_from_point(point)
        denval = 1.0
        for key, e in self.den.items():
            val = atom_poly(self.D, self.S, key).evaluate(env)
            if np.any(np.asarray(val) == 0):
                raise ZeroDivisionError(f"point lies on the diagonal of {key}")
            denval = denval * np.asarray(val) ** e
        return self.num.evaluate(env, logmu=logmu) / denval

    # -- jets ----------------------------------------------------------------

    def diagonal_jet(self, part: Partition, max_order: int) -> "DiagonalJet":
        """Taylor coefficients at the partial diagonal of a partition.

        Each block collapses onto its maximum label; coefficients are
        functions of the quotient configuration.  Raises if an atom sits
        inside a block (the function would be singular on the diagonal).
        """
        if part.ground_set != self.S:
            raise ValueError("partition does not cover S")
        rep = {j: max(b) for b in part.blocks for j in b}
        anchor = max(self.S)
        Q = frozenset(quotient(self.S, part))
        tags = ["y"] if self.D == 1 else (["z", "w"] if self.D == 2 else None)
        if tags is None:
            raise ValueError("jets are implemented for dimensions 1 and 2")

        # New variables after substitution: (tag, j) for non-rep j is the
        # block offset u_j = x_j - x_rep(j); (tag, r) for a rep r != anchor
        # is the quotient chart coordinate x_r - x_anchor.  These name sets
        # are disjoint, so the old chart variables map cleanly onto them.
        env: dict[Var, Poly] = {}
        uvars: list[Var] = []
        for tag in tags:
            for j in sorted(self.S):
                if j == anchor:
                    continue
                r = rep[j]
                p = Poly.zero()
                if j != r:
                    p = p + Poly.var((tag, j))
                if r != anchor:
                    p = p + Poly.var((tag, r))
                env[(tag, j)] = p
        for tag in tags:
            for j in sorted(self.S):
                if j != rep[j]:
                    uvars.append((tag, j))
        uset = set(uvars)

        num_sub = self.num.substitute(env)
        stream: dict[Mono, ConfFn] = {}
        for m, c in num_sub.terms.items():
            um = tuple((v, e) for v, e in m if v in uset)
            if sum(e for _, e in um) > max_order:
                continue
            qm = tuple((v, e) for v, e in m if v not in uset)
            piece = ConfFn(self.D, Q, Poly({qm: c}), {})
            prev = stream.get(um)
            stream[um] = piece if prev is None else prev + piece

        for (tag, j, k), e in sorted(self.den.items()):
            rj, rk = rep[j], rep[k]
            if rj == rk:
                raise ValueError(f"atom {(tag, j, k)} is singular inside a block")
            sign = 1
            if rj > rk:
                rj, rk = rk, rj
                sign = -1
            qkey = (tag, rj, rk)
            # atom = sign * (quotient atom) + A1 with A1 linear in the u's
            vtag = "y" if tag == "x" else tag
            a1 = (Poly.var((vtag, j)) if j != rep[j] else Poly.zero()) - (
                Poly.var((vtag, k)) if k != rep[k] else Poly.zero()
            )
            expansion: dict[Mono, ConfFn] = {}
            for t in range(0, max_order + 1):
                a1t = a1 ** t
                if a1t.is_zero() and t > 0:
                    break
                coeff = Fraction(math.comb(e + t - 1, t) * (-1) ** t * sign ** (e + t))
                for m, c in a1t.terms.items():
                    piece = ConfFn(self.D, Q, Poly.const(c * coeff), {qkey: e + t})
                    prev = expansion.get(m)
                    expansion[m] = piece if prev is None else prev + piece
            stream = _jet_mul(stream, expansion, max_order)

        return DiagonalJet(self.D, Q, tuple(uvars), stream, max_order)


def _jet_mul(a: dict, b: dict, max_order: int) -> dict:
    from .poly import _mono_mul

    out: dict[Mono, ConfFn] = {}
    for m1, f1 in a.items():
        d1 = sum(e for _, e in m1)
        for m2, f2 in b.items():
            if d1 + sum(e for _, e in m2) > max_order:
                continue
            m = _mono_mul(m1, m2)
            prod = f1 * f2
            prev = out.get(m)
            out[m] = prod if prev is None else prev + prod
    return out


@dataclass
class DiagonalJet:
    """Taylor data of a ConfFn at a partial diagonal."""

    D: int
    quotient_S: frozenset
    uvars: tuple
    coeffs: dict  # u-monomial (Poly Mono) -> ConfFn over quotient_S
    max_order: int

    def coefficient(self, umono: Mono) -> ConfFn:
        return self.coeffs.get(umono, ConfFn.zero(self.D, self.quotient_S))


# -- multiplicative elements -------------------------------------------------


@dataclass
class PairFactor:
    """A two-point function attached to the pair (j, k), j < k."""

    j: int
    k: int
    fn: ConfFn  # over S = {j, k}

    def __post_init__(self):
        if not (self.j < self.k):
            raise ValueError("pair factors are canonically labeled j < k")
        if self.fn.S != frozenset({self.j, self.k}):
            raise ValueError("factor function must live on the pair")


@dataclass
class MultiplicativeElement:
    """Product of two-point functions of differences over S."""

    D: int
    S: frozenset
    factors: tuple  # tuple[PairFactor, ...]

    def __post_init__(self):
        if not isinstance(self.S, frozenset):
            object.__setattr__(self, "S", frozenset(self.S))
        for f in self.factors:
            if not {f.j, f.k} <= self.S:
                raise ValueError("factor endpoints must lie in S")
            if f.fn.D != self.D:
                raise ValueError("factor dimension mismatch")

    @staticmethod
    def from_pairs(D, S, pair_fns: Mapping[tuple, ConfFn]) -> "MultiplicativeElement":
        factors = tuple(
            PairFactor(j, k, fn) for (j, k), fn in sorted(pair_fns.items())
        )
        return MultiplicativeElement(D, frozenset(S), factors)

    def expand(self) -> ConfFn:
        out = ConfFn.one(self.D, self.S)
        for f in self.factors:
            out = out * _lift_pair(self.D, self.S, f)
        return out

    def decompose(self, part: Partition) -> tuple:
        """Split into cross-block and within-block parts.

        Returns (G_cross, {block: MultiplicativeElement over the block}).
        """
        if part.ground_set != self.S:
            raise ValueError("partition does not cover S")
        cross: list[PairFactor] = []
        within: dict[frozenset, list[PairFactor]] = {b: [] for b in part.blocks}
        for f in self.factors:
            b = part.block_of(f.j)
            if f.k in b:
                within[b].append(f)
            else:
                cross.append(f)
        g_cross = MultiplicativeElement(self.D, self.S, tuple(cross))
        blocks = {
            b: MultiplicativeElement(self.D, b, tuple(fs)) for b, fs in within.items()
        }
        return g_cross, blocks

    def scaling_degree(self, along: Iterable[int]) -> int:
        return self.expand().scaling_degree(along)


def _lift_pair(D: int, S: frozenset, f: PairFactor) -> ConfFn:
    """Embed a two-point function into the chart of the ambient S."""
    sub: dict[Var, Poly] = {}
    tags = ["y"] if D == 1 else (["z", "w"] if D == 2 else [f"y{m}" for m in range(1, D + 1)])
    for tag in tags:
        v = (tag, f.j)  # the pair chart's only label is j (anchor is k)
        atom_tag = "x" if D == 1 else tag
        if D >= 3:
            raise ValueError("pair lifting is implemented for dimensions 1 and 2")
        sub[v] = atom_poly(D, S, (atom_tag, f.j, f.k))
    num = f.fn.num.substitute(sub)
    den = {}
    for (tag, j, k), e in f.fn.den.items():
        den[(tag, j, k)] = e
    return ConfFn(D, S, num, den).reduced()


def decompose(G: MultiplicativeElement, part: Partition) -> tuple:
    return G.decompose(part)
