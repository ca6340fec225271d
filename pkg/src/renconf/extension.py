"""Primary extension maps across the origin of a difference space.

The scheme is Taylor subtraction under a scale window: for a homogeneous
u with scaling degree sd on E^m,

    <P u, phi> = <u, phi - W_mu * T^{sd-m} phi>,

where T^k is the Taylor polynomial at 0 (T^k = 0 for k < 0, so low
degrees extend directly) and W_mu is the window at scale mu.  For the
two-point reduction (one difference variable) the window is the sharp
indicator of {|y| <= mu} and every algebraic consequence of the scheme
(derivative commutators, scale shifts) has a closed form on the Laurent
generators y^b (D=1) and z^alpha w^beta (D=2).

A PMap can carry a counterterm functional lam on generators; it induces
the local-distribution table

    L[u] = sum_r (-1)^{|r|}/r! * lam(x^r u) * delta^{(r)},

which commutes with polynomial multiplication by construction.  A table
given instead as raw delta coefficients per homogeneity class is solved
into this form deepest class last, so deeper entries override shallower
inconsistencies; that is the adjustment restoring P(p*u) = p*P(u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .corefn import ConfFn, chart_vars
from .localdist import LocalDist
from .poly import Mono
from .scalars import Scalar, log_rational, pi


# -- windows -------------------------------------------------------------


def quadratic_form(vecs) -> np.ndarray:
    """Canonical squared radius on E^S/E in difference coordinates.

    q = sum_j |x_j - xbar|^2 over the points, with the anchor's zero
    vector appended automatically.  Inputs are arrays with the space
    dimension on the last axis.  Permutations of the points act as
    isometries of q, which a permutation-covariant scheme requires.
    """
    arrs = [np.asarray(v, dtype=float) for v in vecs]
    arrs.append(np.zeros_like(arrs[0]))
    mean = sum(arrs) / len(arrs)
    out = 0.0
    for a in arrs:
        d = a - mean
        out = out + np.sum(d * d, axis=-1)
    return out


@dataclass(frozen=True)
class SharpWindow:
    """Indicator of {q <= mu^2}; the exact symbolic tables rely on it at n=2."""

    mu: Fraction

    def value(self, q):
        return np.where(np.asarray(q) <= float(self.mu) ** 2, 1.0, 0.0)


def _bump_profile(kind: str):
    if kind == "exp1":
        return lambda t: np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-150)), 0.0)
    if kind == "exp2":
        return lambda t: np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-150) ** 2), 0.0)
    raise ValueError(f"unknown window profile {kind!r}")


@dataclass(frozen=True)
class SmoothWindow:
    """Smooth cutoff in q: identically 1 below mu^2/2, identically 0 above mu^2.

    Multi-block collapse regions cross inner diagonals, where the
    renormalized object has distributional transverse structure; a sharp
    window there would pair it with a discontinuous function.  The smooth
    profile keeps those pairings defined while leaving every jet-algebra
    identity (which is window-independent) intact.
    """

    mu: Fraction
    profile: str = "exp1"

    def value(self, q):
        q = np.asarray(q, dtype=float)
        a = float(self.mu) ** 2 / 2.0
        b = float(self.mu) ** 2
        s = np.clip((q - a) / (b - a), 0.0, 1.0)
        rho = _bump_profile(self.profile)
        num = rho(1.0 - s)
        den = num + rho(s)
        return np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)


# -- primary maps ----------------------------------------------------------


def _as_scalar(c) -> Scalar:
    return c if isinstance(c, Scalar) else Scalar.from_rational(c)


@dataclass(frozen=True)
class PMap:
    """Taylor-subtraction extension at scale mu with a counterterm functional.

    lam maps generator keys to Scalars: D=1 keys are integer exponents b,
    D=2 keys are pairs (alpha, beta).  Only finitely many entries; keys
    with nonnegative total degree are rejected (they would not be local).
    """

    D: int
    mu: Fraction
    lam: tuple = ()

    def __post_init__(self):
        if self.D not in (1, 2):
            raise ValueError("extension maps are implemented for D in {1, 2}")
        mu = Fraction(self.mu)
        if mu <= 0:
            raise ValueError("scale must be a positive rational")
        object.__setattr__(self, "mu", mu)
        items = self.lam.items() if isinstance(self.lam, dict) else self.lam
        ent = []
        for key, c in items:
            deg = key if self.D == 1 else key[0] + key[1]
            if deg >= 0:
                raise ValueError(f"counterterm key {key} has nonnegative degree")
            c = _as_scalar(c)
            if not c.is_zero():
                ent.append((key, c))
        object.__setattr__(self, "lam", tuple(sorted(ent, key=lambda kv: str(kv[0]))))

    def lam_value(self, key) -> Scalar:
        for k, c in self.lam:
            if k == key:
                return c
        return Scalar.zero()

    @staticmethod
    def from_delta_table(D: int, mu, table: Mapping) -> "PMap":
        """Build from raw delta coefficients {(class_key, r): Scalar}.

        class_key identifies the generator class (b, or (alpha, beta)); r
        is the delta multi-index (an int for D=1, a pair for D=2).  Each
        entry pins lam at the key class + |r|; polynomial commutation
        chains classes together, so deeper classes are authoritative and
        are applied last.
        """
        def depth(ck):
            return -(ck if D == 1 else ck[0] + ck[1])

        lam: dict = {}
        for (ck, r) in sorted(table, key=lambda kr: depth(kr[0])):
            c = _as_scalar(table[(ck, r)])
            if D == 1:
                order = r if isinstance(r, int) else r[0]
                key = ck + order
                fact = Fraction((-1) ** order, math.factorial(order))
            else:
                s, t = r
                key = (ck[0] + s, ck[1] + t)
                fact = Fraction((-1) ** (s + t), math.factorial(s) * math.factorial(t))
            # c = (-1)^{|r|}/r! * lam(x^r g)
            lam[key] = c / fact
        return PMap(D, mu, tuple(sorted(lam.items(), key=lambda kv: str(kv[0]))))

    def counterterm_dist(self, u: ConfFn) -> LocalDist:
        """The LocalDist the counterterm functional assigns to u."""
        exps = pair_exponents(u)
        vars = tuple(chart_vars(self.D, u.S))
        terms: dict[Mono, Scalar] = {}
        if self.D == 1:
            (v,) = vars
            for b, cb in exps.items():
                for key, lam_c in self.lam:
                    r = key - b
                    if r < 0:
                        continue
                    coeff = cb * lam_c * Fraction((-1) ** r, math.factorial(r))
                    m = ((v, r),) if r else ()
                    terms[m] = terms.get(m, Scalar.zero()) + coeff
        else:
            vz = next(v for v in vars if v[0] == "z")
            vw = next(v for v in vars if v[0] == "w")
            for (al, be), cb in exps.items():
                for key, lam_c in self.lam:
                    s, t = key[0] - al, key[1] - be
                    if s < 0 or t < 0:
                        continue
                    coeff = cb * lam_c * Fraction(
                        (-1) ** (s + t), math.factorial(s) * math.factorial(t)
                    )
                    m = tuple(sorted((v, e) for v, e in ((vz, s), (vw, t)) if e))
                    terms[m] = terms.get(m, Scalar.zero()) + coeff
        return LocalDist(
            self.D, vars, {m: c for m, c in terms.items() if not c.is_zero()}
        )


# -- generator decomposition ------------------------------------------------


def pair_exponents(u: ConfFn) -> dict:
    """Laurent exponents of a two-point function: D=1 {b: c}, D=2 {(a,b): c}."""
    if len(u.S) != 2:
        raise ValueError("expected a function on a two-point configuration")
    j, k = min(u.S), max(u.S)
    out: dict = {}
    if u.D == 1:
        N = u.den.get(("x", j, k), 0)
        for m, c in u.num.terms.items():
            a = m[0][1] if m else 0
            key = a - N
            out[key] = out.get(key, Scalar.zero()) + c
    elif u.D == 2:
        Nz = u.den.get(("z", j, k), 0)
        Nw = u.den.get(("w", j, k), 0)
        for m, c in u.num.terms.items():
            exps = {v[0]: e for v, e in m}
            key = (exps.get("z", 0) - Nz, exps.get("w", 0) - Nw)
            out[key] = out.get(key, Scalar.zero()) + c
    else:
        raise ValueError("extension generators exist for D in {1, 2}")
    return {k: c for k, c in out.items() if not c.is_zero()}


def from_exponents(D: int, S: Iterable[int], exps: Mapping) -> ConfFn:
    S = frozenset(S)
    j, k = min(S), max(S)
    out = ConfFn.zero(D, S)
    for key, c in exps.items():
        if D == 1:
            piece = ConfFn.atom_power(D, S, "x", j, k, key)
        else:
            al, be = key
            piece = ConfFn.atom_power(D, S, "z", j, k, al) * ConfFn.atom_power(
                D, S, "w", j, k, be
            )
        out = out + piece.scale(c)
    return out


# -- closed-form tables ------------------------------------------------------


def _shift_terms_d1(N: int, mu: Fraction, mup: Fraction) -> dict:
    """delta-coefficients of (P_mup - P_mu)(y^{-N}), keyed by derivative order.

    <diff, phi> = -sum_{t <= N-1, t = N mod 2} (2/t!) int_mu^mup r^{t-N} dr phi^(t)(0);
    the radial exponent t-N is even and <= -2, so no logarithm can occur:
    parity removes the critical power in one dimension.
    """
    out: dict[int, Scalar] = {}
    for t in range(0, N):
        if (t - N) % 2 != 0:
            continue
        p = t - N + 1  # odd and nonzero
        radial = (mup ** p - mu ** p) / p
        a_t = -Fraction(2, math.factorial(t)) * radial
        coeff = Scalar.from_rational(a_t * (-1) ** t)
        if not coeff.is_zero():
            out[t] = coeff
    return out


def _shift_terms_d2(al: int, be: int, mu: Fraction, mup: Fraction) -> dict:
    """delta-coefficients of (P_mup - P_mu)(z^al w^be), keyed by (s, t).

    Angular integrals force al+s = be+t; the shared value k gives radial
    power 2k+1, a logarithm exactly at k = -1.
    """
    ord_ = -(al + be) - 2
    out: dict = {}
    for s in range(0, ord_ + 1):
        t = s + (al - be)
        if t < 0 or s + t > ord_:
            continue
        k = al + s
        if k == -1:
            radial = log_rational(Fraction(mup, mu))
        else:
            p = 2 * k + 2
            radial = Scalar.from_rational(Fraction(mup ** p - mu ** p, p))
        c = radial * pi() * Fraction(
            -2 * (-1) ** (s + t), math.factorial(s) * math.factorial(t)
        )
        if not c.is_zero():
            out[(s, t)] = c
    return out


def _gamma_terms_d1(N: int, mu: Fraction) -> dict:
    """delta-coefficients of [d, P](y^{-N}) for the sharp window at mu.

    Boundary terms of the subtraction at y = +-mu:
    <[d,P]u, phi> = sum_{t <= N, t-N odd} 2 mu^{t-N} phi^(t)(0)/t!.
    """
    out: dict[int, Scalar] = {}
    for t in range(0, N + 1):
        if (t - N) % 2 == 0:
            continue
        c = Fraction(2, math.factorial(t)) * Fraction(mu) ** (t - N)
        out[t] = Scalar.from_rational(c * (-1) ** t)
    return out


def _gamma_terms_d2(al: int, be: int, xi: str, mu: Fraction) -> dict:
    """delta-coefficients of [d_xi, P](z^al w^be), keyed by (s, t).

    Sphere-boundary formula: the (s,t) jet term survives when the angular
    phases match (s - t = be - al + 1 for xi = z, minus one for xi = w)
    and s + t <= -(al+be) - 1; its weight is pi mu^{s+t+1+al+be}/(s! t!).
    """
    out = {}
    top = -(al + be) - 1
    shift = (be - al) + (1 if xi == "z" else -1)
    for s in range(0, max(top, 0) + 1):
        t = s - shift
        if t < 0 or s + t > top:
            continue
        expo = s + t + 1 + al + be
        c = pi() * Fraction((-1) ** (s + t), math.factorial(s) * math.factorial(t))
        out[(s, t)] = c * Fraction(mu) ** expo
    return out


def _d1_dist(vars: tuple, terms: Mapping[int, Scalar]) -> LocalDist:
    (v,) = vars
    return LocalDist(1, vars, {(((v, t),) if t else ()): c for t, c in terms.items()})


def _d2_dist(vars: tuple, terms: Mapping[tuple, Scalar]) -> LocalDist:
    vz = next(v for v in vars if v[0] == "z")
    vw = next(v for v in vars if v[0] == "w")
    out = {}
    for (s, t), c in terms.items():
        m = tuple(sorted((v, e) for v, e in ((vz, s), (vw, t)) if e))
        out[m] = c
    return LocalDist(2, vars, out)


# -- operations ---------------------------------------------------------------


def scale_shift(p_from: PMap, p_to: PMap, u: ConfFn) -> LocalDist:
    """(P_to - P_from)(u): the scheme difference, a local distribution."""
    if p_from.D != p_to.D or p_from.D != u.D:
        raise ValueError("dimension mismatch")
    vars = tuple(chart_vars(u.D, u.S))
    total = LocalDist.zero(u.D, vars)
    for key, c in pair_exponents(u).items():
        if u.D == 1:
            if key >= 0:
                continue
            total = total + _d1_dist(vars, _shift_terms_d1(-key, p_from.mu, p_to.mu)).scale(c)
        else:
            if key[0] + key[1] >= -1:
                continue
            total = total + _d2_dist(vars, _shift_terms_d2(key[0], key[1], p_from.mu, p_to.mu)).scale(c)
    if p_from.lam or p_to.lam:
        diff_lam = _lam_diff(p_to, p_from)
        if any(not c.is_zero() for c in diff_lam.values()):
            diff = PMap(u.D, p_to.mu, tuple(diff_lam.items()))
            total = total + diff.counterterm_dist(u)
    return total


def _lam_diff(a: PMap, b: PMap) -> dict:
    out: dict = {}
    for k, c in a.lam:
        out[k] = out.get(k, Scalar.zero()) + c
    for k, c in b.lam:
        out[k] = out.get(k, Scalar.zero()) - c
    return out


def derivative_commutator(P: PMap, xi, u: ConfFn) -> LocalDist:
    """[d_xi, P] u = d(P u) - P(d u), always a local distribution.

    xi is the chart direction: 1 (or "y") for D=1, "z"/"w" for D=2; the
    derivative is taken with respect to the non-anchor point of the pair.
    """
    vars = tuple(chart_vars(u.D, u.S))
    total = LocalDist.zero(u.D, vars)
    if u.D == 1:
        if xi not in (1, "y"):
            raise ValueError("invalid direction for D=1")
        for key, c in pair_exponents(u).items():
            if key >= 0:
                continue
            total = total + _d1_dist(vars, _gamma_terms_d1(-key, P.mu)).scale(c)
    else:
        if xi not in ("z", "w"):
            raise ValueError("D=2 directions are 'z' and 'w'")
        for key, c in pair_exponents(u).items():
            total = total + _d2_dist(vars, _gamma_terms_d2(key[0], key[1], xi, P.mu)).scale(c)
    if P.lam:
        from .localdist import derive as ld_derive

        if u.D == 1:
            v = vars[0]
            du = u.derivative((min(u.S), 1))
        else:
            v = next(vv for vv in vars if vv[0] == xi)
            du = u.derivative((min(u.S), xi))
        total = total + ld_derive(P.counterterm_dist(u), v) - P.counterterm_dist(du)
    return total


# -- the Gamma functional of the two-point scheme -----------------------------


def gamma2_functional(P: PMap, xi=None):
    """Gamma on generator keys: gamma_xi(u) = sum_r (-1)^{|r|}/r! Gamma(x^r u) d^{(r)}.

    D=1: Gamma(b) = 2 mu^b for odd b <= -1, else 0.
    D=2, xi="z": Gamma((a,b)) = pi mu^{a+b+1} when a = b+1 and a+b <= -1;
         xi="w": symmetric with b = a+1.
    Base scheme only; counterterm contributions are handled by callers.
    """
    mu = P.mu
    if P.D == 1:
        def g(b: int) -> Scalar:
            if b <= -1 and b % 2 != 0:
                return Scalar.from_rational(2 * Fraction(mu) ** b)
            return Scalar.zero()

        return g
    if xi not in ("z", "w"):
        raise ValueError("D=2 needs xi in {'z','w'}")

    def g2(key) -> Scalar:
        al, be = key
        if al + be <= -1 and (al - be) == (1 if xi == "z" else -1):
            return pi() * Fraction(mu) ** (al + be + 1)
        return Scalar.zero()

    return g2


# -- numeric pairing of an extension -----------------------------------------


@dataclass
class ExtComponent:
    key: object  # b or (alpha, beta)
    coeff: complex
    sd: int
    order: int  # subtraction order; negative means direct


@dataclass
class ExtendedDist:
    """A two-point function extended across y = 0, pairable with test functions.

    Test functions follow the one-chart protocol: value(y) / value_xy(x1,x2),
    taylor_1d(t) / taylor_2d(max_order), decay_radius().
    """

    P: PMap
    u: ConfFn
    components: list
    local: LocalDist
    vars: tuple

    def pair(self, phi) -> complex:
        total = 0.0 + 0.0j
        for comp in self.components:
            if self.P.D == 1:
                total += comp.coeff * _pair_d1(comp, float(self.P.mu), phi)
            else:
                total += comp.coeff * _pair_d2(comp, float(self.P.mu), phi)
        for r, c in self.local.terms.items():
            exps = {v[0]: e for v, e in r}
            if self.P.D == 1:
                jet_val = phi.taylor_1d(exps.get("y", 0))
            else:
                s, t = exps.get("z", 0), exps.get("w", 0)
                jet_val = phi.taylor_2d(s + t).get((s, t), 0.0)
            nr = sum(exps.values())
            rfact = math.prod(math.factorial(e) for e in exps.values())
            total += complex(_num(c)) * (-1) ** nr * rfact * complex(jet_val)
        return total


def _num(c):
    if isinstance(c, Scalar):
        return c.numeric()
    return c


def extend(P: PMap, u: ConfFn, m: int) -> ExtendedDist:
    """Extend a two-point function across the origin of its difference space."""
    if u.D != P.D:
        raise ValueError("dimension mismatch")
    if len(u.S) != 2:
        raise ValueError("closed-form extension acts on two-point functions")
    if m != P.D:
        raise ValueError(f"ambient dimension {m} does not match the reduction {P.D}")
    comps = []
    for key, c in pair_exponents(u).items():
        sd = -key if P.D == 1 else -(key[0] + key[1])
        comps.append(ExtComponent(key, complex(_num(c)), sd, sd - m))
    vars = tuple(chart_vars(P.D, u.S))
    return ExtendedDist(P, u, comps, P.counterterm_dist(u), vars)


def _inner_radius(mu: float, phi) -> float:
    # termwise integration of the Taylor remainder needs the series to
    # represent phi on the whole inner disc
    delta = min(mu * 0.5, 0.75)
    fr = getattr(phi, "flat_radius", lambda: None)()
    if fr is not None:
        delta = min(delta, fr)
    return delta


def _pair_d1(comp: ExtComponent, mu: float, phi) -> float:
    from scipy.integrate import quad

    b = comp.key
    order = comp.order
    R = phi.decay_radius()

    def raw(y):
        return (y ** b) * phi.value(y)

    if order < 0:
        val, _ = quad(raw, -R, R, limit=200)
        return val

    K = 36
    tay = [phi.taylor_1d(t) for t in range(0, K + 1)]

    def subtracted(y):
        t_val = sum(tay[t] * y ** t for t in range(0, order + 1))
        return (y ** b) * (phi.value(y) - t_val)

    delta = _inner_radius(mu, phi)
    # inner disc via the Taylor remainder, exactly integrable termwise
    inner = 0.0
    for t in range(order + 1, K + 1):
        e = b + t
        if e % 2 == 0:
            inner += tay[t] * 2.0 * delta ** (e + 1) / (e + 1)
    mid = sum(
        quad(subtracted, a, bb, limit=200)[0] for a, bb in ((-mu, -delta), (delta, mu))
    )
    outer = sum(quad(raw, a, bb, limit=200)[0] for a, bb in ((-R, -mu), (mu, R)))
    return inner + mid + outer


def _pair_d2(comp: ExtComponent, mu: float, phi) -> complex:
    from scipy.integrate import quad

    al, be = comp.key
    order = comp.order
    K = 18
    ntheta = 256
    theta = np.linspace(0.0, 2 * np.pi, ntheta, endpoint=False)
    eith = np.exp(1j * theta)
    tay_low = phi.taylor_2d(order) if order >= 0 else {}

    def angular(r, subtract: bool):
        z = r * eith
        w = np.conj(z)
        vals = phi.value_xy(z.real, z.imag).astype(complex)
        if subtract:
            for (s, t), c in tay_low.items():
                vals = vals - c * z ** s * w ** t
        integrand = (z ** al) * (w ** be) * vals
        return integrand.mean() * 2 * np.pi

    def re_im(f, a, bb):
        rr, _ = quad(lambda r: f(r).real, a, bb, limit=200)
        ii, _ = quad(lambda r: f(r).imag, a, bb, limit=200)
        return rr + 1j * ii

    delta = _inner_radius(mu, phi)
    R = phi.decay_radius()
    total = 0.0 + 0.0j
    # inner disc via the Taylor remainder, termwise angular integrals
    for (s, t), c in phi.taylor_2d(K).items():
        if order >= 0 and s + t <= order:
            continue
        if al + s != be + t:
            continue
        e = al + be + s + t + 1
        total += complex(c) * 2 * np.pi * delta ** (e + 1) / (e + 1)
    total += re_im(lambda r: r * angular(r, order >= 0), delta, mu)
    total += re_im(lambda r: r * angular(r, False), mu, R)
    return total


# -- tensor extension ---------------------------------------------------------


@dataclass
class TensorExtendedDist:
    """u tensor P(v): the local factor u rides along, P acts on v only."""

    local_factor: LocalDist
    ext: ExtendedDist

    def pair(self, phi) -> complex:
        total = 0.0 + 0.0j
        for r, c in self.local_factor.terms.items():
            slice_fn = phi.jet_slice(self.local_factor.vars, r)
            nr = sum(e for _, e in r)
            rfact = math.prod(math.factorial(e) for _, e in r)
            total += complex(_num(c)) * (-1) ** nr * rfact * self.ext.pair(slice_fn)
        return total


def tensor_extend(P: PMap, u: LocalDist, v: ConfFn, m: int) -> TensorExtendedDist:
    if set(u.vars) & set(chart_vars(v.D, v.S)):
        raise ValueError("tensor factors must use disjoint variables")
    return TensorExtendedDist(u, extend(P, v, m))
