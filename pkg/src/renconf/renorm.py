"""Renormalization maps built by the partition recursion.

A multiplicative element G over a point set S is renormalized in two
moves.  Off the total diagonal the map is pinned by the lower orders: on
the open set F_P where points are separated across the blocks of a
proper partition P, the result must restrict to G_P times the product of
the renormalized block factors.  Those restrictions glue to the
secondary map on the punctured space, and the primary extension (Taylor
subtraction under the smooth window in the canonical quadratic form)
crosses the remaining point.  The object is kept as a lazy tree
mirroring the recursion: every restriction stays inspectable and
pairings are computed on demand, because no closed form exists in
general.

Pairings here are the production route.  Each collapse chart reduces to
a two-point extension in the collapse variable u at fixed transverse
position v; the slice's Taylor data is assembled symbolically
(polynomial and Gaussian parts in closed form, envelope and window
profiles through truncated power series of exp(-1/t)), and quadrature is
QUADPACK through scipy.  The quadrature oracle shares only scheme data
with this route (windows, subtraction orders, counterterm tables), which
any two realizations of the same maps must agree on; its partition of
unity, jet extraction, and integration engine are all independent.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import dblquad, quad

from .corefn import ConfFn, MultiplicativeElement
from .extension import PMap, SmoothWindow, extend, from_exponents, pair_exponents
from .localdist import LocalDist
from .partitions import Partition
from .scalars import Scalar


def _flt(c) -> float:
    if isinstance(c, Scalar):
        return float(np.real(complex(c.numeric())))
    return float(np.real(complex(c)))


# -- the map family -----------------------------------------------------------


@dataclass(frozen=True)
class RSystem:
    """The data determining every R_S: the two-point map (scale and
    counterterm functional) plus the outer window of the higher primary
    extensions.  Scheme data lives here and nowhere else."""

    pmap: PMap
    outer_mu: Fraction | None = None
    window_profile: str = "exp1"

    def __post_init__(self):
        if self.outer_mu is not None:
            object.__setattr__(self, "outer_mu", Fraction(self.outer_mu))

    @property
    def D(self) -> int:
        return self.pmap.D

    @property
    def window_scale(self) -> Fraction:
        return self.outer_mu if self.outer_mu is not None else self.pmap.mu


def _as_system(sys_or_pmap) -> RSystem:
    if isinstance(sys_or_pmap, RSystem):
        return sys_or_pmap
    return RSystem(sys_or_pmap)


@dataclass(frozen=True)
class PairingConfig:
    """Quadrature and decomposition knobs for the production pairings.

    pou_lo/pou_hi are thresholds on the normalized squared separation
    e_p = s_p^2 / sum s^2; a chart's weight is 1 below lo and 0 above hi.
    On the direction sphere min_p e_p never exceeds 1/6, so hi must stay
    above that for the weights to cover, and below 1/2 so each weight
    vanishes near the other diagonals.  cone is the u/v ratio inside
    which a chart weight is identically 1; 0.2 is safe for the default
    thresholds (worst e at u = -0.2 v is 0.0238 < lo with room).
    """

    epsabs: float = 1e-10
    epsrel: float = 1e-9
    limit: int = 200
    series_order: int = 36
    pou_lo: float = 0.04
    pou_hi: float = 0.24
    pou_profile: str = "exp1"
    cone: float = 0.2
    err_cap: float = 1e-5

    def __post_init__(self):
        if not (1.0 / 6.0 < self.pou_hi < 0.5):
            raise ValueError("pou_hi must lie in (1/6, 1/2) for a covering")
        if not (0.0 < self.pou_lo < self.pou_hi):
            raise ValueError("pou_lo must lie in (0, pou_hi)")


# -- truncated power series ---------------------------------------------------


def _ps_mul(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    out = np.convolve(a, b)[: K + 1]
    if len(out) < K + 1:
        out = np.pad(out, (0, K + 1 - len(out)))
    return out


def _ps_recip(a: np.ndarray, K: int) -> np.ndarray:
    if a[0] == 0.0:
        raise ZeroDivisionError("series reciprocal needs a nonzero constant term")
    out = np.zeros(K + 1)
    out[0] = 1.0 / a[0]
    top = len(a) - 1
    for n in range(1, K + 1):
        acc = 0.0
        for j in range(1, min(n, top) + 1):
            acc += a[j] * out[n - j]
        out[n] = -acc / a[0]
    return out


def _ps_exp(a: np.ndarray, K: int) -> np.ndarray:
    # g' = a' g with g(0) = exp(a[0])
    out = np.zeros(K + 1)
    out[0] = math.exp(a[0])
    top = len(a) - 1
    for n in range(1, K + 1):
        acc = 0.0
        for j in range(1, min(n, top) + 1):
            acc += j * a[j] * out[n - j]
        out[n] = acc / n
    return out


def _affine_pow(a0: float, a1: float, b: int, K: int) -> np.ndarray:
    """(a0 + a1 u)^b as a series at u = 0; integer b, a0 nonzero if b < 0."""
    out = np.zeros(K + 1)
    if b >= 0:
        for t in range(0, min(b, K) + 1):
            out[t] = math.comb(b, t) * a0 ** (b - t) * a1 ** t
        return out
    coef = float(a0) ** b
    out[0] = coef
    if a1 == 0.0:
        return out
    ratio = a1 / a0
    cb = 1.0
    for t in range(1, K + 1):
        cb *= (b - t + 1) / t
        out[t] = coef * cb * ratio ** t
    return out


def _rho_value(kind: str, t: float) -> float:
    if t <= 0.0:
        return 0.0
    if kind == "exp1":
        return math.exp(-1.0 / t)
    if kind == "exp2":
        return math.exp(-1.0 / (t * t))
    raise ValueError(f"unknown profile {kind!r}")


def _stepdown_value(profile: str, s: float) -> float:
    if s <= 0.0:
        return 1.0
    if s >= 1.0:
        return 0.0
    dn = _rho_value(profile, 1.0 - s)
    return dn / (dn + _rho_value(profile, s))


def _profile_jets(kind: str, t0: float, K: int) -> np.ndarray:
    """Taylor coefficients of the profile at t0 (identically 0 for t0 <= 0)."""
    if t0 <= 0.0:
        return np.zeros(K + 1)
    inv = _affine_pow(t0, 1.0, -1, K)
    if kind == "exp1":
        return _ps_exp(-inv, K)
    if kind == "exp2":
        return _ps_exp(-_ps_mul(inv, inv, K), K)
    raise ValueError(f"unknown profile {kind!r}")


def _stepdown_jets(profile: str, s0: float, K: int) -> np.ndarray:
    """Jets at s0 of rho(1-s)/(rho(1-s)+rho(s)), the 1-to-0 transition used
    by every envelope factor and by the outer window."""
    out = np.zeros(K + 1)
    if s0 <= 0.0:
        out[0] = 1.0
        return out
    if s0 >= 1.0:
        return out
    up = _profile_jets(profile, s0, K)
    dn = _profile_jets(profile, 1.0 - s0, K)
    dn[1::2] *= -1.0
    return _ps_mul(dn, _ps_recip(up + dn, K), K)


def _ps_compose(outer: np.ndarray, inner: np.ndarray, K: int) -> np.ndarray:
    """outer evaluated on a series with zero constant term, by Horner."""
    out = np.zeros(K + 1)
    out[0] = outer[-1]
    for c in outer[-2::-1]:
        out = _ps_mul(out, inner, K)
        out[0] += c
    return out


# -- exact restriction to a line ----------------------------------------------


def _poly_line(terms: Mapping, base: Mapping, dvec: Mapping, K: int) -> np.ndarray:
    """Series in u of a sparse polynomial composed with y = base + u dvec."""
    out = np.zeros(K + 1)
    for m, c in terms.items():
        arr = np.array([_flt(c)])
        for v, e in m:
            b0, d0 = base[v], dvec[v]
            fac = np.zeros(e + 1)
            for t in range(e + 1):
                fac[t] = math.comb(e, t) * b0 ** (e - t) * d0 ** t
            arr = np.convolve(arr, fac)
        L = min(len(arr), K + 1)
        out[:L] += arr[:L]
    return out


def _phi_line_jets(phi, base: Mapping, dvec: Mapping, K: int):
    """(jets, trust): Taylor data of phi along y(u) = base + u dvec.

    trust is a radius within which the series faithfully represents the
    function: distance to the nearest envelope regime change, with a
    safety factor inside a profile transition shell where the series has
    finite reach; infinite for the entire Gaussian case.
    """
    kind = phi.envelope[0]
    poly = _poly_line(phi.terms, base, dvec, K)
    if kind == "gauss":
        sigma = phi.envelope[1]
        qline = _poly_line(phi._qterms(), base, dvec, 2)
        return _ps_mul(poly, _ps_exp(-qline / sigma ** 2, K), K), math.inf
    flat, cutoff, profile = phi.envelope[1:4]
    centers = dict(phi.envelope[4]) if kind == "bumpc" else {}
    width = cutoff - flat
    jets = poly
    trust = math.inf
    for v in phi.vars:
        c = _flt(centers.get(v, 0.0))
        p0 = base[v] - c
        dv = dvec[v]
        if dv == 0.0:
            val = _stepdown_value(profile, (abs(p0) - flat) / width)
            if val != 1.0:
                jets = jets * val
            continue
        if abs(p0) < flat:
            # identically 1 until the affine radius reaches the shell
            trust = min(trust, (flat - abs(p0)) / abs(dv))
            continue
        r0 = abs(p0)
        s0 = (r0 - flat) / width
        slope = (dv if p0 > 0 else -dv) / width
        if s0 >= 1.0:
            jets = np.zeros(K + 1)
            trust = min(trust, (s0 - 1.0) / abs(slope))
            continue
        fac = _stepdown_jets(profile, s0, K)
        fac *= np.power(slope, np.arange(K + 1))
        jets = _ps_mul(jets, fac, K)
        trust = min(trust, 0.35 * min(s0, 1.0 - s0) / abs(slope))
    return jets, trust


def _phi_line_support(phi, base: Mapping, dvec: Mapping):
    """u-interval outside of which phi vanishes on the line, or None."""
    kind = phi.envelope[0]
    if kind == "gauss":
        R = phi.decay_radius()
        bb = sum(base[v] * base[v] for v in phi.vars)
        bd = sum(base[v] * dvec[v] for v in phi.vars)
        dd = sum(dvec[v] * dvec[v] for v in phi.vars)
        disc = bd * bd - dd * (bb - R * R)
        if disc <= 0.0:
            return None
        rt = math.sqrt(disc)
        return ((-bd - rt) / dd, (-bd + rt) / dd)
    cutoff = phi.envelope[2]
    centers = dict(phi.envelope[4]) if kind == "bumpc" else {}
    lo, hi = -math.inf, math.inf
    for v in phi.vars:
        p0 = base[v] - _flt(centers.get(v, 0.0))
        dv = dvec[v]
        if dv == 0.0:
            if abs(p0) >= cutoff:
                return None
            continue
        l, h = sorted(((-cutoff - p0) / dv, (cutoff - p0) / dv))
        lo, hi = max(lo, l), min(hi, h)
    return None if lo >= hi else (lo, hi)


def _phi_line_kinks(phi, base: Mapping, dvec: Mapping) -> list:
    kind = phi.envelope[0]
    if kind == "gauss":
        return []
    flat, cutoff = phi.envelope[1], phi.envelope[2]
    centers = dict(phi.envelope[4]) if kind == "bumpc" else {}
    out = []
    for v in phi.vars:
        p0 = base[v] - _flt(centers.get(v, 0.0))
        dv = dvec[v]
        if dv == 0.0:
            continue
        for k in (flat, cutoff):
            out.extend(((k - p0) / dv, (-k - p0) / dv))
    return out


# -- fast scalar evaluation ---------------------------------------------------


def _compile_poly(terms: Mapping, vars: tuple) -> Callable:
    idx = {v: i for i, v in enumerate(vars)}
    rows = []
    for m, c in terms.items():
        e = [0] * len(vars)
        for v, k in m:
            e[idx[v]] = k
        rows.append((_flt(c), tuple(e)))

    def f(*ys):
        tot = 0.0
        for c, e in rows:
            t = c
            for yi, ei in zip(ys, e):
                if ei:
                    t *= yi ** ei
            tot += t
        return tot

    return f


def _compile_phi(phi) -> Callable:
    vars = phi.vars
    poly = _compile_poly(phi.terms, vars)
    kind = phi.envelope[0]
    if kind == "gauss":
        sigma2 = phi.envelope[1] ** 2
        qf = _compile_poly(phi._qterms(), vars)

        def f(*ys):
            return poly(*ys) * math.exp(-qf(*ys) / sigma2)

        return f
    flat, cutoff, profile = phi.envelope[1:4]
    centers = dict(phi.envelope[4]) if kind == "bumpc" else {}
    cs = [_flt(centers.get(v, 0.0)) for v in vars]
    width = cutoff - flat

    def g(*ys):
        env = 1.0
        for yi, ci in zip(ys, cs):
            s = (abs(yi - ci) - flat) / width
            if s >= 1.0:
                return 0.0
            if s > 0.0:
                env *= _stepdown_value(profile, s)
        return poly(*ys) * env

    return g


# -- three-point geometry -----------------------------------------------------

_VY1, _VY2 = ("y", 1), ("y", 2)
_PAIRS3 = ((1, 2), (1, 3), (2, 3))

# chart rows (y1, y2) as coefficients on (u, v); u is the collapsing pair
# separation, v the surviving one, both determinant-one maps
_CHARTS3 = {
    (1, 2): ((1.0, 1.0), (0.0, 1.0)),
    (1, 3): ((1.0, 0.0), (0.0, 1.0)),
    (2, 3): ((0.0, 1.0), (1.0, 0.0)),
}


def _sep_forms(rows) -> dict:
    (a11, a12), (a21, a22) = rows
    return {
        (1, 2): (a11 - a21, a12 - a22),
        (1, 3): (a11, a12),
        (2, 3): (a21, a22),
    }


def _q3(y1: float, y2: float) -> float:
    # mean squared distance to the barycenter of (y1, y2, 0)
    return (2.0 / 3.0) * (y1 * y1 + y2 * y2 - y1 * y2)


def _q3_bilinear(a, b) -> float:
    return (2.0 / 3.0) * (a[0] * b[0] + a[1] * b[1] - 0.5 * (a[0] * b[1] + a[1] * b[0]))


def _chi3(pair, y1, y2, lo, hi, profile) -> float:
    s12, s13, s23 = y1 - y2, y1, y2
    a, b, c = s12 * s12, s13 * s13, s23 * s23
    tot = a + b + c
    if tot == 0.0:
        return 0.0
    inv = 1.0 / ((hi - lo) * tot)
    h12 = _stepdown_value(profile, (a - lo * tot) * inv)
    h13 = _stepdown_value(profile, (b - lo * tot) * inv)
    h23 = _stepdown_value(profile, (c - lo * tot) * inv)
    z = h12 + h13 + h23
    w = {(1, 2): h12, (1, 3): h13, (2, 3): h23}[pair]
    return w / z


def _qroot_dist(q0: float, q1: float, q2: float, level: float) -> float:
    """Distance from u = 0 to the nearest real root of q(u) = level."""
    c = q0 - level
    if q2 == 0.0:
        return math.inf if q1 == 0.0 else abs(c / q1)
    disc = q1 * q1 - 4.0 * q2 * c
    if disc < 0.0:
        return math.inf
    rt = math.sqrt(disc)
    return min(abs((-q1 - rt) / (2.0 * q2)), abs((-q1 + rt) / (2.0 * q2)))


def _window_line_jets(qline: np.ndarray, A: float, B: float, profile: str, K: int):
    """(jets, trust) of the window along a line where q(u) = qline."""
    q0, q1, q2 = float(qline[0]), float(qline[1]), float(qline[2])
    span = B - A
    s0 = (q0 - A) / span
    if s0 <= 0.0:
        out = np.zeros(K + 1)
        out[0] = 1.0
        return out, _qroot_dist(q0, q1, q2, A)
    if s0 >= 1.0:
        return np.zeros(K + 1), _qroot_dist(q0, q1, q2, B)
    s1, s2 = q1 / span, q2 / span
    outer = _stepdown_jets(profile, s0, K)
    jets = _ps_compose(outer, np.array([0.0, s1, s2]), K)
    m = 0.35 * min(s0, 1.0 - s0)
    if s2 == 0.0:
        trust = math.inf if s1 == 0.0 else m / abs(s1)
    else:
        trust = (-abs(s1) + math.sqrt(s1 * s1 + 4.0 * abs(s2) * m)) / (2.0 * abs(s2))
    return jets, trust


# -- the subtracted test function ---------------------------------------------


class _Psi3:
    """phi - W T^{ord} phi for the three-point chart, stable near the origin.

    Computed as written the subtraction cancels to an absolute noise
    floor ~eps at the origin; inside the ball where the window is
    identically 1 and the Taylor series of phi converges, the explicit
    tail (orders ord+1 .. ord+16) is the same function as a small stable
    sum, so values and line jets switch to it there.
    """

    def __init__(self, phi, window: SmoothWindow | None, ord3: int):
        self.phi = phi
        self.vars = phi.vars
        self.phi_fast = _compile_phi(phi)
        self.t3 = phi.taylor_all(ord3) if (window is not None and ord3 >= 0) else {}
        self.window = window if self.t3 else None
        self.r_mask = 0.0
        self.t_tail = {}
        if self.t3:
            mu_out = float(window.mu)
            self.A, self.B = mu_out * mu_out / 2.0, mu_out * mu_out
            self.wprofile = window.profile
            self.t3_fast = _compile_poly(self.t3, self.vars)
            kser = ord3 + 16
            self.t_tail = {m: c for m, c in phi.taylor_all(kser).items()
                           if sum(e for _, e in m) > ord3}
            r = 0.0
            if phi.envelope[0] == "gauss":
                r = 0.3 * phi._gauss_width_bounds()[0]
            else:
                sr = phi.series_radius()
                if sr:
                    r = 0.9 * sr
            # the mask ball must stay inside the window's flat region:
            # q <= |y|^2 for the canonical form, so 0.67 mu is safe
            self.r_mask = min(r, 0.67 * mu_out)
            self.tail_fast = _compile_poly(self.t_tail, self.vars)

    def value(self, y1: float, y2: float) -> float:
        if self.r_mask and y1 * y1 + y2 * y2 <= self.r_mask * self.r_mask:
            return self.tail_fast(y1, y2)
        val = self.phi_fast(y1, y2)
        if self.t3:
            s = (_q3(y1, y2) - self.A) / (self.B - self.A)
            if s < 1.0:
                val -= _stepdown_value(self.wprofile, s) * self.t3_fast(y1, y2)
        return val

    def line(self, base: tuple, dvec: tuple, K: int):
        bd = {_VY1: base[0], _VY2: base[1]}
        dd = {_VY1: dvec[0], _VY2: dvec[1]}
        dn = math.hypot(dvec[0], dvec[1])
        if self.r_mask:
            b = math.hypot(base[0], base[1])
            if b <= 0.8 * self.r_mask:
                return _poly_line(self.t_tail, bd, dd, K), (self.r_mask - b) / dn
        jets, trust = _phi_line_jets(self.phi, bd, dd, K)
        if self.t3:
            qline = np.array([
                _q3_bilinear(base, base),
                2.0 * _q3_bilinear(base, dvec),
                _q3_bilinear(dvec, dvec),
            ])
            wjets, wtrust = _window_line_jets(qline, self.A, self.B, self.wprofile, K)
            if wjets[0] != 0.0 or wjets.any():
                jets = jets - _ps_mul(wjets, _poly_line(self.t3, bd, dd, K), K)
            trust = min(trust, wtrust)
        return jets, trust

    def line_support(self, base: tuple, dvec: tuple):
        bd = {_VY1: base[0], _VY2: base[1]}
        dd = {_VY1: dvec[0], _VY2: dvec[1]}
        sup = _phi_line_support(self.phi, bd, dd)
        if not self.t3:
            return sup
        qline = (
            _q3_bilinear(base, base),
            2.0 * _q3_bilinear(base, dvec),
            _q3_bilinear(dvec, dvec),
        )
        # window support q <= B: between the roots of q(u) = B
        c, b, a = qline[0] - self.B, qline[1], qline[2]
        disc = b * b - 4.0 * a * c
        if disc <= 0.0:
            return sup
        rt = math.sqrt(disc)
        w = sorted(((-b - rt) / (2.0 * a), (-b + rt) / (2.0 * a)))
        if sup is None:
            return (w[0], w[1])
        return (min(sup[0], w[0]), max(sup[1], w[1]))

    def line_kinks(self, base: tuple, dvec: tuple) -> list:
        bd = {_VY1: base[0], _VY2: base[1]}
        dd = {_VY1: dvec[0], _VY2: dvec[1]}
        out = _phi_line_kinks(self.phi, bd, dd)
        if self.t3:
            q0 = _q3_bilinear(base, base)
            q1 = 2.0 * _q3_bilinear(base, dvec)
            q2 = _q3_bilinear(dvec, dvec)
            for level in (self.A, self.B):
                disc = q1 * q1 - 4.0 * q2 * (q0 - level)
                if disc > 0.0:
                    rt = math.sqrt(disc)
                    out.extend(((-q1 - rt) / (2.0 * q2), (-q1 + rt) / (2.0 * q2)))
        return out


# -- the inner extension pairing ----------------------------------------------


def _even_moment(e: int, hi: float) -> float:
    if e % 2:
        return 0.0
    return 2.0 * hi ** (e + 1) / (e + 1)


def _quad(f, a: float, b: float, pts, cfg: PairingConfig, err_acc: list) -> float:
    if b <= a:
        return 0.0
    inside = sorted(p for p in pts if a < p < b)
    val, err = quad(f, a, b, points=inside or None, limit=cfg.limit,
                    epsabs=cfg.epsabs, epsrel=cfg.epsrel)
    err_acc[0] += abs(err)
    return val


def _inner_pair_d1(exps, local_terms, mu: float, sl, cfg: PairingConfig,
                   err_acc: list) -> float:
    """<P(sum c_b u^b), f du> for one slice: series tail termwise on the
    trusted disc, subtracted quadrature to the window edge, raw outside."""
    jets = sl.jets
    K = len(jets) - 1
    lo, hi = sl.support
    total = 0.0
    for b, c in exps:
        if b >= 0:
            def raw(u, _b=b):
                return u ** _b * sl.f(u)

            total += c * _quad(raw, lo, hi, sl.kinks, cfg, err_acc)
            continue
        order = -b - 1
        delta = min(sl.trust, mu)
        inner = 0.0
        for t in range(order + 1, K + 1):
            if jets[t] != 0.0:
                inner += jets[t] * _even_moment(b + t, delta)
        tco = jets[order::-1]  # descending for Horner

        def sub(u, _b=b, _t=tco):
            tv = 0.0
            for ct in _t:
                tv = tv * u + ct
            return (sl.f(u) - tv) * u ** _b

        def raw(u, _b=b):
            return u ** _b * sl.f(u)

        mid = (_quad(sub, delta, mu, sl.kinks, cfg, err_acc)
               + _quad(sub, -mu, -delta, sl.kinks, cfg, err_acc))
        out = (_quad(raw, mu, hi, sl.kinks, cfg, err_acc)
               + _quad(raw, lo, -mu, sl.kinks, cfg, err_acc))
        total += c * (inner + mid + out)
    for r, cr in local_terms:
        if r <= K:
            total += cr * (-1) ** r * math.factorial(r) * jets[r]
    return total


@dataclass
class _Slice:
    f: Callable
    jets: np.ndarray
    trust: float
    support: tuple
    kinks: list


# -- chart assembly -----------------------------------------------------------


def _chart_term(sys: RSystem, G: MultiplicativeElement, psi: _Psi3, pairjk,
                cfg: PairingConfig, use_chi: bool, err_acc: list) -> float:
    rows = _CHARTS3[pairjk]
    (a11, a12), (a21, a22) = rows
    j, k = pairjk
    (l,) = frozenset({1, 2, 3}) - {j, k}
    part = Partition.of([[j, k], [l]])
    cross, blocks = G.decompose(part)
    u_fn = blocks[frozenset({j, k})].expand()
    exps = [(b, _flt(c)) for b, c in pair_exponents(u_fn).items()]
    if not exps:
        return 0.0
    local = []
    for m, c in sys.pmap.counterterm_dist(u_fn).terms.items():
        local.append((m[0][1] if m else 0, _flt(c)))
    mu = float(sys.pmap.mu)
    sep = _sep_forms(rows)
    fdata = []
    for f in cross.factors:
        al, be = sep[(f.j, f.k)]
        fexp = [(b, _flt(c)) for b, c in pair_exponents(f.fn).items()]
        fdata.append((al, be, fexp, any(b < 0 for b, _ in fexp)))
    K = cfg.series_order
    dvec = (a11, a21)
    fvec = (a12, a22)
    lo_t, hi_t, prof = cfg.pou_lo, cfg.pou_hi, cfg.pou_profile

    def cross_value(u, v):
        out = 1.0
        for al, be, fexp, _neg in fdata:
            s = al * u + be * v
            out *= sum(c * s ** b for b, c in fexp)
        return out

    def outer(v):
        base = (a12 * v, a22 * v)
        sup = psi.line_support(base, dvec)
        if sup is None:
            return 0.0
        jets, trust = psi.line(base, dvec, K)
        for al, be, fexp, neg in fdata:
            a0 = be * v
            fs = np.zeros(K + 1)
            for b, c in fexp:
                fs += c * _affine_pow(a0, al, b, K)
            jets = _ps_mul(jets, fs, K)
            if neg and al != 0.0:
                trust = min(trust, 0.5 * abs(a0 / al))
        if use_chi:
            trust = min(trust, cfg.cone * abs(v))

            def fval(u, _v=v):
                y1, y2 = a11 * u + base[0], a21 * u + base[1]
                w = _chi3(pairjk, y1, y2, lo_t, hi_t, prof)
                if w == 0.0:
                    return 0.0
                return cross_value(u, _v) * w * psi.value(y1, y2)
        else:

            def fval(u, _v=v):
                y1, y2 = a11 * u + base[0], a21 * u + base[1]
                return cross_value(u, _v) * psi.value(y1, y2)

        sl = _Slice(fval, jets, trust, sup, psi.line_kinks(base, dvec))
        return _inner_pair_d1(exps, local, mu, sl, cfg, err_acc)

    R = psi.phi.decay_radius()
    if psi.t3:
        R = max(R, math.sqrt(3.0) * math.sqrt(psi.B))
    V = R * 1.05 + 0.1
    vpts = [0.0]
    qdir = _q3_bilinear(fvec, fvec)
    if psi.t3:
        for level in (psi.A, psi.B):
            r = math.sqrt(level / qdir)
            vpts.extend((r, -r))
    for v, ks in getattr(psi.phi, "var_kinks", lambda: {})().items():
        coef = base_coef = {_VY1: a12, _VY2: a22}[v]
        if coef:
            vpts.extend(kk / coef for kk in ks)
    val, err = quad(outer, -V, V, points=sorted(p for p in vpts if -V < p < V),
                    limit=cfg.limit, epsabs=cfg.epsabs * 10, epsrel=cfg.epsrel)
    err_acc[0] += abs(err)
    return val


def _pair3_d1(sys: RSystem, G: MultiplicativeElement, phi,
              cfg: PairingConfig, *, subtract: bool = True,
              charts=None, use_chi: bool = True) -> float:
    S = frozenset({1, 2, 3})
    if G.S != S:
        raise ValueError("three-point pairing expects S = {1,2,3}")
    sd = G.scaling_degree(S)
    ord3 = sd - 2
    window = None
    if subtract and ord3 >= 0:
        window = SmoothWindow(sys.window_scale, sys.window_profile)
    psi = _Psi3(phi, window, ord3)
    total = 0.0
    err_acc = [0.0]
    for pair in (charts if charts is not None else _PAIRS3):
        total += _chart_term(sys, G, psi, pair, cfg, use_chi, err_acc)
    if err_acc[0] > cfg.err_cap * max(1.0, abs(total)):
        raise RuntimeError(
            f"quadrature did not converge pairing over charts {charts or _PAIRS3}: "
            f"error estimate {err_acc[0]:.2e} against value {total:.6e}")
    return total


# -- the renormalized object ---------------------------------------------------


@dataclass(frozen=True)
class BlockTerm:
    """One two-block restriction: G = cross * product of block factors."""

    part: Partition
    cross: MultiplicativeElement
    blocks: tuple  # ((frozenset, RenormDist), ...) for blocks of size >= 2


@dataclass(frozen=True)
class RenormDist:
    """R_S G (or the secondary map when punctured) as a lazy recursion tree.

    kind "leaf" marks elements integrable near every diagonal, paired by
    direct quadrature; "node" carries the two-block restrictions whose
    factorized forms define the object off the total diagonal, with the
    primary extension crossing it.
    """

    sys: RSystem
    G: MultiplicativeElement
    sd: int
    kind: str
    terms: tuple
    punctured: bool = False

    @property
    def S(self) -> frozenset:
        return self.G.S

    @property
    def D(self) -> int:
        return self.G.D

    def __post_init__(self):
        for term in self.terms:
            for b, sub in term.blocks:
                if not (b < self.S):
                    raise ValueError("block factors must live on strictly smaller sets")
                if sub.G.S != b:
                    raise ValueError("block factor attached to the wrong set")

    def restrict(self, part: Partition):
        """(G_P, {block: R_block G_block}): the factorized restriction to F_P."""
        return restrict(self, part)

    def pair(self, phi, config: PairingConfig | None = None):
        return pair(self, phi, config=config)


def _collapse_sd(G: MultiplicativeElement, sub: frozenset) -> int:
    tot = 0
    for f in G.factors:
        if f.j in sub and f.k in sub:
            tot += f.fn.scaling_degree(f.fn.S)
    return tot


def _is_direct(G: MultiplicativeElement) -> bool:
    pts = sorted(G.S)
    for size in range(2, len(pts) + 1):
        for sub in itertools.combinations(pts, size):
            if _collapse_sd(G, frozenset(sub)) >= G.D * (size - 1):
                return False
    return True


def _two_block_partitions(S: frozenset) -> list:
    pts = sorted(S)
    out = []
    rest = pts[1:]
    for r in range(0, len(rest)):
        for extra in itertools.combinations(rest, r):
            a = frozenset((pts[0],) + extra)
            b = S - a
            if b:
                out.append(Partition.of([a, b]))
    return out


def _check_gluing(G: MultiplicativeElement, part: Partition, cross, blocks):
    # symbolic witness: the factorized form must recompose to G exactly
    got = sorted((f.j, f.k, str(f.fn)) for f in cross.factors)
    for b, sub in blocks.items():
        got += sorted((f.j, f.k, str(f.fn)) for f in sub.factors)
    want = sorted((f.j, f.k, str(f.fn)) for f in G.factors)
    if sorted(got) != want:
        raise ValueError(f"inconsistent decomposition across {part}")


def renormalize(sys, G: MultiplicativeElement, *, _punctured: bool = False) -> RenormDist:
    """R_S G = P_S(secondary map of G), as a lazy recursion tree."""
    sys = _as_system(sys)
    if sys.D not in (1, 2) or G.D != sys.D:
        raise ValueError("renormalization maps are implemented for D in {1, 2}")
    n = len(G.S)
    if n > 4:
        raise ValueError("configurations beyond four points are out of reach here")
    sd = G.scaling_degree(G.S)
    if n == 1 or _is_direct(G):
        return RenormDist(sys, G, sd, "leaf", (), _punctured)
    terms = []
    for part in _two_block_partitions(G.S):
        cross, blocks = G.decompose(part)
        _check_gluing(G, part, cross, blocks)
        sub = tuple(
            (b, renormalize(sys, blocks[b]))
            for b in sorted(blocks, key=min) if len(b) >= 2
        )
        terms.append(BlockTerm(part, cross, sub))
    return RenormDist(sys, G, sd, "node", tuple(terms), _punctured)


def secondary_map(sys, G: MultiplicativeElement) -> RenormDist:
    """The gluing of lower-order maps over the punctured space; its
    restriction to each F_P is the factorized form held in the tree, and
    recomposition to G is asserted for every two-block partition."""
    return renormalize(sys, G, _punctured=True)


def restrict(R: RenormDist, part: Partition):
    """(G_P, {block: R_block G_block}) whose product is R G on F_P."""
    if part.ground_set != R.S:
        raise ValueError("partition does not cover the configuration")
    if not part.is_proper():
        raise ValueError("restriction needs a proper partition")
    cross, blocks = R.G.decompose(part)
    out = {}
    for b, sub in blocks.items():
        if len(b) >= 2:
            out[b] = renormalize(R.sys, sub)
    return cross, out


# -- pairings -----------------------------------------------------------------


def _pair2(sys: RSystem, G, phi, cfg: PairingConfig, punctured: bool):
    u_fn = G.expand() if isinstance(G, MultiplicativeElement) else G
    if not punctured:
        val = extend(sys.pmap, u_fn, sys.D).pair(phi)
        return val.real if abs(val.imag) < 1e-9 * (1 + abs(val)) else val
    if sys.D != 1:
        raise NotImplementedError("punctured two-point pairings cover D=1")
    exps = [(b, _flt(c)) for b, c in pair_exponents(u_fn).items()]
    R = phi.decay_radius()
    err_acc = [0.0]

    def f(u):
        return sum(c * u ** b for b, c in exps) * phi.value(u)

    return (_quad(f, 0.0, R, (), cfg, err_acc)
            + _quad(f, -R, 0.0, (), cfg, err_acc))


def _pair_leaf(R: RenormDist, phi, cfg: PairingConfig):
    n = len(R.S)
    if n == 2:
        return _pair2(R.sys, R.G, phi, cfg, R.punctured)
    if n == 3 and R.D == 1:
        g = _compile_gfull(R.G)
        pf = _compile_phi(phi)
        Rr = phi.decay_radius()
        val, err = dblquad(lambda y2, y1: g(y1, y2) * pf(y1, y2),
                           -Rr, Rr, -Rr, Rr,
                           epsabs=cfg.epsabs * 100, epsrel=1e-8)
        return val
    raise NotImplementedError("direct pairings cover n <= 3 at D=1")


def _compile_gfull(G: MultiplicativeElement) -> Callable:
    sep = _sep_forms(((1.0, 0.0), (0.0, 1.0)))  # identity chart (u, v) = (y1, y2)
    fdata = []
    for f in G.factors:
        al, be = sep[(f.j, f.k)]
        fexp = [(b, _flt(c)) for b, c in pair_exponents(f.fn).items()]
        fdata.append((al, be, fexp))

    def g(y1, y2):
        out = 1.0
        for al, be, fexp in fdata:
            s = al * y1 + be * y2
            out *= sum(c * s ** b for b, c in fexp)
        return out

    return g


def pair(R: RenormDist, phi, *, config: PairingConfig | None = None):
    """<R G, phi> (or the secondary map's pairing when R is punctured, in
    which case phi must vanish near the total diagonal)."""
    cfg = config or PairingConfig()
    n = len(R.S)
    if R.kind == "leaf" and not (n == 3 and R.punctured):
        return _pair_leaf(R, phi, cfg)
    if n == 2:
        return _pair2(R.sys, R.G, phi, cfg, R.punctured)
    if n == 3 and R.D == 1:
        return _pair3_d1(R.sys, R.G, phi, cfg, subtract=not R.punctured)
    raise NotImplementedError(
        "numeric pairings cover two points (D=1,2) and three points (D=1)")


def pair_restricted(R: RenormDist, part: Partition, phi, *,
                    config: PairingConfig | None = None):
    """Pair the factorized restriction G_P * prod R G_block against phi.

    Only valid when phi is supported inside F_P; this is the right-hand
    side of the restriction identity, computed without the partition of
    unity or the outer subtraction.
    """
    cfg = config or PairingConfig()
    if part.ground_set != R.S or not part.is_proper():
        raise ValueError("restricted pairing needs a proper partition of S")
    n = len(R.S)
    if n == 2:
        # the only proper partition is discrete: the bare function
        return _pair2(R.sys, R.G, phi, cfg, punctured=True)
    if n != 3 or R.D != 1:
        raise NotImplementedError("restricted pairings cover n <= 3 at D=1")
    if part.is_discrete():
        g = _compile_gfull(R.G)
        pf = _compile_phi(phi)
        Rr = phi.decay_radius()
        val, err = dblquad(lambda y2, y1: g(y1, y2) * pf(y1, y2),
                           -Rr, Rr, -Rr, Rr,
                           epsabs=cfg.epsabs * 100, epsrel=1e-8)
        return val
    pairjk = tuple(sorted(next(b for b in part.blocks if len(b) == 2)))
    return _pair3_d1(R.sys, R.G, phi, cfg, subtract=False,
                     charts=(pairjk,), use_chi=False)


# -- permutation action --------------------------------------------------------


def relabel_element(G: MultiplicativeElement, perm: Mapping) -> MultiplicativeElement:
    """(sigma G)(x) = G(x_{sigma(1)}, ..., x_{sigma(n)}), with the sign of
    each difference folded into the pair coefficients."""
    out = {}
    for f in G.factors:
        a, b = perm[f.j], perm[f.k]
        exps = pair_exponents(f.fn)
        if a > b:
            a, b = b, a
            if G.D == 1:
                exps = {key: c * Fraction(-1) ** (key % 2) for key, c in exps.items()}
            else:
                exps = {key: c * Fraction(-1) ** ((key[0] + key[1]) % 2)
                        for key, c in exps.items()}
        out[(a, b)] = from_exponents(G.D, {a, b}, exps)
    S = frozenset(perm[j] for j in G.S)
    return MultiplicativeElement.from_pairs(G.D, S, out)


def relabel_testfn(phi, perm: Mapping, S) -> "object":
    """(sigma phi)(x) = phi(x_{sigma(1)}, ...) in the chart anchored at max S."""
    S = frozenset(S)
    n = max(S)
    sub = {}
    for j in sorted(S - {n}):
        row: dict = {}
        sj, sn = perm[j], perm[n]
        if sj != n:
            row[("y", sj)] = row.get(("y", sj), 0) + 1
        if sn != n:
            row[("y", sn)] = row.get(("y", sn), 0) - 1
        sub[("y", j)] = {v: c for v, c in row.items() if c}
    return phi.compose_linear(sub)


def invert_perm(perm: Mapping) -> dict:
    return {v: k for k, v in perm.items()}
