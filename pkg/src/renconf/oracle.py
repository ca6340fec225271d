"""Brute-force numerical pairings of renormalized objects with test functions.

Everything here is deliberately independent of the production evaluation
path: quadrature is a self-contained vectorized Gauss-Kronrod scheme,
jets of composite inner integrands are extracted by finite differences,
and the partition of unity is assembled from scale-free distance ratios.
Agreement between this module and the symbolic/production machinery is
evidence, not construction.

Supported numerically: one difference variable for D in {1,2}; two
difference variables (three points) for D=1.  That covers every pairing
the test suites request; higher configurations pass through symbolically
only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .corefn import ConfFn, MultiplicativeElement, chart_vars, decompose
from .extension import PMap, SmoothWindow, _bump_profile, pair_exponents, quadratic_form
from .localdist import LocalDist
from .partitions import Partition
from .poly import _mono_mul
from .scalars import Scalar


# -- vectorized adaptive Gauss-Kronrod quadrature -----------------------------

_XK_HALF = [
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0,
]
_WK_HALF = [
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
]
_WG_HALF = [0.129484966168870, 0.279705391489277, 0.381830050505119,
            0.417959183673469]

_NODES = np.array([-x for x in _XK_HALF[:-1]] + list(reversed(_XK_HALF)))
_WK = np.array(_WK_HALF[:-1] + list(reversed(_WK_HALF)))
# Gauss nodes sit at every second Kronrod node, center included
_GSEL = np.arange(1, 15, 2)
_WG = np.array(_WG_HALF[:-1] + list(reversed(_WG_HALF)))


def _gk_batch(f, segs):
    a = np.array([s[0] for s in segs])
    b = np.array([s[1] for s in segs])
    mid = (a + b) / 2.0
    half = (b - a) / 2.0
    pts = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = np.asarray(f(pts.ravel())).reshape(pts.shape)
    ik = (vals * _WK[None, :]).sum(axis=1) * half
    ig = (vals[:, _GSEL] * _WG[None, :]).sum(axis=1) * half
    return ik, np.abs(ik - ig)


def adaptive_quad(f, a: float, b: float, *, breakpoints: Sequence[float] = (),
                  tol: float = 1e-10, max_segments: int = 2000):
    """Integrate a vectorized callable; returns (value, error estimate).

    Initial subdivision honors the breakpoints (singular or kinked
    abscissae); afterwards the worst segments are bisected until the
    summed Kronrod-Gauss discrepancy falls below tol.
    """
    if b <= a:
        return 0.0, 0.0
    cuts = sorted({float(a), float(b), *(float(p) for p in breakpoints if a < p < b)})
    segs = list(zip(cuts[:-1], cuts[1:]))
    vals, errs = _gk_batch(f, segs)
    vals, errs = list(vals), list(errs)
    while sum(errs) > tol and len(segs) < max_segments:
        worst = sorted(range(len(segs)), key=lambda i: -errs[i])[:8]
        worst = [i for i in worst if errs[i] > tol / max(len(segs), 1)]
        if not worst:
            break
        new_segs = []
        for i in worst:
            lo, hi = segs[i]
            mid = (lo + hi) / 2.0
            new_segs += [(lo, mid), (mid, hi)]
        nv, ne = _gk_batch(f, new_segs)
        for pos, i in enumerate(sorted(worst, reverse=True)):
            segs.pop(i), vals.pop(i), errs.pop(i)
        segs += new_segs
        vals += list(nv)
        errs += list(ne)
    return sum(vals), float(sum(errs))


def local_taylor(f, order: int, h: float, extra: int = 6):
    """Taylor coefficients of a smooth callable at 0 by a scaled fit.

    Least-squares polynomial of degree order+extra on Chebyshev points in
    [-h, h]; returns (coeffs[0..order+extra], error estimate over the first
    order+1 of them from an h/2 rerun).  The tail coefficients are noisier
    and only safe inside a radius well below h.
    """
    deg = order + extra

    def run(hh):
        npts = 2 * deg + 5
        ts = np.cos(np.pi * (np.arange(npts) + 0.5) / npts)
        ys = np.asarray(f(ts * hh))
        c = np.polynomial.polynomial.polyfit(ts, ys, deg)
        return np.array([c[r] / hh ** r for r in range(deg + 1)])

    t1 = run(h)
    t2 = run(h / 2.0)
    return t2, np.abs(t1 - t2)


# -- exact-jet test functions --------------------------------------------------


def _pmul(a: dict, b: dict, max_order: int | None = None) -> dict:
    out: dict = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = _mono_mul(ma, mb)
            if max_order is not None and sum(e for _, e in m) > max_order:
                continue
            out[m] = out.get(m, 0.0) + ca * cb
    return {m: c for m, c in out.items() if c != 0}


def _peval(terms: dict, point: Mapping) -> np.ndarray | complex:
    total = 0.0
    for m, c in terms.items():
        v = c
        for var, e in m:
            v = v * point[var] ** e
        total = total + v
    return total


def _pderiv(terms: dict, var) -> dict:
    out: dict = {}
    for m, c in terms.items():
        d = dict(m)
        e = d.get(var, 0)
        if not e:
            continue
        d[var] = e - 1
        mono = tuple(sorted((v, k) for v, k in d.items() if k))
        out[mono] = out.get(mono, 0.0) + c * e
    return out


def _psub_linear(terms: dict, sub: Mapping) -> dict:
    """Substitute each variable by a linear form given as {var: {newvar: coeff}}."""
    out = {(): 0.0}
    acc: dict = {}
    for m, c in terms.items():
        piece = {(): c}
        for var, e in m:
            lin = {((v, 1),): cc for v, cc in sub[var].items() if cc}
            for _ in range(e):
                piece = _pmul(piece, lin)
        for mm, cc in piece.items():
            acc[mm] = acc.get(mm, 0.0) + cc
    return {m: c for m, c in acc.items() if c != 0}


@dataclass(eq=False)
class TestFunction:
    """Polynomial times an envelope with exactly computable jets.

    envelope: ("gauss", sigma, qterms) with qterms a quadratic form over
    vars (None selects sum of squares for D=1, z*w per pair for D=2), or
    ("bump", flat, cutoff, profile) which is identically 1 inside radius
    flat and 0 outside cutoff, per variable (radial for D=2).
    """

    D: int
    vars: tuple
    terms: dict
    envelope: tuple

    @staticmethod
    def gaussian(D: int, S, terms: Mapping, sigma: float = 1.0) -> "TestFunction":
        vars = tuple(chart_vars(D, frozenset(S)))
        return TestFunction(D, vars, dict(terms), ("gauss", float(sigma), None))

    @staticmethod
    def bump(D: int, S, terms: Mapping, flat: float = 0.5, cutoff: float = 1.0,
             profile: str = "exp1") -> "TestFunction":
        vars = tuple(chart_vars(D, frozenset(S)))
        return TestFunction(D, vars, dict(terms), ("bump", float(flat), float(cutoff), profile))

    @staticmethod
    def bump_at(D: int, S, terms: Mapping, centers: Mapping, flat: float = 0.25,
                cutoff: float = 0.5, profile: str = "exp1") -> "TestFunction":
        """Bump translated away from the origin; punctured support when every
        center lies beyond the cutoff radius (then all jets at 0 vanish)."""
        vars = tuple(chart_vars(D, frozenset(S)))
        cen = tuple((v, complex(centers.get(v, 0.0))) for v in vars)
        return TestFunction(D, vars, dict(terms),
                            ("bumpc", float(flat), float(cutoff), profile, cen))

    # - geometry -

    def _qterms(self) -> dict:
        kind = self.envelope[0]
        if kind != "gauss":
            raise ValueError("quadratic form only exists for the gauss envelope")
        q = self.envelope[2]
        if q is not None:
            return q
        if self.D == 1:
            return {((v, 2),): 1.0 for v in self.vars}
        out = {}
        zs = [v for v in self.vars if v[0] == "z"]
        for vz in zs:
            vw = ("w", vz[1])
            out[tuple(sorted(((vz, 1), (vw, 1))))] = 1.0
        return out

    def _gauss_width_bounds(self) -> tuple:
        """(narrowest, widest) e-folding widths of the gauss envelope.

        The quadratic form need not be the unit one (collapse probes rescale
        it), so both the support extent and any series-based radius must be
        read off its extreme eigenvalues."""
        sigma = self.envelope[1]
        if any(v[0] != "y" for v in self.vars):
            return sigma, sigma
        idx = {v: i for i, v in enumerate(self.vars)}
        M = np.zeros((len(idx), len(idx)))
        for m, c in self._qterms().items():
            if sum(e for _, e in m) != 2:
                continue
            vs = [v for v, e in m for _ in range(e)]
            i, j = idx[vs[0]], idx[vs[1]]
            if i == j:
                M[i, i] += float(np.real(c))
            else:
                M[i, j] += float(np.real(c)) / 2
                M[j, i] += float(np.real(c)) / 2
        ev = np.linalg.eigvalsh(M)
        if ev[0] <= 0 or ev[-1] <= 0:
            return sigma, sigma
        return sigma / math.sqrt(ev[-1]), sigma / math.sqrt(ev[0])

    def decay_radius(self) -> float:
        if self.envelope[0] == "gauss":
            return 8.0 * self._gauss_width_bounds()[1]
        if self.envelope[0] == "bumpc":
            return max(abs(c) for _, c in self.envelope[4]) + self.envelope[2]
        return self.envelope[2]

    def flat_radius(self) -> float | None:
        return self.envelope[1] if self.envelope[0] == "bump" else None

    def series_radius(self) -> float | None:
        """Radius around 0 on which the Taylor series represents the function
        (None means everywhere)."""
        kind = self.envelope[0]
        if kind == "gauss":
            return None
        if kind == "bump":
            return self.envelope[1]
        worst = max(abs(c) for _, c in self.envelope[4])
        if worst + 1e-12 < self.envelope[1]:
            return self.envelope[1] - worst
        return 0.0

    def radial_kinks(self) -> tuple:
        """Radii where the envelope switches regime along a coordinate axis."""
        kind = self.envelope[0]
        if kind == "gauss":
            return ()
        flat, cutoff = self.envelope[1], self.envelope[2]
        if kind == "bump":
            return (flat, cutoff)
        out = set()
        for _, c in self.envelope[4]:
            for k in (flat, cutoff):
                out.update((abs(abs(c.real) - k), abs(c.real) + k))
        return tuple(sorted(out))

    def var_kinks(self) -> dict:
        """Per-variable coordinate values where the envelope switches regime."""
        kind = self.envelope[0]
        if kind == "gauss" or self.D != 1:
            return {}
        flat, cutoff = self.envelope[1], self.envelope[2]
        centers = dict(self.envelope[4]) if kind == "bumpc" else {}
        out = {}
        for v in self.vars:
            c = float(complex(centers.get(v, 0.0)).real)
            out[v] = (c - cutoff, c - flat, c + flat, c + cutoff)
        return out

    def support_hints(self):
        """(angles, radii) where the support has corners in a polar chart.

        Only a translated bump on two variables is localized enough to hide
        from a coarse angular sweep; everything else returns no hints."""
        if self.envelope[0] != "bumpc" or len(self.vars) != 2:
            return [], []
        cut = self.envelope[2]
        c1, c2 = (float(c.real) for _, c in self.envelope[4])
        angles, radii = [], []
        for s1 in (-cut, 0.0, cut):
            for s2 in (-cut, 0.0, cut):
                p1, p2 = c1 + s1, c2 + s2
                angles.append(math.atan2(p2, p1) % (2 * math.pi))
                radii.append(math.hypot(p1, p2))
        return sorted(set(angles)), sorted(set(radii))

    # - evaluation -

    def _env_value(self, point: Mapping):
        kind = self.envelope[0]
        if kind == "gauss":
            sigma = self.envelope[1]
            q = _peval(self._qterms(), point)
            return np.exp(-np.real(q) / sigma ** 2)
        flat, cutoff, profile = self.envelope[1:4]
        centers = dict(self.envelope[4]) if kind == "bumpc" else {}
        rho = _bump_profile(profile)
        env = 1.0
        if self.D == 1:
            radii = [np.abs(point[v] - np.real(centers.get(v, 0.0))) for v in self.vars]
        else:
            radii = []
            for tag, j in self.vars:
                if tag != "z":
                    continue
                dz = point[("z", j)] - centers.get(("z", j), 0.0)
                dw = point[("w", j)] - centers.get(("w", j), 0.0)
                radii.append(np.sqrt(np.abs(np.real(dz * dw))))
        for r in radii:
            s = np.clip((r - flat) / (cutoff - flat), 0.0, 1.0)
            num = rho(1.0 - s)
            env = env * np.where(num + rho(s) > 0, num / np.maximum(num + rho(s), 1e-300), 0.0)
        return env

    def value(self, *coords):
        """Evaluate at chart coordinates, positionally matching self.vars."""
        point = dict(zip(self.vars, coords))
        return _peval(self.terms, point) * self._env_value(point)

    def value_xy(self, x1, x2):
        """D=2 single-pair evaluation at real coordinates."""
        z = np.asarray(x1) + 1j * np.asarray(x2)
        w = np.conj(z)
        (j,) = {jj for _, jj in self.vars}
        point = {("z", j): z, ("w", j): w}
        return _peval(self.terms, point) * self._env_value(point)

    # - exact jets -

    def _env_series(self, max_order: int) -> dict:
        kind = self.envelope[0]
        if kind == "bump":
            return {(): 1.0}
        if kind == "bumpc":
            flat, cutoff = self.envelope[1], self.envelope[2]
            centers = dict(self.envelope[4])
            if any(abs(c) > cutoff for c in centers.values()):
                return {}  # support excludes the origin: every jet vanishes
            if all(abs(c) + 1e-12 < flat for c in centers.values()):
                return {(): 1.0}  # origin sits in the flat region
            raise ValueError("jets of a shifted bump need the origin flat or excluded")
        sigma = self.envelope[1]
        q = {m: -c / sigma ** 2 for m, c in self._qterms().items()}
        out = {(): 1.0}
        power = {(): 1.0}
        for j in range(1, max_order // 2 + 1):
            power = _pmul(power, q, max_order)
            if not power:
                break
            for m, c in power.items():
                out[m] = out.get(m, 0.0) + c / math.factorial(j)
        return out

    def taylor_all(self, max_order: int) -> dict:
        """Taylor coefficients at the origin up to total order max_order."""
        if max_order < 0:
            return {}
        full = _pmul(self.terms, self._env_series(max_order), None)
        return {m: c for m, c in full.items() if sum(e for _, e in m) <= max_order}

    def taylor_1d(self, t: int) -> float:
        (v,) = self.vars
        tay = self.taylor_all(t)
        m = ((v, t),) if t else ()
        return tay.get(m, 0.0)

    def taylor_2d(self, max_order: int) -> dict:
        out = {}
        for m, c in self.taylor_all(max_order).items():
            exps = {v[0]: e for v, e in m}
            out[(exps.get("z", 0), exps.get("w", 0))] = c
        return out

    def taylor(self, mono) -> float:
        tay = self.taylor_all(sum(e for _, e in mono))
        return tay.get(tuple(sorted(mono)), 0.0)

    # - algebra -

    def derivative(self, var) -> "TestFunction":
        kind = self.envelope[0]
        if kind == "gauss":
            sigma = self.envelope[1]
            q = self._qterms()
            dq = _pderiv(q, var)
            extra = _pmul(self.terms, {m: -c / sigma ** 2 for m, c in dq.items()})
            new = _pderiv(self.terms, var)
            for m, c in extra.items():
                new[m] = new.get(m, 0.0) + c
            return TestFunction(self.D, self.vars, new, ("gauss", sigma, q))
        # valid wherever the bump is flat; jets at 0 are what tests use
        return TestFunction(self.D, self.vars, _pderiv(self.terms, var), self.envelope)

    def jet_at(self, point: Mapping, mono) -> float:
        """Exact Taylor coefficient at an arbitrary base point."""
        f = self
        fact = 1
        for var, e in mono:
            for _ in range(e):
                f = f.derivative(var)
            fact *= math.factorial(e)
        coords = [point[v] for v in f.vars]
        return f.value(*coords) / fact

    def mul_poly(self, pterms: Mapping) -> "TestFunction":
        return TestFunction(self.D, self.vars, _pmul(self.terms, dict(pterms)), self.envelope)

    def compose_linear(self, sub: Mapping) -> "TestFunction":
        """Precompose with a linear change of chart variables."""
        kind = self.envelope[0]
        if kind != "gauss":
            raise ValueError("linear composition implemented for gauss envelopes")
        new_terms = _psub_linear(self.terms, sub)
        new_q = _psub_linear(self._qterms(), sub)
        return TestFunction(self.D, self.vars, new_terms,
                            ("gauss", self.envelope[1], new_q))

    def collapse_probe(self, lam: float, codim: int) -> "TestFunction":
        """phi_lam = lam^{-codim} phi(./lam), the mass-preserving collapse probe."""
        scaled = {m: c * lam ** (-sum(e for _, e in m) - codim) for m, c in self.terms.items()}
        kind = self.envelope[0]
        if kind == "gauss":
            q = {m: c / lam ** 2 for m, c in self._qterms().items()}
            env = ("gauss", self.envelope[1], q)
        elif kind == "bump":
            env = ("bump", self.envelope[1] * lam, self.envelope[2] * lam, self.envelope[3])
        else:
            cen = tuple((v, c * lam) for v, c in self.envelope[4])
            env = ("bumpc", self.envelope[1] * lam, self.envelope[2] * lam,
                   self.envelope[3], cen)
        return TestFunction(self.D, self.vars, scaled, env)

    def jet_slice(self, slice_vars: tuple, mono) -> "TestFunction":
        """Taylor-coefficient function of the sliced variables at 0.

        Needs an envelope separable across the slice: the default diagonal
        gauss or a bump (flat at 0, so the slice jets see only the poly).
        """
        keep = tuple(v for v in self.vars if v not in slice_vars)
        want = {v: e for v, e in mono}
        if self.envelope[0] == "bumpc":
            raise ValueError("jet_slice supports gauss and centered bump envelopes")
        if self.envelope[0] == "gauss":
            if self.envelope[2] is not None:
                raise ValueError("jet_slice needs a separable envelope")
            order = sum(want.values())
            series = {(): 1.0}
            for v in slice_vars:
                sv = {}
                sigma = self.envelope[1]
                for j in range(0, order // 2 + 1):
                    m = ((v, 2 * j),) if j else ()
                    sv[m] = (-1 / sigma ** 2) ** j / math.factorial(j)
                series = _pmul(series, sv, None)
            env = ("gauss", self.envelope[1], None)
        else:
            series = {(): 1.0}
            env = self.envelope
        expanded = _pmul(self.terms, series, None)
        out: dict = {}
        for m, c in expanded.items():
            sl = {v: e for v, e in m if v in slice_vars}
            if sl != {v: e for v, e in want.items() if e}:
                continue
            rest = tuple((v, e) for v, e in m if v not in slice_vars)
            out[rest] = out.get(rest, 0.0) + c
        return TestFunction(self.D, keep, out, env)


def fd_jet(phi: TestFunction, var, order: int, h: float = 0.05) -> float:
    """Central finite-difference Taylor coefficient along one variable at 0."""

    def f(ts):
        coords = []
        for v in phi.vars:
            coords.append(ts if v == var else np.zeros_like(ts))
        return phi.value(*coords)

    coeffs, _deltas = local_taylor(f, order, h)
    return float(coeffs[order])


# -- partition of unity ---------------------------------------------------------


def _smoothstep(profile: str, lo: float, hi: float):
    rho = _bump_profile(profile)

    def h(t):
        s = np.clip((np.asarray(t, dtype=float) - lo) / (hi - lo), 0.0, 1.0)
        num = rho(1.0 - s)
        den = num + rho(s)
        return np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)

    return h


def pou_weights(x12, x13, x23, *, profile: str = "exp1",
                lo: float = 0.25, hi: float = 0.5) -> dict:
    """Scale-free partition of unity subordinate to the three-point covering.

    Each pair gets h(|within| / hmin(cross distances)) with hmin the
    harmonic half-min (smooth, comparable to min); the thresholds keep the
    three pair bumps disjoint, and the discrete weight is the complement.
    """
    step = _smoothstep(profile, lo, hi)
    r12, r13, r23 = np.abs(x12), np.abs(x13), np.abs(x23)
    tiny = 1e-300

    def hmin(a, b):
        return a * b / np.maximum(a + b, tiny)

    b12 = step(r12 / np.maximum(hmin(r13, r23), tiny))
    b13 = step(r13 / np.maximum(hmin(r12, r23), tiny))
    b23 = step(r23 / np.maximum(hmin(r12, r13), tiny))
    return {(1, 2): b12, (1, 3): b13, (2, 3): b23,
            "disc": 1.0 - b12 - b13 - b23}


# -- pairing driver -------------------------------------------------------------


@dataclass(frozen=True)
class OracleConfig:
    """Evaluation knobs.  profile/ratio_* shape the partition of unity only;
    the outer subtraction window is scheme data and passed separately."""

    tol: float = 1e-8
    profile: str = "exp1"
    ratio_lo: float = 0.25
    ratio_hi: float = 0.5
    fd_extra: int = 6
    fd_hmax: float = 0.01
    series_order: int = 36
    max_segments: int = 2000


def _sc_float(c) -> complex:
    if isinstance(c, Scalar):
        return complex(c.numeric())
    return complex(c)


def _local_pairing(L: LocalDist, phi: TestFunction) -> complex:
    """<L, phi> for a local distribution at the total diagonal."""
    total = 0.0 + 0.0j
    for m, c in L.terms.items():
        nr = sum(e for _, e in m)
        rfact = math.prod(math.factorial(e) for _, e in m)
        total += _sc_float(c) * (-1) ** nr * rfact * phi.taylor(m)
    return total


def _even_moment(e: int, lo: float, hi: float) -> float:
    # int_{lo<=|u|<=hi} u^e du
    if e % 2 == 1:
        return 0.0
    return 2.0 * (hi ** (e + 1) - lo ** (e + 1)) / (e + 1)


def _abs_mass(e: int, lo: float, hi: float) -> float:
    # int_{lo<=|u|<=hi} |u|^e du, the sensitivity of the pairing to a unit
    # perturbation of the coefficient of u^{-b-e} over that annulus
    if hi <= lo:
        return 0.0
    if e == -1:
        return 2.0 * math.log(hi / lo)
    return abs(2.0 * (hi ** (e + 1) - lo ** (e + 1)) / (e + 1))


def _lam_floats(pmap: PMap) -> dict:
    return {k: _sc_float(c) for k, c in pmap.lam}


def _laurent_pairing_d1(exps: Mapping, pmap: PMap, f, jets, R: float,
                        cfg: OracleConfig, breakpoints=(), fit_radius=None,
                        fd_fit=False, jet_errs=None):
    """<P(sum_b c_b u^b), f du> with jets[t] the Taylor coefficients of f at 0.

    Decomposition per generator: Taylor-remainder terms integrated exactly
    on the disc |u| <= d0 where the jet expansion represents f (evaluating
    f - Tf there directly would drown order-zero remainders in cancellation
    noise), subtracted integral on d0 <= |u| <= delta, raw outside, and the
    exact window moments of the subtracted part on delta <= |u| <= mu (odd
    moments vanish; no logarithms in D=1).

    fd_fit marks jets beyond jets[0] as fitted rather than exact; the
    order-zero subtraction then integrates directly (its cancellation noise
    is log-integrable) instead of trusting fitted tail coefficients.
    """
    mu = float(pmap.mu)
    lam = _lam_floats(pmap)
    jets = list(jets)
    total = 0.0
    err = 0.0
    for b, cb in exps.items():
        c = _sc_float(cb).real
        ord2 = -b - 1
        if ord2 < 0:
            val, e1 = adaptive_quad(lambda u: u ** b * f(u), -R, R,
                                    breakpoints=(0.0, *breakpoints), tol=cfg.tol,
                                    max_segments=cfg.max_segments)
            total += c * val
            err += abs(c) * e1
        else:
            delta = min(mu, R) * 0.5
            d0 = delta if fit_radius is None else max(0.0, min(fit_radius, delta))
            if fd_fit and ord2 == 0:
                d0 = 0.0
            tay = jets[: ord2 + 1]
            inner = sum(jets[t] * _even_moment(b + t, 0.0, d0)
                        for t in range(ord2 + 1, len(jets)))

            def subtracted(u, _tay=tay, _b=b):
                fu = f(u)
                tp = sum(t_c * u ** t for t, t_c in enumerate(_tay))
                return u ** _b * (fu - tp)

            v1 = e1 = 0.0
            if d0 < delta * (1.0 - 1e-12):
                v1p, e1p = adaptive_quad(subtracted, d0, delta,
                                         breakpoints=breakpoints,
                                         tol=cfg.tol, max_segments=cfg.max_segments)
                v1m, e1m = adaptive_quad(subtracted, -delta, -d0,
                                         breakpoints=breakpoints,
                                         tol=cfg.tol, max_segments=cfg.max_segments)
                v1, e1 = v1p + v1m, e1p + e1m
            v2, e2 = adaptive_quad(lambda u: u ** b * f(u), -R, -delta,
                                   breakpoints=breakpoints, tol=cfg.tol,
                                   max_segments=cfg.max_segments)
            v3, e3 = adaptive_quad(lambda u: u ** b * f(u), delta, R,
                                   breakpoints=breakpoints, tol=cfg.tol,
                                   max_segments=cfg.max_segments)
            moment = sum(tay[t] * _even_moment(b + t, delta, mu)
                         for t in range(ord2 + 1))
            total += c * (inner + v1 + v2 + v3 - moment)
            err += abs(c) * (e1 + e2 + e3)
            if jet_errs is not None:
                # propagate coefficient uncertainty through its actual uses:
                # the subtraction polynomial over d0<=|u|<=mu and the
                # remainder moments on |u|<=d0
                for t in range(len(jets)):
                    je = jet_errs[t] if t < len(jet_errs) else 0.0
                    if not je:
                        continue
                    if (b + t) % 2 != 0:
                        # odd powers cancel identically between the two
                        # sides and drop out of every even moment: a wrong
                        # odd coefficient cannot move the value
                        continue
                    if t <= ord2:
                        err += abs(c) * je * _abs_mass(b + t, max(d0, 1e-300), mu)
                    else:
                        err += abs(c) * je * _abs_mass(b + t, 0.0, d0)
        for key, lv in lam.items():
            r = key - b
            if r >= 0:
                total += c * lv.real * jets[r]
                if jet_errs is not None and 0 <= r < len(jet_errs):
                    err += abs(c * lv.real) * jet_errs[r]
    return total, err


def _pair2_d1(u: ConfFn, pmap: PMap, phi: TestFunction, cfg: OracleConfig):
    exps = pair_exponents(u)
    R = phi.decay_radius()
    need = max([(-b - 1) for b in exps] + [0])
    lam_orders = [k - b for b in exps for k in _lam_floats(pmap)]
    need = max([need] + [r for r in lam_orders if r >= 0])
    jets = [phi.taylor_1d(t) for t in range(need + cfg.series_order + 1)]
    kinks = [s * r for r in phi.radial_kinks() for s in (-1.0, 1.0)]
    return _laurent_pairing_d1(exps, pmap, lambda y: phi.value(y), jets, R, cfg,
                               breakpoints=kinks, fit_radius=phi.series_radius())


def _pair2_d2(u: ConfFn, pmap: PMap, phi: TestFunction, cfg: OracleConfig):
    exps = pair_exponents(u)
    mu = float(pmap.mu)
    lam = _lam_floats(pmap)
    R = phi.decay_radius()
    ntheta = 512
    theta = np.linspace(0.0, 2 * np.pi, ntheta, endpoint=False)
    eith = np.exp(1j * theta)
    total = 0.0 + 0.0j
    err = 0.0
    K = 20
    tay_full = phi.taylor_2d(K)
    for (al, be), cb in exps.items():
        c = _sc_float(cb)
        ord2 = -(al + be) - 2
        tay_low = {st: v for st, v in tay_full.items() if st[0] + st[1] <= ord2}

        def angular(rr, subtract):
            rr = np.asarray(rr, dtype=float)
            z = rr[:, None] * eith[None, :]
            w = np.conj(z)
            vals = np.asarray(phi.value_xy(z.real, z.imag), dtype=complex)
            if subtract:
                for (s, t), tc in tay_low.items():
                    vals = vals - tc * z ** s * w ** t
            integrand = z ** al * w ** be * vals
            return integrand.mean(axis=1) * 2 * np.pi * rr

        delta = min(mu, R) * 0.5
        # inner disc: Taylor remainder, termwise exact radial integrals
        inner = 0.0 + 0.0j
        for (s, t), tc in tay_full.items():
            if ord2 >= 0 and s + t <= ord2:
                continue
            if al + s != be + t:
                continue
            e = al + be + s + t + 1
            inner += tc * 2 * np.pi * delta ** (e + 1) / (e + 1)

        def band_re(rr):
            return angular(rr, ord2 >= 0).real

        def band_im(rr):
            return angular(rr, ord2 >= 0).imag

        def outer_re(rr):
            return angular(rr, False).real

        def outer_im(rr):
            return angular(rr, False).imag

        v1r, e1 = adaptive_quad(band_re, delta, mu, tol=cfg.tol, max_segments=cfg.max_segments)
        v1i, e1b = adaptive_quad(band_im, delta, mu, tol=cfg.tol, max_segments=cfg.max_segments)
        v2r, e2 = adaptive_quad(outer_re, mu, R, tol=cfg.tol, max_segments=cfg.max_segments)
        v2i, e2b = adaptive_quad(outer_im, mu, R, tol=cfg.tol, max_segments=cfg.max_segments)
        total += c * (inner + v1r + 1j * v1i + v2r + 1j * v2i)
        err += abs(c) * (e1 + e1b + e2 + e2b)
        for (ka, kb), lv in lam.items():
            s, t = ka - al, kb - be
            if s >= 0 and t >= 0:
                total += c * lv * tay_full.get((s, t), 0.0)
    return total, err


_PAIR_CHARTS_3 = {
    # pair -> (y1, y2) as rows of coefficients on (u, v)
    (1, 2): ((1.0, 1.0), (0.0, 1.0)),   # u = x12, v = x23
    (1, 3): ((1.0, 0.0), (0.0, 1.0)),   # u = x13, v = x23
    (2, 3): ((0.0, 1.0), (1.0, 0.0)),   # u = x23, v = x13
}


def _pair3_d1(G: MultiplicativeElement, pmap: PMap, phi: TestFunction,
              outer_mu, outer_local, window_profile: str, cfg: OracleConfig):
    S = frozenset({1, 2, 3})
    if G.S != S:
        raise ValueError("three-point pairing expects S = {1,2,3}")
    sd = G.scaling_degree(S)
    ord3 = sd - 2
    Gfull = G.expand()
    window = SmoothWindow(Fraction(outer_mu if outer_mu is not None else pmap.mu),
                          window_profile)
    t3 = phi.taylor_all(ord3) if ord3 >= 0 else {}
    vy1, vy2 = ("y", 1), ("y", 2)
    mu_out = float(window.mu)

    # computed as written, phi - W*T phi is a difference of order-one
    # quantities and keeps an absolute noise floor ~eps at the origin even
    # though the remainder vanishes there; inside the region where the
    # window is identically 1 and the series converges, the exact Taylor
    # tail is the same function as a small stable sum
    t_tail: dict = {}
    r_ser = 0.0
    if t3:
        kser = ord3 + 16
        t_tail = {m: c for m, c in phi.taylor_all(kser).items()
                  if sum(e for _, e in m) > ord3}
        sr0 = phi.series_radius()
        if phi.envelope[0] == "gauss":
            r_ser = 0.3 * phi._gauss_width_bounds()[0]
        elif sr0:
            r_ser = 0.9 * sr0
        r_ser = min(r_ser, 0.67 * mu_out)

    def psi(y1, y2):
        vals = phi.value(y1, y2)
        if t3:
            q = quadratic_form([np.asarray(y1)[..., None], np.asarray(y2)[..., None]])
            tp = _peval(t3, {vy1: y1, vy2: y2})
            vals = vals - window.value(q) * tp
            if r_ser > 0.0:
                y1a = np.asarray(y1, dtype=float)
                y2a = np.asarray(y2, dtype=float)
                m = y1a * y1a + y2a * y2a <= r_ser * r_ser
                if np.any(m):
                    vals = np.asarray(vals, dtype=float)
                    vals[m] = _peval(t_tail, {vy1: y1a[m], vy2: y2a[m]})
        return vals

    R = phi.decay_radius()
    V = R + 2.0 * float(window.mu)
    total = 0.0
    err_total = 0.0

    # discrete chart in polar coordinates: the partition of unity is
    # homogeneous of degree zero, so its steep transitions sit at fixed
    # angles and the radial integrand stays smooth (window onset radii
    # are supplied as breakpoints).
    rmax = V * 1.5

    def chi0_of(theta):
        c, s = math.cos(theta), math.sin(theta)
        return float(pou_weights(np.array([c - s]), np.array([c]), np.array([s]),
                                 profile=cfg.profile, lo=cfg.ratio_lo,
                                 hi=cfg.ratio_hi)["disc"][0])

    inner_err = [0.0, 0]

    def radial0(theta):
        c, s = math.cos(theta), math.sin(theta)
        w = chi0_of(theta)
        if abs(w) < 1e-15:
            return 0.0
        qdir = float(quadratic_form([np.array([[c]]), np.array([[s]])])[0])
        bps = list(hint_radii)
        if qdir > 0:
            bps += [mu_out / math.sqrt(2 * qdir), mu_out / math.sqrt(qdir)]

        def f(r):
            y1, y2 = r * c, r * s
            g = Gfull.evaluate({1: y1, 2: y2, 3: np.zeros_like(y1)})
            return g * psi(y1, y2) * r

        val, e = adaptive_quad(f, 1e-12, rmax, breakpoints=bps, tol=cfg.tol / 20,
                               max_segments=cfg.max_segments // 4)
        inner_err[0] += abs(w) * e
        inner_err[1] += 1
        return w * val

    # diagonal directions y1=0, y2=0, y1=y2 are the transition centers; a
    # uniform seed plus the support corners keeps narrow ridges visible
    hint_angles, hint_radii = phi.support_hints()
    diag_angles = sorted({(math.atan2(b, a)) % (2 * math.pi)
                          for a, b in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1))}
                         | {k * math.pi / 12 for k in range(24)}
                         | set(hint_angles))

    def outer0(th_arr):
        out = np.empty_like(th_arr)
        for i, th in enumerate(np.asarray(th_arr, dtype=float).ravel()):
            out.ravel()[i] = radial0(th)
        return out

    v0, e0 = adaptive_quad(outer0, 0.0, 2 * math.pi, breakpoints=diag_angles,
                           tol=cfg.tol, max_segments=cfg.max_segments // 8)
    total += v0
    # pointwise inner errors enter the outer integral with measure, not per
    # node: average and multiply by the circumference
    if inner_err[1]:
        err_total += e0 + (inner_err[0] / inner_err[1]) * 2 * math.pi
    else:
        err_total += e0

    # pair charts: nested pairing of the two-point extension
    for pair, rows in _PAIR_CHARTS_3.items():
        part = Partition.of((frozenset(pair), S - frozenset(pair)))
        g_cross, g_blocks = decompose(G, part)
        blk = g_blocks.get(frozenset(pair))
        if blk is None:
            exps = {0: Scalar.from_rational(1)}
        else:
            exps = pair_exponents(blk.expand())
        cross_fn = g_cross.expand()
        (a11, a12), (a21, a22) = rows
        max_ord = max([(-b - 1) for b in exps] + [0])
        lam_orders = [k - b for b in exps for k in _lam_floats(pmap)]
        max_ord = max([max_ord] + [r for r in lam_orders if r >= 0])

        def chart_fn(u, v, _rows=rows):
            (a11, a12), (a21, a22) = _rows
            y1 = a11 * u + a12 * v
            y2 = a21 * u + a22 * v
            return y1, y2

        def f_v(u, v, _pair=pair):
            y1, y2 = chart_fn(u, v)
            chi = pou_weights(y1 - y2, y1, y2, profile=cfg.profile,
                              lo=cfg.ratio_lo, hi=cfg.ratio_hi)[_pair]
            out = np.zeros_like(np.asarray(u, dtype=float))
            idx = chi > 1e-14
            if np.any(idx):
                g = cross_fn.evaluate({1: y1[idx], 2: y2[idx], 3: np.zeros_like(y1[idx])})
                out[idx] = g * psi(y1[idx], y2[idx]) * chi[idx]
            return out

        lam_keys = _lam_floats(pmap)
        need_jets = any(b <= -1 for b in exps) or any(
            k - b >= 0 for b in exps for k in lam_keys)
        # jets[0] is evaluated exactly; a fit is only worth its noise when
        # some generator subtracts past order zero or a counterterm reads a
        # higher coefficient
        need_fit = any(-b - 1 >= 1 for b in exps) or any(
            k - b >= 1 for b in exps for k in lam_keys)

        vkinks = phi.var_kinks()

        # close to the collapse line the pair weight and the outer window
        # are both identically 1 on the whole fit disc, so the u-jets of
        # the integrand are the Laurent series of the cross factor times
        # the jets of phi - T phi, all available in closed form; the
        # finite-difference fit cannot resolve that regime (its stencil
        # outgrows the support) and is kept for moderate v where it is an
        # independent check on the jet algebra
        sr_phi = phi.series_radius()
        n_jets = max_ord + 8
        dphi: dict = {(0, 0): phi}

        def _dphi(i, j):
            if (i, j) not in dphi:
                dphi[(i, j)] = (_dphi(i - 1, j).derivative(vy1) if i
                                else _dphi(i, j - 1).derivative(vy2))
            return dphi[(i, j)]

        atom_line = {
            ("x", 1, 2): (a11 - a21, a12 - a22),
            ("x", 1, 3): (a11, a12),
            ("x", 2, 3): (a21, a22),
        }

        def exact_jets(v):
            y01, y02 = a12 * v, a22 * v
            ps = np.zeros(n_jets)
            ps_abs = np.zeros(n_jets)
            reach = math.hypot(y01, y02) + 0.12 * abs(v) * math.hypot(a11, a21)
            if t3 and reach < r_ser:
                # on this disc the subtracted function IS the tail series,
                # a sum of terms each carrying its true magnitude; building
                # it as whole-phi jets minus jet polynomial would cancel the
                # ord3+1 leading digits and the cross factor's v^{-k} scale
                # would amplify the wreckage
                items = [(m, c, 1.0) for m, c in t_tail.items()]
            else:
                for t in range(n_jets):
                    acc = aabs = 0.0
                    for i in range(t + 1):
                        j = t - i
                        if (a11 == 0 and i) or (a21 == 0 and j):
                            continue
                        term = (a11 ** i) * (a21 ** j) / (
                            math.factorial(i) * math.factorial(j)
                        ) * float(_dphi(i, j).value(y01, y02))
                        acc += term
                        aabs += abs(term)
                    ps[t] = acc
                    ps_abs[t] = aabs
                items = [(m, c, -1.0) for m, c in t3.items()]
            for m, c, sgn in items:
                em = {var: e for var, e in m}
                e1, e2 = em.get(vy1, 0), em.get(vy2, 0)
                for t1 in range(e1 + 1):
                    for t2 in range(e2 + 1):
                        t = t1 + t2
                        if t >= n_jets:
                            continue
                        term = (c * math.comb(e1, t1) * math.comb(e2, t2)
                                * a11 ** t1 * y01 ** (e1 - t1)
                                * a21 ** t2 * y02 ** (e2 - t2))
                        ps[t] += sgn * term
                        ps_abs[t] += abs(term)
            den = np.zeros(n_jets)
            den[0] = 1.0
            for key, e in cross_fn.den.items():
                lin = np.array([atom_line[key][1] * v, atom_line[key][0]])
                for _ in range(e):
                    den = np.convolve(den, lin)[:n_jets]
            num = np.zeros(n_jets)
            for m, c in cross_fn.num.terms.items():
                s = np.zeros(n_jets)
                s[0] = float(_sc_float(c).real)
                for var, e in m:
                    a_u, a_v = (a11, a12) if var == vy1 else (a21, a22)
                    lin = np.array([a_v * v, a_u])
                    for _ in range(e):
                        s = np.convolve(s, lin)[:n_jets]
                num += s
            inv = np.zeros(n_jets)
            inv[0] = 1.0 / den[0]
            for t in range(1, n_jets):
                inv[t] = -np.dot(den[1:t + 1], inv[t - 1::-1]) / den[0]
            cross_ser = np.convolve(num, inv)[:n_jets]
            jerr = 1e-14 * np.convolve(np.abs(cross_ser), ps_abs)[:n_jets]
            return np.convolve(cross_ser, ps)[:n_jets], jerr

        def I_pair(v):
            f = lambda u: f_v(u, v)
            jerrs = None
            fdf = True
            r0 = math.hypot(a12 * v, a22 * v)
            if (need_jets and v != 0.0 and abs(v) < 0.01
                    and r0 < 0.3 * mu_out and (sr_phi is None or r0 < 0.9 * sr_phi)):
                jets, jerrs = exact_jets(v)
                fit_r = 0.1 * abs(v)
                fdf = False
            elif need_fit:
                # stencil stays inside the zone where the pair weight is
                # identically 1, so the fit sees only the smooth factors
                hsafe = min(max(abs(v), 1e-5) * cfg.ratio_lo * 0.375, cfg.fd_hmax)
                jets, jerrs = local_taylor(f, max_ord, hsafe, cfg.fd_extra)
                jets = list(jets)
                jets[0] = float(f(np.array([0.0]))[0])
                jerrs = list(jerrs)
                jerrs[0] = 0.0
                fit_r = hsafe * 0.5
            elif need_jets:
                jets = [float(f(np.array([0.0]))[0])] + [0.0] * max_ord
                fit_r = 0.0
            else:
                jets = np.zeros(max_ord + 1)
                fit_r = 0.0
            # transition rays of the pair weight cross u at these heights
            av = abs(v)
            bps = {s * av * k for s in (-1.0, 1.0)
                   for k in (cfg.ratio_lo / 2, cfg.ratio_lo,
                             cfg.ratio_hi / 2, cfg.ratio_hi, 0.5, 1.0, 2.0)}
            # envelope kinks of phi pulled back to the u line
            for i, (ai1, ai2) in enumerate(rows):
                if ai1 == 0:
                    continue
                for kv in vkinks.get(phi.vars[i], ()):
                    bps.add((kv - ai2 * v) / ai1)
            val, e = _laurent_pairing_d1(
                exps, pmap, f, jets, V + abs(v) + float(pmap.mu),
                replace(cfg, tol=cfg.tol / 20, max_segments=cfg.max_segments // 4),
                breakpoints=sorted(bps), fit_radius=fit_r, fd_fit=fdf,
                jet_errs=jerrs,
            )
            return val, e

        pair_err = [0.0, 0]

        def outer_pair(varr):
            out = np.empty_like(varr)
            for i, v in enumerate(np.asarray(varr, dtype=float).ravel()):
                val, e = I_pair(v)
                out.ravel()[i] = val
                pair_err[0] += e
                pair_err[1] += 1
            return out

        # where an envelope kink of phi crosses u = 0 the inner jets move
        # through it; split the v integral there
        vbps = {0.0, -mu_out, mu_out}
        for i, (ai1, ai2) in enumerate(rows):
            if ai2 == 0:
                continue
            for kv in vkinks.get(phi.vars[i], ()):
                vbps.add(kv / ai2)
        vP, eP = adaptive_quad(outer_pair, -V, V, breakpoints=sorted(vbps),
                               tol=cfg.tol, max_segments=cfg.max_segments // 8)
        total += vP
        if pair_err[1]:
            err_total += eP + (pair_err[0] / pair_err[1]) * 2 * V
        else:
            err_total += eP

    if outer_local is not None:
        total += _local_pairing(outer_local, phi).real
    return total, err_total


def pair_numeric(G, pmap: PMap, phi: TestFunction, *, outer_mu=None,
                 outer_local: LocalDist | None = None,
                 window_profile: str = "exp1",
                 config: OracleConfig | None = None):
    """Ground-truth pairing <R G, phi>; returns (value, error estimate).

    G may be a ConfFn or a MultiplicativeElement on 2 or 3 points.  The
    scheme is the sharp two-point window of pmap (with its counterterm
    functional) plus, for three points, the smooth outer window at
    outer_mu (default: pmap's scale) with window_profile, and an optional
    outer counterterm.  Scheme data is separate from OracleConfig: two
    configs must agree on any fixed scheme.
    """
    cfg = config or OracleConfig()
    S = G.S
    n = len(S)
    if n == 2:
        u = G.expand() if isinstance(G, MultiplicativeElement) else G
        if u.D == 1:
            val, err = _pair2_d1(u, pmap, phi, cfg)
        elif u.D == 2:
            val, err = _pair2_d2(u, pmap, phi, cfg)
        else:
            raise ValueError("numerics cover D in {1,2}")
        if outer_local is not None:
            val = val + _local_pairing(outer_local, phi)
        return val, err
    if n == 3:
        if G.D != 1:
            raise ValueError("three-point numerics cover D=1")
        if isinstance(G, ConfFn):
            raise ValueError("three-point pairing expects a multiplicative element")
        return _pair3_d1(G, pmap, phi, outer_mu, outer_local, window_profile, cfg)
    raise ValueError("numeric pairings cover 2 or 3 points")


# -- scaling slope ----------------------------------------------------------


def scaling_slope(pairing: Callable[[TestFunction], float], phi: TestFunction,
                  codim: int, lambdas: Sequence[float] = None):
    """Estimated degree s with |<u, phi_lam>| ~ C lam^{-s} (log lam)^d.

    Fits a three-parameter model in log lam so a logarithmic factor at the
    critical degree does not bias the slope.  Returns (s, d, residual).
    """
    if lambdas is None:
        lambdas = [2.0 ** (-k) for k in range(3, 10)]
    vals = []
    for lam in lambdas:
        vals.append(pairing(phi.collapse_probe(lam, codim)))
    vals = np.asarray(vals, dtype=float)
    mags = np.abs(vals)
    if np.max(mags) < 1e-13:
        return float("-inf"), 0.0, 0.0
    keep = mags > 1e-13 * np.max(mags)
    L = -np.log(np.asarray(lambdas)[keep])
    y = np.log(mags[keep])
    A = np.column_stack([np.ones_like(L), L, np.log(L)])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[1]), float(coef[2]), resid


# -- comparison and reporting -------------------------------------------------


@dataclass(frozen=True)
class CompareReport:
    passed: bool
    delta: float
    bound: float
    provenance: tuple = ()

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        where = " ".join(f"{k}={v}" for k, v in self.provenance)
        return f"{status} |delta|={self.delta:.3e} bound={self.bound:.3e} {where}".rstrip()


def compare(symbolic, numeric, tol: float, err: float = 0.0,
            provenance: Mapping | None = None) -> CompareReport:
    """Pass iff |symbolic - numeric| <= tol + reported quadrature error."""
    delta = abs(complex(symbolic) - complex(numeric))
    bound = tol + err
    prov = tuple(sorted((provenance or {}).items()))
    return CompareReport(delta <= bound, float(delta), float(bound), prov)


def compare_dists(a: LocalDist, b: LocalDist):
    """List (mono, coeff_a, coeff_b) for every differing delta coefficient."""
    diffs = []
    for m in sorted(set(a.terms) | set(b.terms), key=lambda mm: (sum(e for _, e in mm), mm)):
        ca = a.terms.get(m, Scalar.zero())
        cb = b.terms.get(m, Scalar.zero())
        if ca != cb:
            diffs.append((m, ca, cb))
    return diffs


def pairings_to_csv(rows, path):
    """rows: iterables (problem id, phi id, value, err)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["problem", "phi", "value", "err"])
        for row in rows:
            writer.writerow(list(row))
