"""Numeric ground-truth pairings: frozen values, closed forms, dual routes."""

import math
from fractions import Fraction

import numpy as np
import pytest

from renconf.corefn import ConfFn, MultiplicativeElement
from renconf.extension import PMap, extend
from renconf.localdist import LocalDist
from renconf.oracle import (
    OracleConfig,
    TestFunction,
    adaptive_quad,
    compare,
    compare_dists,
    fd_jet,
    local_taylor,
    pair_numeric,
    pairings_to_csv,
    pou_weights,
    scaling_slope,
)
from renconf.scalars import Scalar

S2 = frozenset({1, 2})
S3 = frozenset({1, 2, 3})
Y1, Y2 = ("y", 1), ("y", 2)
SQRT_PI = math.sqrt(math.pi)
PM1 = PMap(1, Fraction(1))


def atom3(j, k, e):
    return ConfFn.atom_power(1, {j, k}, "x", j, k, e)


G1 = MultiplicativeElement.from_pairs(1, S3, {(1, 2): atom3(1, 2, -1),
                                              (2, 3): atom3(2, 3, -1)})
G2 = MultiplicativeElement.from_pairs(1, S3, {(1, 2): atom3(1, 2, -2),
                                              (2, 3): atom3(2, 3, -1)})
PHI = TestFunction.gaussian(1, S3, {(): 1.0, ((Y1, 1),): 0.3}, sigma=1.0)
PHI2 = TestFunction.gaussian(1, S3, {(): 0.7, ((Y2, 2),): -0.4,
                                     ((Y1, 1), (Y2, 1)): 0.25}, sigma=1.2)


# -- quadrature and jet plumbing ----------------------------------------------


def test_adaptive_quad_known_integrals():
    v, e = adaptive_quad(lambda x: np.exp(-x * x), -10.0, 10.0, tol=1e-12)
    assert abs(v - SQRT_PI) < 1e-11
    assert abs(v - SQRT_PI) < e + 1e-13
    # integrable endpoint log: x log x
    v, e = adaptive_quad(lambda x: np.where(x > 0, x * np.log(np.maximum(x, 1e-300)), 0.0),
                         0.0, 1.0, tol=1e-10)
    assert abs(v - (-0.25)) < 1e-9


def test_local_taylor_polynomial_exact():
    f = lambda u: 2.0 - u + 3.0 * u ** 2
    jets, deltas = local_taylor(f, 2, 0.1)
    assert np.allclose(jets[:3], [2.0, -1.0, 3.0], atol=1e-10)
    assert max(deltas[:3]) < 1e-8


def test_fd_jets_match_exact_jets():
    # central differences against the closed-form coefficients, order <= 4
    phi = TestFunction.gaussian(1, S2, {(): 1.0, ((Y1, 1),): 0.5}, sigma=1.3)
    bump = TestFunction.bump(1, S2, {(): 1.0, ((Y1, 2),): -0.25}, flat=0.6, cutoff=1.2)
    for f in (phi, bump):
        for t in range(5):
            exact = f.taylor(((Y1, t),)) if t else f.taylor_all(0).get((), 0.0)
            assert abs(fd_jet(f, Y1, t) - exact) < 1e-6


def test_pou_weights_sum_to_one():
    rng = np.random.default_rng(3)
    y1 = rng.uniform(-2, 2, size=40)
    y2 = rng.uniform(-2, 2, size=40)
    w = pou_weights(y1 - y2, y1, y2)
    total = sum(w[k] for k in w)
    assert np.allclose(total, 1.0, atol=1e-12)


# -- two-point pairings against the production extension ----------------------


def test_pair2_odd_single_pole():
    phi = TestFunction.gaussian(1, S2, {((Y1, 1),): 1.0})
    val, err = pair_numeric(atom3(1, 2, -1), PM1, phi)
    assert abs(val - SQRT_PI) < 1e-9 + err


def test_pair2_matches_extension_route():
    # same scheme, two implementations: custom subtracted quadrature vs the
    # termwise disc decomposition
    u = atom3(1, 2, -2) + atom3(1, 2, -1).scale(Fraction(1, 2))
    pm = PMap(1, Fraction(1), {-1: Scalar.from_rational(Fraction(2, 7))})
    for terms in ({(): 1.0}, {(): 0.4, ((Y1, 1),): -0.8}):
        phi = TestFunction.gaussian(1, S2, terms)
        v_o, e_o = pair_numeric(u, pm, phi)
        v_p = extend(pm, u, 1).pair(phi)
        assert abs(v_o - v_p) < 1e-8 + e_o


def test_pair2_d2_matches_extension_route():
    z = ConfFn.atom_power(2, S2, "z", 1, 2, -1)
    w = ConfFn.atom_power(2, S2, "w", 1, 2, -1)
    phi = TestFunction.gaussian(2, S2, {(): 1.0})
    v_o, e_o = pair_numeric(z * w, PMap(2, Fraction(1)), phi)
    v_p = extend(PMap(2, Fraction(1)), z * w, 2).pair(phi)
    assert abs(v_o - v_p) < 1e-7 + e_o


def test_pair2_counterterm_route():
    pm = PMap(2, Fraction(2), {(-2, -1): Scalar.from_rational(Fraction(-1, 2))})
    u = (ConfFn.atom_power(2, S2, "z", 1, 2, -2)
         * ConfFn.atom_power(2, S2, "w", 1, 2, -1))
    phi = TestFunction.gaussian(2, S2, {(): 1.0})
    v_o, e_o = pair_numeric(u, pm, phi)
    assert abs(v_o - (-0.5)) < 1e-7 + e_o


# -- three-point pairings ------------------------------------------------------


@pytest.fixture(scope="module")
def g1_phi_both_profiles():
    cfg = OracleConfig(tol=1e-8)
    v1, e1 = pair_numeric(G1, PM1, PHI, config=cfg)
    v2, e2 = pair_numeric(G1, PM1, PHI, config=OracleConfig(tol=1e-8, profile="exp2"))
    return (v1, e1), (v2, e2)


def test_three_point_closed_form(g1_phi_both_profiles):
    # <R(1/(x12 x23)), (1+0.3 y1) e^{-y1^2-y2^2}> at mu=1: the odd part drops
    # and the even part evaluates to -pi^2/6
    (v1, e1), _ = g1_phi_both_profiles
    assert abs(v1 - (-math.pi ** 2 / 6)) < 1e-7 + e1


def test_profile_independence(g1_phi_both_profiles):
    (v1, e1), (v2, e2) = g1_phi_both_profiles
    assert abs(v1 - v2) < 1e-8 + e1 + e2


def test_three_point_parity_zero():
    # x12^{-2} x23^{-1} is odd under y -> -y while phi2 is even
    val, err = pair_numeric(G2, PM1, PHI2, config=OracleConfig(tol=1e-8))
    assert abs(val) < 1e-7 + err


def test_punctured_support_is_plain_quadrature():
    from scipy.integrate import dblquad

    phi = TestFunction.bump_at(1, S3, {(): 1.0, ((Y2, 1),): 0.5},
                               {Y1: 3.2, Y2: 1.2}, flat=0.25, cutoff=0.5)
    val, err = pair_numeric(G1, PM1, phi, config=OracleConfig(tol=1e-8))

    def integrand(y2, y1):
        return float((phi.value(np.array([y1]), np.array([y2]))
                      / ((y1 - y2) * y2))[0])

    ref, qerr = dblquad(integrand, 2.7 - 1e-9, 3.7 + 1e-9,
                        lambda _: 0.7 - 1e-9, lambda _: 1.7 + 1e-9,
                        epsabs=1e-11)
    assert abs(val - ref) < 1e-8 + err + qerr


def test_scaling_slope_bounded_by_degree():
    # total-collapse probes: growth exponent stays at or below sd(G1) = 2
    pairing = lambda p: pair_numeric(G1, PM1, p,
                                     config=OracleConfig(tol=1e-6))[0]
    s, _logpow, resid = scaling_slope(pairing, PHI2, codim=2,
                                      lambdas=[2.0 ** (-k) for k in range(2, 6)])
    assert s <= 2.0 + 0.1
    assert resid < 0.3


# -- comparison plumbing -------------------------------------------------------


def test_compare_trivial_pass():
    rep = compare(1.25, 1.25, tol=0.0)
    assert rep.passed and rep.delta == 0.0


def test_compare_negative_control():
    rep = compare(1.0, 1.002, tol=1e-4, err=1e-5,
                  provenance={"generator": "x^-2", "node": "pair"})
    assert not rep.passed
    assert ("generator", "x^-2") in rep.provenance
    assert "FAIL" in str(rep)


def test_compare_dists_localizes_broken_coefficient():
    good = LocalDist(1, (Y1,), {(): Scalar.from_rational(2),
                                ((Y1, 1),): Scalar.from_rational(Fraction(1, 3))})
    bad = LocalDist(1, (Y1,), {(): Scalar.from_rational(2),
                               ((Y1, 1),): Scalar.from_rational(Fraction(1, 4))})
    diffs = compare_dists(good, bad)
    assert len(diffs) == 1
    assert diffs[0][0] == ((Y1, 1),)


def test_pairings_csv_round_trip(tmp_path):
    import csv

    path = tmp_path / "vals.csv"
    pairings_to_csv([("p1", "gauss1", 1.5, 1e-9)], path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["problem", "phi", "value", "err"]
    assert rows[1][0] == "p1" and float(rows[1][2]) == 1.5


def test_refined_tolerance_stays_within_error():
    u = atom3(1, 2, -2)
    phi = TestFunction.gaussian(1, S2, {(): 1.0})
    v1, e1 = pair_numeric(u, PM1, phi, config=OracleConfig(tol=1e-7))
    v2, _ = pair_numeric(u, PM1, phi, config=OracleConfig(tol=1e-8))
    assert abs(v1 - v2) <= e1 + 1e-12
