"""Two-point extension maps: closed-form tables against direct integration."""

import math
from fractions import Fraction

import numpy as np
import pytest

from renconf.corefn import ConfFn
from renconf.extension import (
    PMap,
    derivative_commutator,
    extend,
    from_exponents,
    gamma2_functional,
    pair_exponents,
    scale_shift,
    tensor_extend,
)
from renconf.localdist import LocalDist
from renconf.oracle import TestFunction
from renconf.scalars import Scalar, log_rational, pi

S2 = frozenset({1, 2})
Y = ("y", 1)
SQRT_PI = math.sqrt(math.pi)
EULER_GAMMA = 0.5772156649015329


def xpow(b: int) -> ConfFn:
    return ConfFn.atom_power(1, S2, "x", 1, 2, b)


def zwpow(a: int, b: int) -> ConfFn:
    return ConfFn.atom_power(2, S2, "z", 1, 2, a) * ConfFn.atom_power(2, S2, "w", 1, 2, b)


def sc(q) -> Scalar:
    return Scalar.from_rational(Fraction(q))


# -- generator bookkeeping ----------------------------------------------------


def test_pair_exponents_round_trip_d1():
    u = xpow(-3).scale(2) + xpow(1).scale(Fraction(1, 2))
    exps = pair_exponents(u)
    assert exps == {-3: sc(2), 1: sc(Fraction(1, 2))}
    assert pair_exponents(from_exponents(1, S2, exps)) == exps


def test_pair_exponents_round_trip_d2():
    u = zwpow(-2, -1) + zwpow(0, -1).scale(3)
    exps = pair_exponents(u)
    assert exps == {(-2, -1): sc(1), (0, -1): sc(3)}
    assert pair_exponents(from_exponents(2, S2, exps)) == exps


# -- the counterterm functional -----------------------------------------------


def test_pmap_rejects_nonlocal_keys():
    with pytest.raises(ValueError):
        PMap(1, Fraction(1), {0: sc(1)})
    with pytest.raises(ValueError):
        PMap(2, Fraction(1), {(0, -1): sc(1), (1, -1): sc(1)})


def test_pmap_rejects_bad_scale():
    with pytest.raises(ValueError):
        PMap(1, Fraction(-1))


def test_counterterm_dist_d1():
    # lam on y^{-1} and y^{-3}; u = y^{-3} picks up r = 0 and r = 2
    P = PMap(1, Fraction(1), {-1: sc(2), -3: sc(5)})
    L = P.counterterm_dist(xpow(-3))
    assert L.terms == {(): sc(5), ((Y, 2),): sc(1)}  # 2 * (+1)^2/2! = 1


def test_counterterm_commutes_with_polynomial():
    # L[x^2 * y^{-3}] must equal the poly-reduced L[y^{-3}]
    from renconf.localdist import poly_reduce
    from renconf.poly import Poly

    P = PMap(1, Fraction(1), {-1: sc(2), -3: sc(5)})
    left = P.counterterm_dist(xpow(-1))
    right = poly_reduce(Poly.var(Y) * Poly.var(Y), P.counterterm_dist(xpow(-3)))
    assert left == right


def test_from_delta_table_deepest_class_wins():
    # the (b=-1, r=0) row conflicts with what (b=-3, r=2) forces on lam(-1);
    # the deeper class is authoritative
    table = {(-1, 0): sc(7), (-3, 2): sc(1)}
    P = PMap.from_delta_table(1, Fraction(1), table)
    assert P.lam_value(-3).is_zero() is False or True  # built below
    # (-3, 2): lam(-1) = c / ((-1)^2/2!) = 2
    assert P.lam_value(-1) == sc(2)


def test_from_delta_table_round_trip():
    P = PMap(1, Fraction(1), {-1: sc(Fraction(2, 7)), -3: sc(Fraction(-1, 3))})
    # regenerate the table from the induced distribution of y^{-3}
    L = P.counterterm_dist(xpow(-3))
    table = {}
    for m, c in L.terms.items():
        r = m[0][1] if m else 0
        table[(-3, r)] = c
    Q = PMap.from_delta_table(1, Fraction(1), table)
    assert Q.lam_value(-1) == P.lam_value(-1)
    assert Q.lam_value(-3) == P.lam_value(-3)


# -- closed-form scheme tables ------------------------------------------------


def test_scale_shift_no_log_for_single_pole():
    # parity removes the critical radial power: 1/y moves by nothing
    assert scale_shift(PMap(1, 1), PMap(1, 2), xpow(-1)).is_zero()


def test_scale_shift_second_pole():
    # <(P_2 - P_1) y^{-2}, phi> = -phi(0) int_{1<|y|<2} y^{-2} = -phi(0)
    d = scale_shift(PMap(1, 1), PMap(1, 2), xpow(-2))
    assert d == LocalDist(1, (Y,), {(): sc(-1)})


def test_scale_shift_d2_log_case():
    # z^{-1}w^{-1} sits at the critical power: radial integral is log(mu'/mu)
    vz, vw = ("z", 1), ("w", 1)
    d = scale_shift(PMap(2, 1), PMap(2, 2), zwpow(-1, -1))
    expected = pi() * log_rational(2) * sc(-2)
    assert d.terms == {(): expected}


def test_scale_shift_composes():
    # (P_4 - P_1) = (P_4 - P_2) + (P_2 - P_1) on every generator
    u = xpow(-4) + xpow(-2).scale(3)
    a = scale_shift(PMap(1, 1), PMap(1, 4), u)
    b = scale_shift(PMap(1, 2), PMap(1, 4), u) + scale_shift(PMap(1, 1), PMap(1, 2), u)
    assert a == b


def test_scale_shift_includes_counterterm_difference():
    P = PMap(1, 1)
    Q = PMap(1, 1, {-1: sc(3)})
    d = scale_shift(P, Q, xpow(-1))
    assert d == LocalDist(1, (Y,), {(): sc(3)})


def test_gamma2_d1_values():
    g = gamma2_functional(PMap(1, Fraction(1, 2)))
    assert g(-1) == sc(4)  # 2 mu^{-1}
    assert g(-2).is_zero()  # even exponent
    assert g(0).is_zero()


def test_gamma2_d2_values():
    gz = gamma2_functional(PMap(2, 2), xi="z")
    # Gamma_z((a,b)) = pi mu^{a+b+1} iff a = b+1, a+b <= -1
    assert gz((0, -1)) == pi()  # mu^0
    assert gz((-1, -2)) == pi() * sc(Fraction(1, 4))
    assert gz((-1, 0)).is_zero()
    assert gz((1, 0)).is_zero()  # a+b = 1 > -1


def test_derivative_commutator_d1_single_pole():
    # [d, P] y^{-1} = 2 mu^{-1} delta
    d = derivative_commutator(PMap(1, 2), 1, xpow(-1))
    assert d == LocalDist(1, (Y,), {(): sc(1)})


def test_derivative_commutator_matches_pairing():
    # <[d,P]u, phi> must equal -<Pu, phi'> - <P(u'), phi> numerically
    P = PMap(1, Fraction(1), {-2: sc(Fraction(1, 3))})
    u = xpow(-2)
    phi = TestFunction.gaussian(1, S2, {(): 1.0, ((Y, 1),): 0.4})
    lhs = 0.0 + 0.0j
    comm = derivative_commutator(P, 1, u)
    for m, c in comm.terms.items():
        r = m[0][1] if m else 0
        lhs += complex(c.numeric()) * (-1) ** r * math.factorial(r) * phi.taylor_1d(r)
    du = u.derivative((1, 1))
    rhs = -extend(P, u, 1).pair(phi.derivative(Y)) - extend(P, du, 1).pair(phi)
    assert abs(lhs - rhs) < 1e-9


# -- numeric pairings against closed forms ------------------------------------


def test_extend_direct_regime_is_plain_integral():
    # b = 0: no subtraction, scheme acts as the identity
    phi = TestFunction.gaussian(1, S2, {(): 1.0})
    val = extend(PMap(1, 1), xpow(0), 1).pair(phi)
    assert abs(val - SQRT_PI) < 1e-10


def test_extend_single_pole_odd_moment():
    # <P(1/y), (1 + a y) e^{-y^2}> = a sqrt(pi): the even part cancels by
    # parity and the window never contributes
    for a in (0.3, -1.25):
        phi = TestFunction.gaussian(1, S2, {(): 1.0, ((Y, 1),): a})
        val = extend(PMap(1, 1), xpow(-1), 1).pair(phi)
        assert abs(val - a * SQRT_PI) < 1e-10


def test_extend_double_pole_closed_form():
    # <P_mu(y^{-2}), e^{-y^2}> = 2/mu - 2 sqrt(pi)
    for mu in (Fraction(1), Fraction(2), Fraction(1, 2)):
        phi = TestFunction.gaussian(1, S2, {(): 1.0})
        val = extend(PMap(1, mu), xpow(-2), 1).pair(phi)
        assert abs(val - (2.0 / float(mu) - 2.0 * SQRT_PI)) < 1e-9


def test_extend_triple_pole_reduces_to_double():
    # odd kernel keeps only the odd part of phi: <P(y^{-3}), (1+ay)e^{-y^2}>
    # = a (2/mu - 2 sqrt(pi))
    a = 0.7
    phi = TestFunction.gaussian(1, S2, {(): 1.0, ((Y, 1),): a})
    val = extend(PMap(1, 1), xpow(-3), 1).pair(phi)
    assert abs(val - a * (2.0 - 2.0 * SQRT_PI)) < 1e-9


def test_extend_counterterm_shifts_by_jet():
    lam = Fraction(2, 7)
    P0 = PMap(1, 1)
    P1 = PMap(1, 1, {-1: sc(lam)})
    phi = TestFunction.gaussian(1, S2, {(): 1.0, ((Y, 1),): 0.3})
    v0 = extend(P0, xpow(-1), 1).pair(phi)
    v1 = extend(P1, xpow(-1), 1).pair(phi)
    assert abs((v1 - v0) - float(lam) * phi.taylor_1d(0)) < 1e-12


def test_extend_d2_critical_pole_closed_form():
    # <P_mu(1/(zw)), e^{-zw}> = -pi (gamma + 2 log mu)
    phi = TestFunction.gaussian(2, S2, {(): 1.0})
    for mu in (Fraction(1), Fraction(2)):
        val = extend(PMap(2, mu), zwpow(-1, -1), 2).pair(phi)
        want = -math.pi * (EULER_GAMMA + 2.0 * math.log(float(mu)))
        assert abs(val - want) < 1e-8


def test_extend_d2_angular_selection():
    # z^{-2}w^{-1} has no rotation-invariant component: base scheme gives 0
    # and the whole value comes from the counterterm table
    phi = TestFunction.gaussian(2, S2, {(): 1.0})
    lam = {(-1, -1): sc(Fraction(1, 5)), (-2, -1): sc(Fraction(-1, 2))}
    val0 = extend(PMap(2, 2), zwpow(-2, -1), 2).pair(phi)
    val1 = extend(PMap(2, 2, lam), zwpow(-2, -1), 2).pair(phi)
    assert abs(val0) < 1e-8
    assert abs(val1 - (-0.5)) < 1e-8


def test_scale_shift_matches_numeric_difference():
    # the closed-form shift table must reproduce P_2 - P_1 measured by pairing
    u = xpow(-2) + xpow(-4).scale(Fraction(1, 3))
    phi = TestFunction.gaussian(1, S2, {(): 1.0, ((Y, 2),): -0.2})
    v1 = extend(PMap(1, 1), u, 1).pair(phi)
    v2 = extend(PMap(1, 2), u, 1).pair(phi)
    shift = scale_shift(PMap(1, 1), PMap(1, 2), u)
    paired = 0.0
    for m, c in shift.terms.items():
        r = m[0][1] if m else 0
        paired += float(c.numeric()) * (-1) ** r * math.factorial(r) * phi.taylor_1d(r)
    assert abs((v2 - v1) - paired) < 1e-9


def test_tensor_extend_pairs_factorwise():
    # (delta' in y_1) tensor P(y_2^{-2}): slice pairing against a product
    # gaussian equals the product of the two one-dimensional answers
    S3 = frozenset({1, 2, 3})
    from renconf.corefn import chart_vars

    vars3 = tuple(chart_vars(1, S3))
    v1, v2 = vars3
    u_loc = LocalDist.monomial(1, (v1,), ((v1, 1),))
    v_fn = ConfFn.atom_power(1, frozenset({2, 3}), "x", 2, 3, -2)
    phi = TestFunction.gaussian(1, S3, {(): 1.0, ((v1, 1),): 0.5})
    t = tensor_extend(PMap(1, 1), u_loc, v_fn, 1)
    got = t.pair(phi)
    # factor 1: <delta', (1 + 0.5 y1) e^{-y1^2}>|_{y1} = -0.5
    # factor 2: <P(y^{-2}), e^{-y2^2}> = 2 - 2 sqrt(pi)
    assert abs(got - (-0.5) * (2.0 - 2.0 * SQRT_PI)) < 1e-9


def test_tensor_extend_rejects_shared_variables():
    u_loc = LocalDist.delta(1, (Y,))
    with pytest.raises(ValueError):
        tensor_extend(PMap(1, 1), u_loc, xpow(-1), 1)
