"""Delta-supported distributions: algebra, reduction, derivations, pairings."""

from fractions import Fraction

import pytest

from renconf.corefn import chart_vars
from renconf.localdist import (
    LocalDist,
    PlacedLocalDist,
    derive,
    pair_with_jet,
    pair_with_poly,
    place,
    poly_reduce,
)
from renconf.poly import Poly
from renconf.scalars import Scalar

Y = ("y", 1)
VARS = (Y,)


def sc(q) -> Scalar:
    return Scalar.from_rational(Fraction(q))


def test_constructors_and_order():
    z = LocalDist.zero(1, VARS)
    assert z.is_zero() and z.order() == 0
    d = LocalDist.delta(1, VARS, 3)
    assert d.terms == {(): sc(3)}
    m = LocalDist.monomial(1, VARS, ((Y, 2),), Fraction(1, 2))
    assert m.order() == 2


def test_rejects_foreign_variables():
    with pytest.raises(ValueError):
        LocalDist(1, VARS, {((("y", 9), 1),): sc(1)})


def test_filtration_bound_enforced():
    with pytest.raises(ValueError):
        LocalDist(1, VARS, {((Y, 3),): sc(1)}, max_order=2)
    ok = LocalDist(1, VARS, {((Y, 2),): sc(1)}, max_order=2)
    assert ok.order() == 2


def test_zero_coefficients_dropped():
    d = LocalDist(1, VARS, {(): Scalar.zero(), ((Y, 1),): sc(2)})
    assert () not in d.terms and d.order() == 1


def test_algebra_add_sub_scale_eq():
    a = LocalDist.delta(1, VARS, 2)
    b = LocalDist.monomial(1, VARS, ((Y, 1),), 5)
    s = a + b
    assert s.terms == {(): sc(2), ((Y, 1),): sc(5)}
    assert (s - b) == a
    assert a.scale(Fraction(1, 2)) == LocalDist.delta(1, VARS, 1)
    assert (a - a).is_zero()


def test_peer_mismatch_raises():
    a = LocalDist.delta(1, VARS)
    b = LocalDist.delta(1, (("y", 2),))
    with pytest.raises(ValueError):
        _ = a + b


def test_poly_reduce_lowers_or_kills():
    # x * delta'  ->  -delta;  x * delta -> 0
    dp = LocalDist.monomial(1, VARS, ((Y, 1),))
    x = Poly.var(Y)
    assert poly_reduce(x, dp) == LocalDist.delta(1, VARS, -1)
    assert poly_reduce(x, LocalDist.delta(1, VARS)).is_zero()


def test_poly_reduce_factorial_weight():
    # x^2 * delta''' = (-1)^2 3!/1! delta' = 6 delta'
    d3 = LocalDist.monomial(1, VARS, ((Y, 3),))
    x2 = Poly.var(Y) * Poly.var(Y)
    assert poly_reduce(x2, d3) == LocalDist.monomial(1, VARS, ((Y, 1),), 6)


def test_poly_reduce_rejects_foreign_poly():
    with pytest.raises(ValueError):
        poly_reduce(Poly.var(("y", 2)), LocalDist.delta(1, VARS))


def test_derive_raises_order():
    d = LocalDist.delta(1, VARS)
    assert derive(d, Y) == LocalDist.monomial(1, VARS, ((Y, 1),))
    with pytest.raises(ValueError):
        derive(d, ("y", 2))


def test_pair_with_jet_signs():
    # <delta^{(r)}, phi> = (-1)^r r! phi_r with phi_r the Taylor coefficient
    u = LocalDist.delta(1, VARS, 2) + LocalDist.monomial(1, VARS, ((Y, 1),), 3)
    jet = {(): sc(5), ((Y, 1),): sc(7)}
    val = pair_with_jet(u, jet, jet_order=1)
    assert val == sc(2 * 5) + sc(3) * sc(-7)


def test_pair_with_jet_short_jet_raises():
    u = LocalDist.monomial(1, VARS, ((Y, 2),))
    with pytest.raises(ValueError):
        pair_with_jet(u, {(): sc(1)}, jet_order=1)


def test_pair_with_poly_matches_jet_pairing():
    u = LocalDist.monomial(1, VARS, ((Y, 2),), Fraction(1, 3))
    p = Poly.var(Y) * Poly.var(Y)  # x^2: jet coeff 1 at order 2
    # <delta'', x^2> = (+1) 2! * 1 * 1/3
    assert pair_with_poly(u, p) == sc(Fraction(2, 3))


def test_map_coefficients():
    u = LocalDist.delta(1, VARS, 2)
    assert u.map_coefficients(lambda c: c * sc(3)) == LocalDist.delta(1, VARS, 6)


def test_text_form_orders_terms():
    u = LocalDist.monomial(1, VARS, ((Y, 1),), 1) + LocalDist.delta(1, VARS, 2)
    s = u.text_form()
    assert s.index("2 * delta") < s.index("d^{1} delta")


def test_place_validates_chart():
    S = frozenset({1, 2, 3})
    blk = frozenset({1, 2})
    u = LocalDist.delta(1, tuple(chart_vars(1, blk)))
    placed = place(u, blk, S)
    assert isinstance(placed, PlacedLocalDist)
    with pytest.raises(ValueError):
        place(u, frozenset({2, 3}), S)  # chart vars of {2,3} differ
    with pytest.raises(ValueError):
        place(u, frozenset({1, 4}), S)  # block sticks out of the ambient set
