"""Tests for polynomials, partitions, and configuration functions."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renconf.corefn import ConfFn, MultiplicativeElement, PairFactor, atom_poly
from renconf.partitions import (
    Partition,
    enumerate_partitions,
    quotient,
    related,
    sample_config,
)
from renconf.poly import Poly
from renconf.scalars import Scalar, zeta


S3 = frozenset({1, 2, 3})
S4 = frozenset({1, 2, 3, 4})


def ap(D, S, tag, j, k, e):
    return ConfFn.atom_power(D, frozenset(S), tag, j, k, e)


class TestPoly:
    def test_ring_identities(self):
        x, y = Poly.var(("y", 1)), Poly.var(("y", 2))
        p = (x + y) * (x - y)
        assert p == x * x - y * y

    def test_exact_division(self):
        x, y = Poly.var(("y", 1)), Poly.var(("y", 2))
        p = (x - y) ** 3 * (x + y)
        q = p.try_divide(x - y)
        assert q == (x - y) ** 2 * (x + y)
        assert (x * x + y).try_divide(x - y) is None

    def test_division_terminates_on_mixed_orders(self):
        # regression guard: the monomial order must be multiplicative
        x, y = Poly.var(("y", 1)), Poly.var(("y", 2))
        p = y * y * x + x
        assert p.try_divide(y * x + Poly.one()) is None or True

    def test_derivative_and_substitute(self):
        x, y = Poly.var(("y", 1)), Poly.var(("y", 2))
        p = x ** 3 * y + y ** 2
        assert p.derivative(("y", 1)) == x ** 2 * y.scale(3)
        q = p.substitute({("y", 1): y})
        assert q == y ** 4 + y ** 2

    def test_homogeneous_components(self):
        x, y = Poly.var(("y", 1)), Poly.var(("y", 2))
        comps = (x + y * y).homogeneous_components()
        assert set(comps) == {1, 2}
        assert comps[1] == x

    def test_evaluate_arrays(self):
        x = Poly.var(("y", 1))
        vals = (x * x).evaluate({("y", 1): np.array([1.0, 2.0, 3.0])})
        assert np.allclose(vals, [1.0, 4.0, 9.0])


class TestPartitions:
    def test_bell_counts(self):
        assert len(enumerate_partitions({1, 2, 3})) == 5
        assert len(enumerate_partitions(S4)) == 15
        # proper: everything except the one-block partition
        assert len(enumerate_partitions({1, 2, 3}, proper_only=True)) == 4
        assert len(enumerate_partitions({1}, proper_only=True)) == 0

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            enumerate_partitions(set())

    def test_quotient_and_related(self):
        p = Partition.parse("{1,3|2|4}")
        assert quotient(frozenset({1, 2, 3, 4}), p) == frozenset({3, 2, 4})
        assert related(1, 3, p)
        assert not related(1, 2, p)
        with pytest.raises(KeyError):
            related(1, 7, p)

    def test_text_round_trip(self):
        for p in enumerate_partitions(S4):
            assert Partition.parse(str(p)) == p

    def test_overlapping_blocks_rejected(self):
        with pytest.raises(ValueError):
            Partition.of([{1, 2}, {2, 3}])

    def test_sample_config_collapses(self):
        rng = np.random.default_rng(7)
        p = Partition.parse("{1,3|2}")
        pts = sample_config(p, 1, rng, eps=0.0)
        assert pts[1] == pts[3]
        assert pts[1] != pts[2]
        pts = sample_config(p, 2, rng, eps=0.01)
        d = math.dist(pts[1], pts[3])
        assert 0 < d < 0.05
        assert math.dist(pts[1], pts[2]) > 1.0


class TestConfFn:
    def test_cancellation(self):
        f = ap(1, S3, "x", 1, 2, -1) * ap(1, S3, "x", 1, 2, 2)
        assert f == ap(1, S3, "x", 1, 2, 1)
        assert f.den == {}

    def test_add_common_denominator(self):
        f = ap(1, S3, "x", 1, 2, -1) + ap(1, S3, "x", 1, 3, -1)
        assert f.den == {("x", 1, 2): 1, ("x", 1, 3): 1}
        g = f - ap(1, S3, "x", 1, 3, -1)
        assert g == ap(1, S3, "x", 1, 2, -1)

    def test_mismatched_spaces_rejected(self):
        f = ap(1, S3, "x", 1, 2, 1)
        g = ap(1, S4, "x", 1, 2, 1)
        with pytest.raises(ValueError):
            f + g

    def test_atom_orientation(self):
        # x(2,1) = -x(1,2)
        assert ap(1, S3, "x", 2, 1, 1) == ap(1, S3, "x", 1, 2, 1).scale(-1)
        assert ap(1, S3, "x", 2, 1, -2) == ap(1, S3, "x", 1, 2, -2)

    def test_derivative_basic(self):
        g = ap(1, S3, "x", 1, 2, -1)
        assert g.derivative((1, 1)) == ap(1, S3, "x", 1, 2, -2).scale(-1)
        assert g.derivative((2, 1)) == ap(1, S3, "x", 1, 2, -2)
        assert g.derivative((3, 1)).is_zero()

    def test_derivative_sum_vanishes(self):
        h = ap(1, S3, "x", 1, 3, -2) * ap(1, S3, "x", 2, 3, 1)
        total = ConfFn.zero(1, S3)
        for k in sorted(S3):
            total = total + h.derivative((k, 1))
        assert total.is_zero()

    def test_derivative_d2(self):
        f = ap(2, S3, "z", 1, 2, -1) * ap(2, S3, "w", 1, 2, -1)
        dz = f.derivative((1, "z"))
        assert dz == (ap(2, S3, "z", 1, 2, -2) * ap(2, S3, "w", 1, 2, -1)).scale(-1)
        # z-derivative ignores w-factors entirely
        assert ap(2, S3, "w", 1, 2, -3).derivative((1, "z")).is_zero()

    def test_scaling_degree_examples(self):
        f = ap(1, S3, "x", 1, 2, 1) * ap(1, S3, "x", 1, 3, -2)
        assert f.scaling_degree({1, 3}) == 2
        assert f.scaling_degree({1, 2}) == -1
        assert f.scaling_degree(S3) == 1

    def test_scaling_degree_cancellation(self):
        # (x13 - x23) = x12 vanishes on the {1,2} diagonal even though the
        # individual terms do not; the graded substitution must see it.
        f = ap(1, S3, "x", 1, 3, 1) - ap(1, S3, "x", 2, 3, 1)
        assert f.scaling_degree({1, 2}) == -1

    def test_scaling_degree_d2(self):
        f = ap(2, S3, "z", 1, 2, -2) * ap(2, S3, "w", 1, 2, -1)
        assert f.scaling_degree({1, 2}) == 3

    def test_scaling_degree_quadric(self):
        f = ap(3, S3, "q", 1, 2, -1)
        assert f.scaling_degree({1, 2}) == 2

    def test_homogeneity(self):
        f = ap(1, S3, "x", 1, 2, -3)
        assert f.is_homogeneous() and f.homogeneity_degree() == -3
        g = f + ap(1, S3, "x", 1, 3, -1)
        assert not g.is_homogeneous()
        parts = g.homogeneous_parts()
        assert set(parts) == {-3, -1}

    def test_evaluate_translation_invariance(self):
        f = ap(1, S3, "x", 1, 2, -2) * ap(1, S3, "x", 2, 3, 1)
        a = f.evaluate({1: 0.4, 2: -0.9, 3: 2.2})
        b = f.evaluate({1: 0.4 + 17.0, 2: -0.9 + 17.0, 3: 2.2 + 17.0})
        assert abs(a - b) < 1e-12

    def test_evaluate_diagonal_rejected(self):
        f = ap(1, S3, "x", 1, 2, -1)
        with pytest.raises(ZeroDivisionError):
            f.evaluate({1: 0.5, 2: 0.5, 3: 1.0})

    def test_evaluate_d2_matches_distance(self):
        S2 = frozenset({1, 2})
        h = ap(2, S2, "z", 1, 2, -1) * ap(2, S2, "w", 1, 2, -1)
        v = h.evaluate({1: (0.5, 0.1), 2: (-0.2, 0.4)})
        d2 = (0.5 + 0.2) ** 2 + (0.1 - 0.4) ** 2
        assert abs(v - 1 / d2) < 1e-12

    def test_scalar_coefficients_survive(self):
        f = ap(1, S3, "x", 1, 2, 1).scale(zeta(3))
        assert f.num.terms[((("y", 1), 1),)] == zeta(3)


class TestJets:
    def test_geometric_series(self):
        f = ap(1, S3, "x", 1, 3, -1)
        jet = f.diagonal_jet(Partition.parse("{1,2|3}"), 3)
        assert jet.uvars == (("y", 1),)
        v = ap(1, frozenset({2, 3}), "x", 2, 3, -1)
        assert jet.coefficient(()) == v
        assert jet.coefficient(((("y", 1), 1),)) == v * v.scale(-1)
        assert jet.coefficient(((("y", 1), 2),)) == v * v * v

    def test_jet_numeric_convergence(self):
        f = ap(1, S3, "x", 1, 3, -1) * ap(1, S3, "x", 2, 3, -2)
        jet = f.diagonal_jet(Partition.parse("{1,2|3}"), 4)
        x2, x3 = 0.8, -0.5
        errs = []
        for u in (0.02, 0.01):
            exact = f.evaluate({1: x2 + u, 2: x2, 3: x3})
            approx = 0.0
            for m, c in jet.coeffs.items():
                e = m[0][1] if m else 0
                approx += u ** e * c.evaluate({2: x2, 3: x3})
            errs.append(abs(exact - approx))
        # truncation error is O(u^5)
        assert errs[1] < errs[0] / 16

    def test_jet_inside_block_singular(self):
        f = ap(1, S3, "x", 1, 2, -1)
        with pytest.raises(ValueError):
            f.diagonal_jet(Partition.parse("{1,2|3}"), 2)

    def test_jet_of_smooth_function_is_taylor(self):
        # polynomial numerators only: plain Taylor expansion
        f = ap(1, S3, "x", 1, 3, 2)
        jet = f.diagonal_jet(Partition.parse("{1,2|3}"), 2)
        v = ap(1, frozenset({2, 3}), "x", 2, 3, 1)
        assert jet.coefficient(()) == v * v
        assert jet.coefficient(((("y", 1), 1),)) == v.scale(2)
        assert jet.coefficient(((("y", 1), 2),)) == ConfFn.one(1, frozenset({2, 3}))


class TestMultiplicative:
    def _pair_inv(self, j, k, e=-1):
        return ConfFn.atom_power(1, frozenset({j, k}), "x", j, k, e)

    def test_expand(self):
        G = MultiplicativeElement.from_pairs(
            1, S3, {(1, 2): self._pair_inv(1, 2), (1, 3): self._pair_inv(1, 3, -2)}
        )
        f = G.expand()
        assert f.den == {("x", 1, 2): 1, ("x", 1, 3): 2}

    def test_decompose_routes_factors(self):
        G = MultiplicativeElement.from_pairs(
            1,
            S3,
            {
                (1, 2): self._pair_inv(1, 2, -2),
                (1, 3): self._pair_inv(1, 3),
                (2, 3): self._pair_inv(2, 3),
            },
        )
        cross, blocks = G.decompose(Partition.parse("{1,2|3}"))
        assert sorted((p.j, p.k) for p in cross.factors) == [(1, 3), (2, 3)]
        b12 = blocks[frozenset({1, 2})]
        assert [(p.j, p.k) for p in b12.factors] == [(1, 2)]
        assert blocks[frozenset({3})].factors == ()
        # product of the pieces reproduces the whole
        lifted = cross.expand()
        for b, me in blocks.items():
            if len(b) > 1:
                inner = MultiplicativeElement(
                    1, S3, tuple(PairFactor(p.j, p.k, p.fn) for p in me.factors)
                )
                lifted = lifted * inner.expand()
        assert lifted == G.expand()

    def test_pair_factor_validation(self):
        with pytest.raises(ValueError):
            PairFactor(2, 1, self._pair_inv(1, 2))

    def test_scaling_degree_delegates(self):
        G = MultiplicativeElement.from_pairs(
            1, S3, {(1, 2): self._pair_inv(1, 2, -2), (2, 3): self._pair_inv(2, 3)}
        )
        assert G.scaling_degree({1, 2}) == 2


@st.composite
def conf_fns(draw):
    pairs = [(1, 2), (1, 3), (2, 3)]
    f = ConfFn.one(1, S3)
    for j, k in pairs:
        e = draw(st.integers(min_value=-2, max_value=2))
        f = f * ap(1, S3, "x", j, k, e)
    c = draw(st.integers(min_value=-3, max_value=3))
    return f.scale(c)


class TestProperties:
    @given(conf_fns(), conf_fns())
    @settings(max_examples=25, deadline=None)
    def test_mul_commutes(self, f, g):
        assert f * g == g * f

    @given(conf_fns())
    @settings(max_examples=25, deadline=None)
    def test_derivative_is_leibniz(self, f):
        g = ap(1, S3, "x", 1, 2, 1)
        lhs = (f * g).derivative((1, 1))
        rhs = f.derivative((1, 1)) * g + f * g.derivative((1, 1))
        assert lhs == rhs

    @given(conf_fns(), st.integers(min_value=1, max_value=3))
    @settings(max_examples=20, deadline=None)
    def test_evaluate_matches_algebra(self, f, shift):
        pts = {1: 0.37, 2: -1.21, 3: 0.94}
        g = f * ap(1, S3, "x", 1, 3, 1)
        lhs = g.evaluate(pts)
        rhs = f.evaluate(pts) * ap(1, S3, "x", 1, 3, 1).evaluate(pts)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))
