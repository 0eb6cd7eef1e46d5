"""Ambient metric, canonical nonlinear connection, adapted frames, canonical
linear connection and jet coordinate changes."""

import numpy as np
import pytest

from osculator.ambient import (
    AmbientSpace,
    DegenerateMetricError,
    JetPoint,
    adapted_frame_pair,
    canonical_connection,
    christoffel,
    covariant_derivative,
    direct_coefficients,
    jet_transform,
    spray_and_dual,
)
from osculator.expr import parse
from osculator.symbolic import sym_array
from osculator.tensor import finite_difference, transform

POLAR = [["1", "0"], ["0", "x1^2"]]


def random_point(rng, n, lo=0.5, hi=1.5):
    return JetPoint(rng.uniform(lo, hi, n), rng.normal(size=n), rng.normal(size=n))


def christoffel_oracle(space, p, h=1e-5):
    """Christoffel symbols from finite-difference metric derivatives."""
    n = space.n
    x = p.x

    def g_at(xx):
        return space.evaluator(JetPoint(xx, p.y1, p.y2)).array(space.g)

    dg = np.zeros((n, n, n))  # dg[a, b, c] = d g_ab / d x^c
    for c in range(n):
        e = np.zeros(n)
        e[c] = h
        dg[:, :, c] = (g_at(x + e) - g_at(x - e)) / (2 * h)
    gi = np.linalg.inv(g_at(x))
    return 0.5 * np.einsum("ad,dcb->abc", gi, dg + np.swapaxes(dg, 0, 1).transpose(0, 2, 1) - dg.transpose(2, 0, 1))


class TestChristoffel:
    def test_euclidean_zero(self):
        space = AmbientSpace([["1", "0"], ["0", "1"]])
        gam = christoffel(space, JetPoint([0.3, 0.4], [1, 2], [0, 0]))
        assert np.all(gam.components == 0)

    def test_polar_values(self):
        space = AmbientSpace(POLAR)
        p = JetPoint([2.0, 0.7], [1.0, 1.0], [0.0, 0.0])
        gam = christoffel(space, p).components
        expected = np.zeros((2, 2, 2))
        expected[0, 1, 1] = -2.0
        expected[1, 0, 1] = expected[1, 1, 0] = 0.5
        np.testing.assert_allclose(gam, expected, atol=1e-15)
        np.testing.assert_allclose(christoffel_oracle(space, p), expected, atol=1e-9)

    def test_symmetric_and_matches_oracle(self, rng):
        space = AmbientSpace([["1 + x2^2", "x1*x3", "0"], ["x1*x3", "2 + sin(x1)", "0"], ["0", "0", "exp(x2)"]])
        for _ in range(5):
            p = random_point(rng, 3)
            gam = christoffel(space, p).components
            assert np.array_equal(gam, np.swapaxes(gam, 1, 2))
            np.testing.assert_allclose(gam, christoffel_oracle(space, p), atol=1e-8)

    def test_not_tensorial_under_quadratic_chart(self, polar3):
        old_in_new = ["x1 + 0.3*x2^2", "x2 + 0.2*x1*x3", "x3 - 0.25*x1^2"]
        new_space = polar3.reparametrize(old_in_new)
        p_new = JetPoint([1.2, 0.4, -0.3], [0.5, 1.0, -0.2], [0.1, 0.0, 0.3])
        p_old = jet_transform(old_in_new, p_new)
        ev = new_space.evaluator(p_new)
        from osculator.symbolic import gradient

        J = ev.array(gradient(sym_array(old_in_new), new_space.x_names))
        Ji = np.linalg.inv(J)
        # transform() takes new_up = M old_up, so up slots get J^-1
        gam_old = christoffel(polar3, p_old)
        as_tensor = transform(gam_old, [Ji, Ji, Ji])
        gam_new = christoffel(new_space, p_new).components
        assert np.abs(as_tensor.components - gam_new).max() > 1e-3
        # the metric itself is a tensor
        g_old = polar3.evaluator(p_old).array(polar3.g)
        np.testing.assert_allclose(J.T @ g_old @ J, ev.array(new_space.g), atol=1e-13)


class TestSprayAndDual:
    def test_euclidean(self):
        G, N = spray_and_dual(AmbientSpace([["1", "0"], ["0", "1"]]), JetPoint([0, 0], [1, 1], [1, 0]))
        assert not G.any() and not N.M1.any() and not N.M2.any()

    def test_polar_values(self):
        G, N = spray_and_dual(AmbientSpace(POLAR), JetPoint([2.0, 0.0], [1.0, 1.0], [0.0, 0.0]))
        np.testing.assert_allclose(G, [-1.0, 0.5], atol=1e-15)
        np.testing.assert_allclose(N.M1, [[0.0, -2.0], [0.5, 0.5]], atol=1e-15)

    def test_dual_coefficients_match_spray_derivatives(self, ydep3, rng):
        p = random_point(rng, 3)
        _, N = spray_and_dual(ydep3, p)
        for b in range(3):
            col = [
                finite_difference(
                    lambda w, a=a: ydep3.evaluator(JetPoint(p.x, w, p.y2)).array(ydep3.spray)[a], p.y1, b
                )
                for a in range(3)
            ]
            np.testing.assert_allclose(N.M1[:, b], col, atol=1e-6)

    def test_homogeneity(self, rng):
        space = AmbientSpace([["1 + x2^2", "0.1*x1"], ["0.1*x1", "2 + sin(x1)"]])
        p = random_point(rng, 2)
        G1, _ = spray_and_dual(space, p)
        G3, _ = spray_and_dual(space, JetPoint(p.x, 3 * p.y1, p.y2))
        np.testing.assert_allclose(G3, 9 * G1, rtol=1e-10)

    def test_second_dual_from_sprays_operator(self, polar3, rng):
        """M2 = (Gamma M1 + M1 M1)/2 with Gamma = y1 d/dx + 2 y2 d/dy1, by differences."""
        p = random_point(rng, 3)
        _, N = spray_and_dual(polar3, p)

        def M1_at(c):
            return polar3.evaluator(JetPoint.from_coords(c)).array(polar3.M1)

        c0 = p.coords
        h = 1e-6
        direction = np.concatenate([p.y1, 2 * p.y2, np.zeros(3)])
        gamma_M1 = (M1_at(c0 + h * direction) - M1_at(c0 - h * direction)) / (2 * h)
        np.testing.assert_allclose(N.M2, 0.5 * (gamma_M1 + N.M1 @ N.M1), atol=1e-7)


class TestAdaptedFrames:
    def test_zero_connection(self):
        N1, N2 = direct_coefficients(np.zeros((2, 2)), np.zeros((2, 2)))
        assert not N1.any() and not N2.any()

    def test_direct_from_dual(self):
        M1 = np.array([[0.0, -2.0], [0.5, 0.5]])
        M2 = np.array([[0.3, 0.1], [-0.2, 0.7]])
        N1, N2 = direct_coefficients(M1, M2)
        np.testing.assert_allclose(M1 @ M1, [[-1.0, -1.0], [0.25, -0.75]])
        np.testing.assert_allclose(N2, M2 - M1 @ M1)

    def test_duality_at_random_points(self, rng):
        space = AmbientSpace(POLAR)
        for _ in range(20):
            _, N = spray_and_dual(space, random_point(rng, 2))
            pair = adapted_frame_pair(N)
            assert pair.duality_residual() < 1e-12
            assert np.linalg.det(pair.frame) == pytest.approx(1.0, abs=1e-12)

    def test_horizontal_pairing(self):
        _, N = spray_and_dual(AmbientSpace(POLAR), JetPoint([2.0, 0.0], [1.0, 1.0], [0.0, 0.0]))
        pair = adapted_frame_pair(N)
        assert np.abs(pair.coframe[2:4] @ pair.frame[:, 0:2]).max() < 1e-12


class TestJetTransform:
    def test_identity(self):
        p = JetPoint([0.2, 0.3], [1.0, -1.0], [0.5, 0.25])
        q = jet_transform(["x1", "x2"], p)
        assert q == p

    def test_linear(self):
        p = JetPoint([0.2, 0.3], [1.0, -1.0], [0.5, 0.25])
        A = np.array([[2.0, 1.0], [-1.0, 3.0]])
        q = jet_transform(["2*x1 + x2", "-x1 + 3*x2"], p)
        np.testing.assert_allclose(q.y1, A @ p.y1)
        np.testing.assert_allclose(q.y2, A @ p.y2)

    def test_square_map(self):
        q = jet_transform(["x1^2", "x2"], JetPoint([2.0, 1.0], [1.0, 0.0], [3.0, 1.0]))
        np.testing.assert_allclose(q.y1, [4.0, 0.0])
        np.testing.assert_allclose(q.y2, [13.0, 1.0])

    def test_composition(self):
        """Transforming twice equals transforming by the composed map."""
        p = JetPoint([0.4, 0.9], [0.7, -0.3], [0.2, 0.5])
        f = ["x1 + x2^2", "sin(x1) + x2"]
        g = ["x1*x2", "x2 - x1^3"]
        composed = ["(x1 + x2^2)*(sin(x1) + x2)", "sin(x1) + x2 - (x1 + x2^2)^3"]
        two = jet_transform(g, jet_transform(f, p))
        one = jet_transform(composed, p)
        np.testing.assert_allclose(two.coords, one.coords, atol=1e-13)

    def test_singular(self):
        with pytest.raises(np.linalg.LinAlgError):
            jet_transform(["x1^2", "x2"], JetPoint([0.0, 1.0], [1.0, 0.0], [0.0, 0.0]))


class TestCanonicalConnection:
    def test_euclidean_zero(self):
        conn = canonical_connection(AmbientSpace([["1", "0"], ["0", "1"]]), JetPoint([1, 2], [3, 4], [5, 6]))
        assert all(not arr.any() for arr in conn.families.values())

    @pytest.mark.parametrize("i, kind", [(0, 0), (1, 1), (0, 1), (0, 2), (2, 2)])
    def test_metric_compatibility(self, ydep3, polar3, rng, i, kind):
        for space in (ydep3, polar3):
            for _ in range(5):
                res = covariant_derivative(space, space.g, "dd", random_point(rng, 3), i, kind)
                assert np.abs(res).max() < 1e-10

    def test_second_vertical_vanishes(self, ydep3, rng):
        conn = canonical_connection(ydep3, random_point(rng, 3))
        for i in range(3):
            assert not conn[i, 2].any()

    def test_assumption_rows(self, polar3):
        assert polar3.canonical().assumption_rows == {1, 2}

    def test_scalar_derivative(self, polar3, rng):
        p = random_point(rng, 3)
        f = sym_array([parse("x1^2*y1_2 + x3")])[0]
        out = covariant_derivative(polar3, f, "", p, 0, 0)
        expected = polar3.evaluator(p).array(polar3.delta(sym_array(f), 0))
        np.testing.assert_allclose(out, expected, atol=1e-14)

    def test_leibniz(self, ydep3, rng):
        S = sym_array(["x1*y1_2 + x3^2", "sin(x2)", "y1_1 - x1*x2"])
        T = sym_array(["x2^2 + y1_3", "1 + x1*x3", "y1_1*y1_2"])
        ST = np.array([[S[a] * T[b] for b in range(3)] for a in range(3)], dtype=object)
        p = random_point(rng, 3)
        ev = ydep3.evaluator(p)
        Sv, Tv = ev.array(S), ev.array(T)
        for i, kind in [(0, 0), (1, 1), (0, 1)]:
            lhs = covariant_derivative(ydep3, ST, "ud", p, i, kind)
            dS = covariant_derivative(ydep3, S, "u", p, i, kind)
            dT = covariant_derivative(ydep3, T, "d", p, i, kind)
            rhs = np.einsum("ac,b->abc", dS, Tv) + np.einsum("a,bc->abc", Sv, dT)
            assert np.abs(lhs - rhs).max() < 1e-9

    def test_degenerate_metric(self):
        space = AmbientSpace([["x1", "0"], ["0", "1"]])
        with pytest.raises(DegenerateMetricError):
            christoffel(space, JetPoint([0.0, 1.0], [0, 0], [0, 0]))

    def test_metric_rejects_second_jet(self):
        with pytest.raises(ValueError):
            AmbientSpace([["1 + y2_1^2", "0"], ["0", "1"]])
