"""Prolonged embeddings, moving frames, induced nonlinear connection and the
restriction of the ambient coframe."""

import dataclasses

import numpy as np
import pytest

from osculator.ambient import AmbientSpace, JetPoint, jet_transform
from osculator.expr import Evaluator
from osculator.scenario import bundled
from osculator.submanifold import (
    Embedding,
    RankDeficiencyError,
    induced_nonlinear,
    moving_frame,
    prolong,
    prolongation_residual,
    pull_point,
    reparametrize,
    restrict_coframe,
)

EUCLID4 = [["1" if a == b else "0" for b in range(4)] for a in range(4)]


def sub_jet(rng, m, lo=-1.0, hi=1.0):
    return JetPoint(rng.uniform(lo, hi, m), rng.normal(size=m), rng.normal(size=m), "sub")


def random_orthogonal(rng, k):
    q, r = np.linalg.qr(rng.normal(size=(k, k)))
    return q * np.sign(np.diag(r))


@pytest.fixture(scope="module")
def surface4():
    """A surface in Euclidean 4-space, so the normal gauge group is O(2)."""
    return Embedding(AmbientSpace(EUCLID4), ["u1", "u2", "u1^2 - 0.5*u2", "sin(u2)*u1"])


class TestProlong:
    def test_linear_embedding(self, euclid3):
        emb = Embedding(euclid3, ["u1 + 2*u2", "3*u1 - u2", "u1"])
        A = np.array([[1.0, 2.0], [3.0, -1.0], [1.0, 0.0]])
        q = JetPoint([0.3, -0.2], [1.0, 2.0], [0.5, -1.5], "sub")
        p = prolong(emb, q)
        np.testing.assert_allclose(p.y1, A @ q.v1)
        np.testing.assert_allclose(p.y2, A @ q.v2)

    def test_cylinder_point(self, cylinder):
        p = prolong(cylinder, JetPoint([0, 0], [1, 1], [0, 0], "sub"))
        np.testing.assert_allclose(p.x, [1.0, 0.0, 0.0], atol=1e-16)
        np.testing.assert_allclose(p.y1, [0.0, 1.0, 1.0], atol=1e-16)
        np.testing.assert_allclose(p.y2, [-0.5, 0.0, 0.0], atol=1e-16)

    def test_matches_curve_jets(self, rng):
        """y1, y2 are the velocity and half acceleration of the image of a curve."""
        emb = bundled("sphere_block").embedding_obj()
        q = sub_jet(rng, 2)
        u = lambda t: q.u + t * q.v1 + t**2 * q.v2

        def x_of(t):
            return Evaluator(dict(zip(emb.u_names, u(t)))).array(emb.x)

        h = 1e-4
        vel = (x_of(h) - x_of(-h)) / (2 * h)
        half_acc = (x_of(h) - 2 * x_of(0) + x_of(-h)) / (2 * h * h)
        p = prolong(emb, q)
        np.testing.assert_allclose(p.y1, vel, atol=1e-7)
        np.testing.assert_allclose(p.y2, half_acc, atol=1e-6)

    def test_jacobian_rank(self, cylinder, rng):
        for _ in range(5):
            q = sub_jet(rng, 2)
            J = Evaluator(q.env()).array(cylinder.jacobian)
            assert np.linalg.matrix_rank(J) == 6

    def test_structural_identities(self, rng):
        emb = bundled("sphere_block").embedding_obj()
        for _ in range(5):
            assert prolongation_residual(emb, sub_jet(rng, 2)) < 1e-10

    def test_rank_deficiency(self, euclid3):
        emb = Embedding(euclid3, ["u1^2", "u2", "0"])
        with pytest.raises(RankDeficiencyError):
            prolong(emb, JetPoint([0.0, 0.3], [1, 0], [0, 0], "sub"))
        with pytest.raises(RankDeficiencyError):
            moving_frame(emb, JetPoint([0.0, 0.3], [1, 0], [0, 0], "sub"))

    @pytest.mark.parametrize("coords", [["u1", "u2", "u3"], ["u1", "u1^2", "0"]])
    def test_dimension_bounds(self, euclid3, coords):
        with pytest.raises(ValueError, match="1 < m < n"):
            Embedding(euclid3, coords)


class TestMovingFrame:
    def test_plane(self, euclid3):
        mf = moving_frame(Embedding(euclid3, ["u1", "u2", "0"]), JetPoint([0.1, 0.2], [1, 0], [0, 0], "sub"))
        np.testing.assert_array_equal(mf.B, np.eye(3)[:, :2])
        np.testing.assert_allclose(np.abs(mf.Bn[:, 0]), [0.0, 0.0, 1.0])
        np.testing.assert_allclose(mf.B_t, mf.B.T, atol=1e-15)
        np.testing.assert_allclose(mf.B_n, mf.Bn.T, atol=1e-15)

    def test_cylinder_invariants(self, cylinder):
        mf = moving_frame(cylinder, JetPoint([0, 0], [1, 1], [0, 0], "sub"))
        assert max(mf.residuals().values()) < 1e-12

    def test_invariants_bundled(self, rng):
        for name in ("flat_linear", "cylinder", "sphere_block"):
            sc = bundled(name)
            emb = sc.embedding_obj()
            for q in sc.jet_points():
                assert max(moving_frame(emb, q).residuals().values()) < 1e-10

    def test_invariants_y_dependent_metric(self, ydep3, rng):
        emb = Embedding(ydep3, ["u1", "u2", "0.3*u1*u2 + sin(u1)"])
        for _ in range(5):
            assert max(moving_frame(emb, sub_jet(rng, 2)).residuals().values()) < 1e-10

    def test_gauge(self, surface4, rng):
        q = sub_jet(rng, 2)
        A = random_orthogonal(rng, 2)
        base, turned = moving_frame(surface4, q), moving_frame(surface4, q, A)
        assert max(turned.residuals().values()) < 1e-12
        np.testing.assert_allclose(turned.Bn, base.Bn @ A.T, atol=1e-14)
        a, b = induced_nonlinear(surface4, q), induced_nonlinear(surface4, q, A)
        np.testing.assert_allclose(b.M1, a.M1, atol=1e-13)
        np.testing.assert_allclose(b.M2, a.M2, atol=1e-13)
        np.testing.assert_allclose(b.K1, A @ a.K1, atol=1e-13)
        np.testing.assert_allclose(b.K2, A @ a.K2, atol=1e-13)
        np.testing.assert_allclose(turned.Bn @ b.K1, base.Bn @ a.K1, atol=1e-13)
        assert restrict_coframe(surface4, q, gauge=A) < 1e-12


class TestInducedNonlinear:
    def test_flat_linear_zero(self):
        sc = bundled("flat_linear")
        emb = sc.embedding_obj()
        for q in sc.jet_points():
            ind = induced_nonlinear(emb, q)
            for arr in (ind.M1, ind.M2, ind.K1, ind.K2):
                assert not np.abs(arr).max() > 0

    def test_cylinder_hand_value(self, cylinder):
        """B0 has the single column (-1, 0, 0), which is normal: M1 = 0, |K1| = [[1, 0]]."""
        q = JetPoint([0, 0], [1, 0], [0, 0], "sub")
        ind = induced_nonlinear(cylinder, q)
        np.testing.assert_allclose(ind.M1, np.zeros((2, 2)), atol=1e-16)
        np.testing.assert_allclose(np.abs(ind.K1), [[1.0, 0.0]], atol=1e-15)
        assert restrict_coframe(cylinder, q) < 1e-15

    def test_sphere_block_from_tangent_projection(self, rng):
        """M1 = B^alpha_a (B0 + M1_amb B): recompute with numpy from the numeric
        ambient data at the prolonged point."""
        sc = bundled("sphere_block")
        space = sc.space()
        emb = sc.embedding_obj(space)
        q = sc.jet_points()[1]
        ev = Evaluator(q.env())
        B, B2 = ev.array(emb.B), ev.array(emb.B2)
        p = prolong(emb, q)
        M1a = space.evaluator(p).array(space.M1)
        mf = moving_frame(emb, q)
        W = np.einsum("abg,b->ag", B2, q.v1) + M1a @ B
        ind = induced_nonlinear(emb, q)
        np.testing.assert_allclose(ind.M1, mf.B_t @ W, atol=1e-13)
        np.testing.assert_allclose(ind.K1, mf.B_n @ W, atol=1e-13)


class TestRestriction:
    def test_flat_linear_exact(self):
        sc = bundled("flat_linear")
        emb = sc.embedding_obj()
        for q in sc.jet_points():
            assert restrict_coframe(emb, q) == 0.0

    @pytest.mark.parametrize("name", ["cylinder", "sphere_block"])
    def test_random_points(self, name, rng):
        emb = bundled(name).embedding_obj()
        worst = max(restrict_coframe(emb, sub_jet(rng, 2, 0.2, 1.2)) for _ in range(20))
        assert worst < 1e-9

    def test_y_dependent_metric(self, ydep3, rng):
        emb = Embedding(ydep3, ["u1", "u2", "0.3*u1*u2 + sin(u1)"])
        assert max(restrict_coframe(emb, sub_jet(rng, 2)) for _ in range(5)) < 1e-9

    @pytest.mark.parametrize("field", ["K1", "K2", "M1"])
    def test_mutation_detected(self, cylinder, field):
        q = JetPoint([0.3, 0.1], [1.0, 0.5], [0.2, -0.4], "sub")
        ind = induced_nonlinear(cylinder, q)
        bad = dataclasses.replace(ind, **{field: getattr(ind, field) + 1e-3})
        assert restrict_coframe(cylinder, q) < 1e-12
        assert restrict_coframe(cylinder, q, induced=bad) >= 1e-4


class TestChartChange:
    OLD_IN_NEW = ["u1 + 0.1*u2^2", "u2 - 0.2*u1*u2 + 0.05*u1^2"]

    def test_same_ambient_point(self, rng):
        emb = bundled("sphere_block").embedding_obj()
        new = reparametrize(emb, self.OLD_IN_NEW)
        q = sub_jet(rng, 2, 0.2, 0.9)
        q2, J = pull_point(self.OLD_IN_NEW, q)
        np.testing.assert_allclose(prolong(new, q2).coords, prolong(emb, q).coords, atol=1e-12)
        np.testing.assert_allclose(q.v1, J @ q2.v1, atol=1e-12)
        # the new jet maps back to the old one under the chart change
        np.testing.assert_allclose(jet_transform(self.OLD_IN_NEW, q2).coords, q.coords, atol=1e-12)

    def test_restriction_in_new_chart(self, rng):
        emb = bundled("sphere_block").embedding_obj()
        new = reparametrize(emb, self.OLD_IN_NEW)
        q2, _ = pull_point(self.OLD_IN_NEW, sub_jet(rng, 2, 0.2, 0.9))
        assert restrict_coframe(new, q2) < 1e-9
        assert max(moving_frame(new, q2).residuals().values()) < 1e-10

    def test_induced_connection_transformation(self, rng):
        """The induced K1 is a d-tensor: K1_new = K1_old J (same normals)."""
        emb = bundled("cylinder").embedding_obj()
        new = reparametrize(emb, self.OLD_IN_NEW)
        q = sub_jet(rng, 2, 0.2, 0.9)
        q2, J = pull_point(self.OLD_IN_NEW, q)
        a, b = induced_nonlinear(emb, q), induced_nonlinear(new, q2)
        Bn_old, Bn_new = moving_frame(emb, q).Bn, moving_frame(new, q2).Bn
        np.testing.assert_allclose(Bn_new @ b.K1, Bn_old @ a.K1 @ J, atol=1e-12)

    def test_wrong_length(self, cylinder):
        with pytest.raises(ValueError):
            reparametrize(cylinder, ["u1"])
