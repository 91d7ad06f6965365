import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_spd
from hees.linalg import sym_eig
from hees.objectives import (
    AffineMap,
    DimensionMismatch,
    QuadraticProblem,
    SingularMap,
    affine_pullback,
    evaluate,
    f_mu,
    make_ellipsoid,
    sphere,
)
from hees.sampling import RngStream


def random_problem(rng, d):
    return QuadraticProblem(random_spd(rng, d), rng.standard_normal(d), float(rng.uniform(-3, 3)))


def random_map(rng, d):
    while True:
        M = rng.standard_normal((d, d))
        if abs(np.linalg.det(M)) > 0.1:
            return AffineMap(M, rng.standard_normal(d))


class TestEvaluate:
    def test_at_optimum(self, nprng):
        q = random_problem(nprng, 4)
        assert evaluate(q, q.optimum) == q.optimal_value

    def test_sphere(self):
        assert evaluate(sphere(2), [3.0, 4.0]) == 12.5

    def test_shifted_ellipse(self):
        q = QuadraticProblem(np.diag([4.0, 1.0]), np.array([1.0, 0.0]), 2.0)
        assert evaluate(q, [2.0, 1.0]) == 4.5

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            evaluate(sphere(3), [1.0, 2.0])

    def test_rejects_indefinite(self):
        with pytest.raises(ValueError):
            QuadraticProblem(np.diag([1.0, -1.0]), np.zeros(2))

    def test_evaluate_many_matches(self, nprng):
        q = random_problem(nprng, 5)
        X = nprng.standard_normal((7, 5))
        np.testing.assert_allclose(q.evaluate_many(X), [q(x) for x in X], rtol=1e-13)


class TestEllipsoid:
    def test_condition_one_is_identity(self):
        np.testing.assert_array_equal(make_ellipsoid(5, 1.0, normalize_det=True).hessian, np.eye(5))

    def test_two_d_normalized(self):
        np.testing.assert_allclose(np.diag(make_ellipsoid(2, 4.0, normalize_det=True).hessian), [0.5, 2.0], rtol=1e-15)

    def test_unnormalized_spectrum(self):
        lam = np.diag(make_ellipsoid(3, 100.0).hessian)
        np.testing.assert_allclose(lam, [1.0, 10.0, 100.0], rtol=1e-14)

    @pytest.mark.parametrize("normalize", [False, True])
    def test_rotation_keeps_spectrum(self, normalize):
        plain = make_ellipsoid(6, 1e4, normalize)
        rot = make_ellipsoid(6, 1e4, normalize, RngStream(9), rotated=True)
        assert not np.allclose(rot.hessian, plain.hessian)
        np.testing.assert_allclose(sym_eig(rot.hessian), np.diag(plain.hessian), rtol=1e-9)

    def test_rotated_needs_rng(self):
        with pytest.raises(ValueError):
            make_ellipsoid(3, 10.0, rotated=True)


class TestPullback:
    def test_identity_map(self, nprng):
        q = random_problem(nprng, 3)
        p = affine_pullback(q, AffineMap(np.eye(3), np.zeros(3)))
        np.testing.assert_allclose(p.hessian, q.hessian, atol=1e-15)
        np.testing.assert_array_equal(p.optimum, q.optimum)

    def test_scaling(self):
        p = affine_pullback(sphere(3), AffineMap(2 * np.eye(3), np.zeros(3)))
        np.testing.assert_allclose(p.hessian, 0.25 * np.eye(3), atol=1e-16)
        np.testing.assert_array_equal(p.optimum, np.zeros(3))

    def test_pointwise(self, nprng):
        d = 5
        q = random_problem(nprng, d)
        g = random_map(nprng, d)
        p = affine_pullback(q, g)
        for _ in range(100):
            x = 3 * nprng.standard_normal(d)
            assert p(g(x)) == pytest.approx(q(x), rel=1e-9, abs=1e-12)

    def test_singular(self):
        with pytest.raises(SingularMap):
            AffineMap(np.array([[1.0, 2.0], [2.0, 4.0]]), np.zeros(2))

    def test_inverse(self, nprng):
        g = random_map(nprng, 4)
        x = nprng.standard_normal(4)
        np.testing.assert_allclose(g.inverse(g(x)), x, atol=1e-12)


class TestFMu:
    def test_zero_at_optimum(self, nprng):
        q = random_problem(nprng, 3)
        assert f_mu(q, q.optimum) == 0.0

    def test_unit_disc(self):
        assert f_mu(sphere(2), [0.6, 0.8]) == pytest.approx(math.sqrt(math.pi), rel=1e-14)

    def test_ellipse_closed_form(self):
        q = QuadraticProblem(np.diag([4.0, 1.0]), np.zeros(2))
        assert f_mu(q, [1.0, 0.0]) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)

    def test_ellipse_monte_carlo(self):
        q = QuadraticProblem(np.diag([4.0, 1.0]), np.zeros(2))
        level = q([1.0, 0.0])
        rng = np.random.default_rng(7)
        # sublevel ellipse has semi-axes 1 and 2
        X = rng.uniform([-1.0, -2.0], [1.0, 2.0], (10**6, 2))
        area = 8.0 * np.mean(q.evaluate_many(X) < level)
        assert math.sqrt(area) == pytest.approx(f_mu(q, [1.0, 0.0]), rel=0.01)

    def test_three_d_ball(self):
        # unit ball volume 4pi/3
        assert f_mu(sphere(3), [0.0, 0.0, 1.0]) ** 3 == pytest.approx(4 * math.pi / 3, rel=1e-13)

    def test_sphere_linearity(self, nprng):
        d = 7
        ratios = []
        for _ in range(50):
            m = nprng.standard_normal(d) * 10.0 ** nprng.uniform(-5, 5)
            ratios.append(f_mu(sphere(d), m) / np.linalg.norm(m))
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-10)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_order_equivalence(self, seed, d):
        rng = np.random.default_rng(seed)
        q = random_problem(rng, d)
        x, y = rng.standard_normal((2, d))
        fx, fy = q(x), q(y)
        if abs(fx - fy) > 1e-9 * max(abs(fx), abs(fy), 1.0):
            assert (fx < fy) == (f_mu(q, x) < f_mu(q, y))

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6))
    def test_pullback_relation(self, seed, d):
        rng = np.random.default_rng(seed)
        q = random_problem(rng, d)
        g = random_map(rng, d)
        m = rng.standard_normal(d)
        scale = abs(np.linalg.det(g.matrix)) ** (1.0 / d)
        assert f_mu(affine_pullback(q, g), g(m)) == pytest.approx(scale * f_mu(q, m), rel=1e-9)
