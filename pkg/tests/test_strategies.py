import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_spd
from hees.adaptation import ShapeMismatch
from hees.linalg import determinant
from hees.objectives import QuadraticProblem, make_ellipsoid, sphere
from hees.sampling import RngStream, sample_orthogonal
from hees.strategies import (
    ElitistParams,
    HeEsParams,
    StrategyState,
    chi_mean,
    default_params,
    he_es_step,
    initial_state,
    one_plus_four_step,
    one_plus_one_step,
    run,
)


def unit_start(d, seed=0):
    z = np.random.default_rng(seed).standard_normal(d)
    return initial_state(z / np.linalg.norm(z), 1.0)


def states_equal(a: StrategyState, b: StrategyState) -> bool:
    return (
        np.array_equal(a.mean, b.mean)
        and a.step_size == b.step_size
        and np.array_equal(a.factor, b.factor)
        and np.array_equal(a.csa_path, b.csa_path)
        and a.csa_norm == b.csa_norm
    )


class TestParams:
    def test_elitist_default(self):
        assert ElitistParams.default(10).c_sigma == pytest.approx(math.exp(0.1), rel=1e-15)

    def test_he_es_default(self):
        p = HeEsParams.default(10)
        assert p.lambda_tilde == 2 + math.floor(1.5 * math.log(10))
        w = np.array(p.weights)
        assert w.size == 2 * p.lambda_tilde and w.sum() == pytest.approx(1.0)
        assert np.all(w[p.lambda_tilde:] == 0) and np.all(np.diff(w) <= 0)
        assert 0 < p.c_s < 1 and p.d_s > 0

    def test_overrides(self):
        assert HeEsParams.default(5, lambda_tilde=7).lambda_tilde == 7
        assert default_params("one_plus_four", 4, c_sigma=1.5).c_sigma == 1.5

    def test_rejects_bad(self):
        with pytest.raises(ValueError):
            ElitistParams(c_sigma=0.9)
        with pytest.raises(ValueError):
            default_params("cma", 3)

    def test_chi_mean(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((200000, 10))
        assert chi_mean(10) == pytest.approx(np.linalg.norm(z, axis=1).mean(), rel=2e-3)


class TestHeEsStep:
    def test_sphere_keeps_factor(self):
        d = 6
        state = unit_start(d)
        rng = RngStream(3)
        p = HeEsParams.default(d)
        for _ in range(50):
            new = he_es_step(state, sphere(d), rng, p)
            np.testing.assert_allclose(new.factor, state.factor, atol=1e-12)
            state = new

    def test_deterministic(self):
        d = 5
        q = make_ellipsoid(d, 100.0)
        p = HeEsParams.default(d)
        a = he_es_step(unit_start(d), q, RngStream(11), p)
        b = he_es_step(unit_start(d), q, RngStream(11), p)
        assert states_equal(a, b)

    @given(st.floats(0.01, 0.99))
    def test_csa_norm_fixed_point(self, c_s):
        g, prev = 0.0, -1.0
        for _ in range(3000):
            g = (1 - c_s) ** 2 * g + c_s * (2 - c_s)
            assert prev <= g <= 1.0 + 1e-15
            if g == prev:
                break
            prev = g
        assert g == pytest.approx(1.0, abs=1e-12)
        assert (1 - c_s) ** 2 * 1.0 + c_s * (2 - c_s) == pytest.approx(1.0, abs=1e-15)

    def test_csa_norm_in_state(self):
        d = 4
        p = HeEsParams.default(d)
        state, rng = unit_start(d), RngStream(1)
        g = 0.0
        for _ in range(5):
            state = he_es_step(state, sphere(d), rng, p)
            g = (1 - p.c_s) ** 2 * g + p.c_s * (2 - p.c_s)
            assert state.csa_norm == pytest.approx(g, rel=1e-15)

    def test_converges_on_ellipsoid(self):
        d = 5
        q = make_ellipsoid(d, 1e3, rng=RngStream(2), rotated=True)
        tr = run("he_es", q, unit_start(d), RngStream(4), 1500)
        assert tr.final.f_mean < 1e-10

    def test_determinant_preserved(self):
        d = 6
        q = make_ellipsoid(d, 1e4)
        tr = run("he_es", q, unit_start(d), RngStream(5), 300, recorder=None)
        assert determinant(tr.final.factor) == pytest.approx(1.0, rel=1e-8)


class TestElitist:
    def _one(self, seed, d=5, factor=None):
        q = QuadraticProblem(random_spd(np.random.default_rng(seed), d), np.zeros(d))
        s = unit_start(d, seed)
        if factor is not None:
            s = initial_state(s.mean, 0.5, factor)
        return q, s

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30)
    def test_success_and_failure_branches(self, seed):
        d = 5
        q, state = self._one(seed % 1000, d)
        p = ElitistParams.default(d)
        # replay the block the step will draw
        blk = sample_orthogonal(RngStream(seed), d, count=2)
        x1 = state.mean + state.step_size * state.factor @ blk.directions[0]
        new = one_plus_four_step(state, q, RngStream(seed), p)
        if q(x1) <= q(state.mean):
            assert new.success
            np.testing.assert_array_equal(new.mean, x1)
            assert new.step_size == state.step_size * p.c_sigma
        else:
            assert not new.success
            np.testing.assert_array_equal(new.mean, state.mean)
            assert q(new.mean) == q(state.mean)
            assert new.step_size == state.step_size * p.c_sigma ** -0.25

    def test_factor_update_matches_dense_formula(self):
        d = 4
        rng = np.random.default_rng(1)
        A = rng.standard_normal((d, d))
        q, state = self._one(3, d, A)
        p = ElitistParams.default(d)
        new = one_plus_four_step(state, q, RngStream(8), p)
        blk = sample_orthogonal(RngStream(8), d, count=2)
        u = blk.units
        M = A.T @ q.hessian @ A
        h1, h2 = u[0] @ M @ u[0], u[1] @ M @ u[1]
        g1, g2 = (h2 / h1) ** 0.25, (h1 / h2) ** 0.25
        G = np.eye(d) + (g1 - 1) * np.outer(u[0], u[0]) + (g2 - 1) * np.outer(u[1], u[1])
        np.testing.assert_allclose(new.factor, A @ G, rtol=1e-8, atol=1e-10)

    def test_sphere_keeps_identity(self):
        d = 8
        tr = run("one_plus_four", sphere(d), unit_start(d), RngStream(6), 300, recorder=None, keep_states=True)
        for s in tr.states:
            np.testing.assert_allclose(s.factor, np.eye(d), atol=1e-12)

    def test_one_plus_one_matches_on_sphere(self):
        d = 6
        a = run("one_plus_four", sphere(d), unit_start(d), RngStream(9), 400, recorder=None, keep_states=True)
        b = run("one_plus_one", sphere(d), unit_start(d), RngStream(9), 400, recorder=None, keep_states=True)
        assert len(a.states) == len(b.states)
        for sa, sb in zip(a.states, b.states):
            np.testing.assert_allclose(sa.mean, sb.mean, rtol=1e-12, atol=1e-12 * np.abs(sb.mean).max())
            assert sa.step_size == pytest.approx(sb.step_size, rel=1e-12)

    def test_one_plus_one_failure_shrinks(self):
        d = 3
        p = ElitistParams.default(d)
        state = initial_state(np.ones(d), 1e3)
        new = one_plus_one_step(state, sphere(d), RngStream(0), p)
        assert not new.success
        assert new.step_size == 1e3 * p.c_sigma ** -0.25

    def test_needs_two_dimensions(self):
        with pytest.raises(ShapeMismatch):
            one_plus_four_step(initial_state([1.0], 1.0), sphere(1), RngStream(0), ElitistParams.default(1))

    @pytest.mark.parametrize("strategy", ["one_plus_four", "one_plus_one"])
    def test_elitism(self, strategy):
        d = 5
        q = make_ellipsoid(d, 1e3, rng=RngStream(1), rotated=True)
        for seed in range(5):
            tr = run(strategy, q, unit_start(d, seed), RngStream(seed), 500)
            f = tr.column("f_m")
            assert np.all(np.diff(f) <= 0)


class TestRun:
    def test_budget(self):
        tr = run("one_plus_four", make_ellipsoid(4, 10.0), unit_start(4), RngStream(0), 100)
        assert len(tr) == 100
        assert [r.t for r in tr.records] == list(range(1, 101))

    def test_sphere_convergence(self):
        tr = run("one_plus_four", sphere(10), unit_start(10), RngStream(1), 2000, recorder=None)
        assert tr.final.f_mean < 1e-10

    def test_identical_seeds(self):
        q = make_ellipsoid(5, 1e2, rng=RngStream(0), rotated=True)
        for strategy in ("he_es", "one_plus_four", "one_plus_one"):
            a = run(strategy, q, unit_start(5), RngStream(7), 200)
            b = run(strategy, q, unit_start(5), RngStream(7), 200)
            assert len(a) == len(b)
            for x, y in zip(a.records, b.records):
                assert np.array_equal(np.array(x, dtype=float), np.array(y, dtype=float), equal_nan=True)

    def test_one_plus_one_requires_identity(self):
        with pytest.raises(ValueError):
            run("one_plus_one", sphere(2), initial_state([1.0, 1.0], 1.0, 2 * np.eye(2)), RngStream(0), 5)

    def test_early_stop(self):
        d = 2
        tr = run("one_plus_four", sphere(d), unit_start(d), RngStream(0), 100000, recorder=None)
        assert tr.final.iteration < 100000
        assert tr.final.f_mean < 1e-300

    def test_zero_budget(self):
        with pytest.raises(ValueError):
            run("he_es", sphere(2), unit_start(2), RngStream(0), 0)
