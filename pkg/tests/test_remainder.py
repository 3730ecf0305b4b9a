import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smfusion.errors import EvaluationFailure, InvalidSampleCount
from smfusion.model import tracking_model
from smfusion.remainder import ball_probe_points, bound_remainder, remainders, sample_unit_ball


def square(x):
    return np.asarray(x) ** 2


class TestBoundRemainder:
    def test_scalar_square(self):
        # r(u) = u^2 on [-1, 1]: range [0, 1], origin and +-1 always probed
        rb = bound_remainder(square, np.zeros(1), np.eye(1), np.zeros((1, 1)), samples=200, inflate=1.0)
        np.testing.assert_allclose(rb.e, [0.5])
        np.testing.assert_allclose(rb.P, [[0.25]])
        np.testing.assert_allclose(rb.B @ rb.B.T, rb.P)

    def test_inflation(self):
        rb = bound_remainder(square, np.zeros(1), np.eye(1), np.zeros((1, 1)), samples=200, inflate=1.05)
        np.testing.assert_allclose(rb.P, [[(0.5 * 1.05) ** 2]])

    def test_box_corners_inside(self):
        rb = bound_remainder(lambda x: np.asarray(x) ** 2, np.zeros(3), np.eye(3), np.zeros((3, 3)), inflate=1.0)
        hw = np.diag(rb.B) / np.sqrt(3)
        corner = rb.e + hw
        assert (corner - rb.e) @ np.linalg.solve(rb.P, corner - rb.e) == pytest.approx(1.0)

    def test_too_few_samples(self):
        with pytest.raises(InvalidSampleCount):
            bound_remainder(square, np.zeros(1), np.eye(1), np.zeros((1, 1)), samples=99)

    def test_non_finite(self):
        with pytest.raises(EvaluationFailure):
            bound_remainder(lambda x: np.where(np.asarray(x) > 0.5, np.nan, x), np.zeros(1), np.eye(1), np.zeros((1, 1)))

    def test_linear_map_is_degenerate(self):
        a = np.array([[2.0, 1.0], [0.5, -1.0]])
        rb = bound_remainder(lambda x: np.asarray(x) @ a.T, np.ones(2), np.eye(2) * 3.0, a)
        assert rb.degenerate
        assert np.all(np.diag(rb.P) > 0.0)
        assert np.max(np.abs(rb.e)) < 1e-9

    def test_nonlinear_not_degenerate(self):
        rb = bound_remainder(square, np.zeros(1), np.eye(1), np.zeros((1, 1)))
        assert not rb.degenerate

    def test_deterministic(self):
        m = tracking_model(1.0, 1.0, [(525.0, 525.0)])
        x = np.array([120.0, 120.0, 6.0, 6.0])
        e = np.diag([10.0, 10.0, 5.0, 5.0])
        a = bound_remainder(m.h[0], x, e, m.jacobian_h(0, x), seed=7, angular=m.angular)
        b = bound_remainder(m.h[0], x, e, m.jacobian_h(0, x), seed=7, angular=m.angular)
        np.testing.assert_array_equal(a.e, b.e)
        np.testing.assert_array_equal(a.P, b.P)

    def test_quadratic_shrinkage(self):
        m = tracking_model(1.0, 1.0, [(525.0, 525.0)])
        x = np.array([120.0, 120.0, 6.0, 6.0])
        e = np.diag([10.0, 10.0, 5.0, 5.0])
        big = bound_remainder(m.h[0], x, e, m.jacobian_h(0, x), seed=3, angular=m.angular)
        small = bound_remainder(m.h[0], x, e / 2, m.jacobian_h(0, x), seed=3, angular=m.angular)
        ratio = np.sqrt(np.diag(big.P)) / np.sqrt(np.diag(small.P))
        assert np.all(ratio > 4.0 / 1.5) and np.all(ratio < 4.0 * 1.5)

    def test_fresh_draw_containment(self):
        m = tracking_model(1.0, 1.0, [(525.0, 525.0)])
        x = np.array([120.0, 120.0, 6.0, 6.0])
        e = np.linalg.cholesky(np.diag([100.0, 100.0, 30.0, 30.0]))
        jac = m.jacobian_h(0, x)
        rb = bound_remainder(m.h[0], x, e, jac, samples=500, seed=11, angular=m.angular)
        u = sample_unit_ball(np.random.default_rng(99), 5000, 4)
        r = remainders(m.h[0], x, e, jac, u, m.angular)
        d = r - rb.e
        q = np.einsum("ij,ij->i", d @ np.linalg.inv(rb.P), d)
        assert np.mean(q <= 1.0 + 1e-9) >= 0.999

    def test_samples_inside(self):
        m = tracking_model(1.0, 1.0, [(525.0, 525.0)])
        x = np.array([200.0, 50.0, 6.0, 6.0])
        e = np.diag([20.0, 20.0, 5.0, 5.0])
        jac = m.jacobian_h(0, x)
        rb = bound_remainder(m.h[0], x, e, jac, seed=5, angular=m.angular)
        u = ball_probe_points(np.random.default_rng(5), 500, 4)
        r = remainders(m.h[0], x, e, jac, u, m.angular)
        d = r - rb.e
        q = np.einsum("ij,ij->i", d @ np.linalg.inv(rb.P), d)
        assert np.all(q <= 1.0 + 1e-9)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 1000), st.floats(0.5, 20.0))
    def test_monotone_in_factor(self, seed, scale):
        m = tracking_model(1.0, 1.0, [(525.0, 525.0)])
        x = np.array([120.0, 120.0, 6.0, 6.0])
        e = scale * np.eye(4)
        jac = m.jacobian_h(0, x)
        a = bound_remainder(m.h[0], x, e, jac, seed=seed, angular=m.angular)
        b = bound_remainder(m.h[0], x, 2 * e, jac, seed=seed, angular=m.angular)
        assert np.all(np.diag(b.P) >= np.diag(a.P))


def test_ball_samples_inside_unit_ball():
    u = sample_unit_ball(np.random.default_rng(0), 10_000, 3)
    assert np.all(np.linalg.norm(u, axis=1) <= 1.0)
    # uniform radius law: P(|u| <= 1/2) = 1/8 in three dimensions
    assert np.mean(np.linalg.norm(u, axis=1) <= 0.5) == pytest.approx(0.125, abs=0.01)


def test_probe_points_include_axes_and_origin():
    u = ball_probe_points(np.random.default_rng(0), 100, 2)
    assert u.shape == (105, 2)
    np.testing.assert_array_equal(u[-5:], [[1, 0], [0, 1], [-1, 0], [0, -1], [0, 0]])
