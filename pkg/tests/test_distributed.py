import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smfusion.distributed import (
    build_upsilon,
    distributed_containment_matrix,
    fuse_distributed,
    fused_ellipsoid,
    fusion_problem,
)
from smfusion.ellipsoid import Ellipsoid, SizeObjective, min_eigenvalue
from smfusion.errors import DimensionMismatch, InfeasibleUpdate, InvalidParameter
from smfusion.remainder import sample_unit_ball
from smfusion.tau import TauAssignment, grid_oracle
from smfusion.validation import random_fusion_instance, random_spd

TRACE = SizeObjective.trace()


def scalar(c: float, p: float) -> Ellipsoid:
    return Ellipsoid([c], [[p]])


class TestUpsilon:
    def test_identical_local(self):
        pred = Ellipsoid([1.0, -1.0], np.array([[2.0, 0.5], [0.5, 1.0]]))
        y11, y12, y22 = build_upsilon(pred, [pred], TauAssignment(0.5, (0.5,)))
        assert y11 == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(y12, 0.0, atol=1e-14)
        np.testing.assert_allclose(y22, np.eye(2), atol=1e-12)

    def test_no_local_weight(self):
        pred = Ellipsoid([0.0, 0.0], np.diag([3.0, 2.0]))
        local = Ellipsoid([1.0, 1.0], np.eye(2))
        _, _, y22 = build_upsilon(pred, [local], TauAssignment(0.7, (0.0,)))
        np.testing.assert_allclose(y22, 0.7 * np.eye(2))

    def test_scalar_arithmetic(self):
        y11, y12, y22 = build_upsilon(scalar(0.0, 1.0), [scalar(1.0, 4.0)], TauAssignment(0.25, (0.25,)))
        assert y11 == pytest.approx(9.0 / 16.0)
        # d = -1, P_i^{-1} = 1/4, E = 1
        np.testing.assert_allclose(y12, [-1.0 / 16.0])
        np.testing.assert_allclose(y22, [[0.25 + 0.25 / 4.0]])

    def test_dimension_checks(self):
        with pytest.raises(DimensionMismatch):
            build_upsilon(scalar(0.0, 1.0), [scalar(0.0, 1.0)], TauAssignment(0.5))
        with pytest.raises(DimensionMismatch):
            build_upsilon(scalar(0.0, 1.0), [Ellipsoid(np.zeros(2), np.eye(2))], TauAssignment(0.5, (0.5,)))
        with pytest.raises(InvalidParameter):
            fuse_distributed(scalar(0.0, 1.0), [], TRACE)


class TestFuse:
    def test_identical_inputs_fixed_point(self):
        pred = Ellipsoid([3.0, -2.0, 1.0], random_spd(np.random.default_rng(0), 3))
        res = fuse_distributed(pred, [pred, pred], TRACE)
        np.testing.assert_allclose(res.ellipsoid.shape, pred.shape, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(res.ellipsoid.center, pred.center, rtol=1e-12)
        assert res.tau.total() == pytest.approx(1.0, abs=1e-9)

    def test_center_between(self):
        # equal shapes, overlapping: the fused center lies on the segment
        res = fuse_distributed(scalar(0.0, 1.0), [scalar(1.0, 1.0)], TRACE)
        assert 0.0 <= res.ellipsoid.center[0] <= 1.0

    def test_center_between_planar(self):
        pred = Ellipsoid([0.0, 0.0], np.diag([4.0, 1.0]))
        local = Ellipsoid([1.0, 0.5], np.diag([4.0, 1.0]))
        c = fuse_distributed(pred, [local], TRACE).ellipsoid.center
        s = c[0] / 1.0
        assert 0.0 <= s <= 1.0
        np.testing.assert_allclose(c, s * local.center, atol=1e-9)

    def test_no_local_weight_returns_prediction(self):
        pred = Ellipsoid([0.0, 1.0], np.diag([2.0, 3.0]))
        fused = fused_ellipsoid(pred, [Ellipsoid([5.0, 5.0], np.eye(2))], TauAssignment(1.0, (0.0,)))
        np.testing.assert_allclose(fused.shape, pred.shape)
        np.testing.assert_allclose(fused.center, pred.center)

    def test_disjoint_inputs(self):
        with pytest.raises(InfeasibleUpdate):
            fuse_distributed(scalar(0.0, 1.0), [scalar(5.0, 1.0)], TRACE)

    def test_matches_grid_oracle(self):
        rng = np.random.default_rng(7)
        for k in range(6):
            pred, locals_ = random_fusion_instance(rng, 1 + k % 2, 1 + (k // 2) % 2)
            res = fuse_distributed(pred, locals_, TRACE)
            oracle = grid_oracle(fusion_problem(pred, locals_, TRACE, fast=False), 60, refine=5).value
            assert abs(TRACE(res.ellipsoid.shape) - oracle) <= 1e-3 * oracle

    def test_information_structure(self):
        pred, locals_ = random_fusion_instance(np.random.default_rng(3), 3, 2)
        res = fuse_distributed(pred, locals_, TRACE)
        gain = res.ellipsoid.inverse - res.tau.tau_u * pred.inverse
        assert min_eigenvalue(gain) >= -1e-8 * np.abs(res.ellipsoid.inverse).max()

    def test_certificate(self):
        pred, locals_ = random_fusion_instance(np.random.default_rng(4), 2, 2)
        res = fuse_distributed(pred, locals_, TRACE)
        cert = distributed_containment_matrix(pred, locals_, res.ellipsoid, res.tau)
        assert min_eigenvalue(cert) >= -1e-8
        small = Ellipsoid(res.ellipsoid.center, 0.5 * res.ellipsoid.shape)
        assert min_eigenvalue(distributed_containment_matrix(pred, locals_, small, res.tau)) < 0.0

    def test_monte_carlo_containment(self):
        pred, locals_ = random_fusion_instance(np.random.default_rng(5), 2, 2)
        res = fuse_distributed(pred, locals_, TRACE)
        rng = np.random.default_rng(6)
        xs = pred.center + sample_unit_ball(rng, 200_000, 2) @ pred.factor.T
        keep = np.all([loc.quadratic_form(xs) <= 1.0 for loc in locals_], axis=0)
        assert keep.sum() >= 1000
        assert np.all(res.ellipsoid.quadratic_form(xs[keep]) <= 1.0 + 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    pred, locals_ = random_fusion_instance(np.random.default_rng(seed), 2, 3)
    a = fuse_distributed(pred, locals_, TRACE)
    b = fuse_distributed(pred, locals_[::-1], TRACE)
    np.testing.assert_array_equal(a.ellipsoid.shape, b.ellipsoid.shape)
    np.testing.assert_array_equal(a.ellipsoid.center, b.ellipsoid.center)
    np.testing.assert_array_equal(a.tau.as_array()[1:], b.tau.as_array()[1:][::-1])
