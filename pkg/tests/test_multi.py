from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smfusion.distributed import fuse_distributed
from smfusion.ellipsoid import Ellipsoid, SizeObjective
from smfusion.errors import DimensionMismatch, EmptyIntersection, InvalidParameter
from smfusion.multi import WeightBank, intersect_axis_bounds, outer_ellipsoid, run_parallel
from smfusion.remainder import sample_unit_ball
from smfusion.validation import random_fusion_instance, random_spd


class TestWeightBank:
    def test_emphasis_rows(self):
        bank = WeightBank.emphasis(4)
        assert len(bank) == 4 and bank.dim == 4
        assert bank.weights[0] == (19 / 25, 2 / 25, 2 / 25, 2 / 25)
        # later rows are cyclic shifts of the first
        for j, w in enumerate(bank.weights):
            assert w == tuple(np.roll(bank.weights[0], j))

    def test_custom_major(self):
        bank = WeightBank.emphasis(2, Fraction(3, 4))
        assert bank.weights == ((0.75, 0.25), (0.25, 0.75))

    def test_uniform(self):
        assert WeightBank.uniform(4).weights == ((0.25,) * 4,)

    def test_invalid(self):
        with pytest.raises(InvalidParameter):
            WeightBank(())
        with pytest.raises(DimensionMismatch):
            WeightBank(((0.5, 0.5), (1 / 3, 1 / 3, 1 / 3)))
        with pytest.raises(InvalidParameter):
            WeightBank(((0.7, 0.7),))


class TestIntersect:
    def test_single(self):
        e = Ellipsoid([1.0, 2.0], np.diag([4.0, 9.0]))
        box = intersect_axis_bounds([e])
        np.testing.assert_allclose(box.half_widths, [2.0, 3.0])
        np.testing.assert_allclose(box.centers, e.center)

    def test_concentric(self):
        box = intersect_axis_bounds([Ellipsoid(np.zeros(2), np.diag([4.0, 9.0])), Ellipsoid(np.zeros(2), np.diag([9.0, 4.0]))])
        np.testing.assert_allclose(box.half_widths, [2.0, 2.0])

    def test_shifted_intervals(self):
        box = intersect_axis_bounds([Ellipsoid([0.0], [[4.0]]), Ellipsoid([1.0], [[4.0]])])
        np.testing.assert_allclose([box.lo[0], box.hi[0]], [-1.0, 2.0])
        np.testing.assert_allclose(box.half_widths, [1.5])
        assert box.contains(np.array([0.5])) and not box.contains(np.array([2.5]))

    def test_empty(self):
        with pytest.raises(EmptyIntersection):
            intersect_axis_bounds([Ellipsoid([0.0], [[1.0]]), Ellipsoid([3.0], [[1.0]])])

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatch):
            intersect_axis_bounds([Ellipsoid([0.0], [[1.0]]), Ellipsoid(np.zeros(2), np.eye(2))])
        with pytest.raises(InvalidParameter):
            intersect_axis_bounds([])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_never_wider_than_members(self, seed, count):
        rng = np.random.default_rng(seed)
        common = rng.standard_normal(3)
        members = []
        for _ in range(count):
            shape = random_spd(rng, 3)
            members.append(Ellipsoid(common - 0.5 * np.linalg.cholesky(shape) @ sample_unit_ball(rng, 1, 3)[0], shape))
        box = intersect_axis_bounds(members)
        widths = np.array([e.axis_bounds() for e in members])
        assert np.all(box.half_widths <= widths.min(axis=0) + 1e-12)
        assert box.contains(common)


class TestRunParallel:
    def test_one_state_per_pipeline(self):
        bank = WeightBank.emphasis(2)
        states = [Ellipsoid([0.0, 0.0], np.diag([4.0, 1.0]))] * 2
        local = Ellipsoid([0.5, 0.2], np.diag([1.0, 4.0]))

        def step(obj, state, loc):
            return fuse_distributed(state, [loc], obj).ellipsoid

        out = run_parallel(step, bank, states, local)
        assert len(out) == 2
        for obj, e in zip(bank.objectives(), out):
            np.testing.assert_array_equal(e.shape, step(obj, states[0], local).shape)
        # each emphasis vector tightens its own axis the most
        assert out[0].shape[0, 0] <= out[1].shape[0, 0]
        assert out[1].shape[1, 1] <= out[0].shape[1, 1]

    def test_uniform_bank_matches_plain(self):
        pred, locals_ = random_fusion_instance(np.random.default_rng(1), 2, 2)
        plain = fuse_distributed(pred, locals_, SizeObjective.uniform(2)).ellipsoid
        (out,) = run_parallel(lambda obj, s: fuse_distributed(s, locals_, obj).ellipsoid, WeightBank.uniform(2), [pred])
        np.testing.assert_array_equal(out.shape, plain.shape)

    def test_identical_weights(self):
        bank = WeightBank(((0.5, 0.5), (0.5, 0.5)))
        pred, locals_ = random_fusion_instance(np.random.default_rng(2), 2, 1)
        a, b = run_parallel(lambda obj, s: fuse_distributed(s, locals_, obj).ellipsoid, bank, [pred, pred])
        np.testing.assert_array_equal(a.shape, b.shape)
        np.testing.assert_array_equal(a.center, b.center)

    def test_state_count_checked(self):
        with pytest.raises(DimensionMismatch):
            run_parallel(lambda obj, s: s, WeightBank.emphasis(2), [None])


class TestOuterEllipsoid:
    def test_single_member(self):
        e = Ellipsoid([1.0], [[2.0]])
        assert outer_ellipsoid([e], SizeObjective.trace()) is e

    def test_covers_intersection(self):
        members = [Ellipsoid([0.0, 0.0], np.diag([4.0, 1.0])), Ellipsoid([0.3, 0.1], np.diag([1.0, 4.0]))]
        outer = outer_ellipsoid(members, SizeObjective.trace())
        rng = np.random.default_rng(0)
        xs = 2.0 * sample_unit_ball(rng, 50_000, 2)
        inside = np.all([m.quadratic_form(xs) <= 1.0 for m in members], axis=0)
        assert np.all(outer.quadratic_form(xs[inside]) <= 1.0 + 1e-9)
