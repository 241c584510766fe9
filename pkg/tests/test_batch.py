import itertools

import numpy as np
import pytest

from elliptrack import (AxisState, DegenerateInformation, FilterConfig,
                        KinematicState, MeasurementSet, OrientationState,
                        predict, rot, shape_matrix, step_batch, step_sequential)
from elliptrack.batch import (batch_update_axis, batch_update_kinematics,
                              batch_update_orientation)
from elliptrack.measurements import (CenteredMeasurements, CenteringMode,
                                     aligned_squares, center_measurements)
from elliptrack.sequential import (axis_moments, orientation_moments,
                                   update_kinematics, update_orientation)

from conftest import assert_symmetric_psd, make_estimate, make_motion


class TestBatchKinematics:
    def test_single_measurement_reduces_to_sequential(self, default_config):
        kin = KinematicState([1, 2, 0.5, 0.1], np.diag([2.0, 2.0, 0.5, 0.5]))
        shape = shape_matrix(0.4, [5, 2])
        z = np.array([3.0, 1.0])
        batch = batch_update_kinematics(kin, MeasurementSet([z]), shape,
                                        default_config)
        seq = update_kinematics(kin, z, shape, default_config)
        np.testing.assert_array_equal(batch.mean, seq.mean)
        np.testing.assert_array_equal(batch.cov, seq.cov)

    def test_uses_measurement_mean(self, default_config):
        kin = KinematicState(np.zeros(4), np.diag([2.0, 2.0, 0.5, 0.5]))
        z = MeasurementSet([[0, 0], [2, 2], [4, 4]])
        out = batch_update_kinematics(kin, z, np.eye(2), default_config)
        expected = update_kinematics(
            KinematicState(np.zeros(4), np.diag([2.0, 2.0, 0.5, 0.5])),
            [2.0, 2.0], np.eye(2) / 3,
            FilterConfig(R=default_config.R / 3, c=default_config.c))
        np.testing.assert_allclose(out.mean, expected.mean, atol=1e-12)

    def test_large_count_approaches_noise_free_gain(self, default_config):
        kin = KinematicState(np.zeros(4), np.diag([2.0, 2.0, 0.5, 0.5]))
        z_bar = np.array([1.5, -0.7])
        points = np.tile(z_bar, (100_000, 1))
        out = batch_update_kinematics(kin, MeasurementSet(points), np.eye(2),
                                      default_config)
        np.testing.assert_allclose(out.mean[:2], z_bar, atol=1e-4)


class TestBatchAxis:
    def _setup(self, psi=None):
        axis = AxisState([2.0, 1.0], np.diag([0.25, 0.25]))
        orient = OrientationState(0.0, 0.05)
        cfg = FilterConfig(R=np.eye(2), c=0.25, psi=psi)
        return axis, orient, cfg

    def test_zero_innovation_keeps_mean(self):
        axis, orient, cfg = self._setup()
        rho = axis_moments(axis, orient, cfg.R, cfg).expected_a
        root = np.sqrt(rho)
        s = np.array([[root[0], root[1]], [-root[0], -root[1]],
                      [root[0], -root[1]]])
        centered = CenteredMeasurements(s, cfg.R, CenteringMode.BATCH)
        out = batch_update_axis(axis, centered, orient, cfg)
        np.testing.assert_allclose(out.mean, axis.mean, atol=1e-12)
        assert np.trace(out.cov) < np.trace(axis.cov)

    def test_cross_covariance_from_prior(self):
        # the per-axis cross terms evaluated at the prediction
        axis, orient, cfg = self._setup()
        mom = axis_moments(axis, orient, cfg.R, cfg)
        np.testing.assert_allclose(np.diag(mom.cross_ap), [0.25, 0.125])

    @pytest.mark.parametrize("count", [2, 3, 5])
    def test_reduced_equals_naive_stacked(self, count):
        # oracle: build the full (2M)x(2M) block-diagonal system and solve
        rng = np.random.default_rng(count)
        axis = AxisState([4.2, 1.7], np.array([[0.3, 0.05], [0.05, 0.2]]))
        orient = OrientationState(0.4, 0.05)
        cfg = FilterConfig(R=np.eye(2) * 0.8, c=0.25)
        s = rng.normal(size=(count, 2)) * 1.5
        centered = CenteredMeasurements(s, cfg.R, CenteringMode.BATCH)
        reduced = batch_update_axis(axis, centered, orient, cfg)

        mom = axis_moments(axis, orient, cfg.R, cfg)
        a_stacked = aligned_squares(s, orient.mean).flatten()
        expected_stacked = np.tile(mom.expected_a, count)
        cov_stacked = np.kron(np.eye(count), mom.cov_aa)
        cross_stacked = np.hstack([mom.cross_ap] * count)
        gain = cross_stacked @ np.linalg.inv(cov_stacked)
        naive_mean = axis.mean + gain @ (a_stacked - expected_stacked)
        naive_cov = axis.cov - gain @ cross_stacked.T
        np.testing.assert_allclose(reduced.mean, naive_mean, atol=1e-10)
        np.testing.assert_allclose(reduced.cov,
                                   0.5 * (naive_cov + naive_cov.T), atol=1e-10)

    def test_psi_clamp_applied(self):
        axis = AxisState([2.0, 1.0], np.diag([4.0, 4.0]))
        orient = OrientationState(0.0, 0.05)
        cfg = FilterConfig(R=np.eye(2), c=0.25, psi=0.1)
        rng = np.random.default_rng(9)
        centered = CenteredMeasurements(rng.normal(size=(4, 2)), cfg.R,
                                        CenteringMode.BATCH)
        out = batch_update_axis(axis, centered, orient, cfg)
        caps = (0.1 * out.mean) ** 2
        assert out.cov[0, 0] <= caps[0] + 1e-12
        assert out.cov[1, 1] <= caps[1] + 1e-12

    def test_without_psi_no_clamp(self):
        axis, orient, cfg = self._setup(psi=None)
        rng = np.random.default_rng(10)
        centered = CenteredMeasurements(rng.normal(size=(4, 2)) * 3, cfg.R,
                                        CenteringMode.BATCH)
        out = batch_update_axis(axis, centered, orient, cfg)
        assert np.all(out.mean > 0)
        assert_symmetric_psd(out.cov)


class TestBatchOrientation:
    def test_zero_innovation_shrinks_variance_only(self):
        # at a zero predicted angle with diagonal noise, two points built
        # from the centered-measurement covariance cancel the innovation
        axis = AxisState([4.0, 1.5], np.zeros((2, 2)))
        orient = OrientationState(0.0, 0.3)
        cfg = FilterConfig(R=np.diag([1.2, 0.8]), c=0.25)
        mom = orientation_moments(axis, orient, cfg.R, cfg)
        c11, c22 = mom.cov_centered[0, 0], mom.cov_centered[1, 1]
        s = np.array([[np.sqrt(2 * c11), 0.0], [0.0, np.sqrt(2 * c22)]])
        centered = CenteredMeasurements(s, cfg.R, CenteringMode.BATCH)
        out = batch_update_orientation(orient, centered, axis, cfg)
        assert out.mean == pytest.approx(0.0, abs=1e-12)
        gamma = mom.cov_bb - orient.var * np.outer(mom.m_vec, mom.m_vec)
        info = mom.m_vec @ np.linalg.solve(gamma, mom.m_vec)
        assert out.var == pytest.approx(1.0 / (1.0 / orient.var + 2 * info),
                                        rel=1e-10)
        assert 0.0 < out.var <= orient.var

    def test_circular_object_gives_no_information(self):
        # equal axes at zero angle zero the sensitivity vector
        axis = AxisState([2.0, 2.0], np.zeros((2, 2)))
        orient = OrientationState(0.2, 0.4)
        cfg = FilterConfig(R=np.eye(2), c=0.25)
        rng = np.random.default_rng(11)
        centered = CenteredMeasurements(rng.normal(size=(5, 2)), cfg.R,
                                        CenteringMode.BATCH)
        mom = orientation_moments(axis, OrientationState(0.0, 0.4), cfg.R, cfg)
        np.testing.assert_allclose(mom.m_vec, np.zeros(3), atol=1e-14)
        out = batch_update_orientation(OrientationState(0.0, 0.4), centered,
                                       axis, cfg)
        assert out.mean == pytest.approx(0.0, abs=1e-12)
        assert out.var == pytest.approx(0.4, rel=1e-12)

    def test_zero_prior_variance_raises(self):
        axis = AxisState([4.0, 1.5], np.zeros((2, 2)))
        cfg = FilterConfig(R=np.eye(2), c=0.25)
        centered = CenteredMeasurements(np.ones((3, 2)), cfg.R,
                                        CenteringMode.BATCH)
        with pytest.raises(DegenerateInformation):
            batch_update_orientation(OrientationState(0.3, 0.0), centered,
                                     axis, cfg)

    def test_variance_always_shrinks(self):
        rng = np.random.default_rng(12)
        cfg = FilterConfig(R=np.eye(2), c=0.25)
        for _ in range(300):
            axis = AxisState(rng.uniform(1.0, 6.0, size=2), np.eye(2) * 0.1)
            orient = OrientationState(rng.uniform(-np.pi, np.pi),
                                      rng.uniform(0.01, 0.5))
            m = rng.integers(2, 10)
            centered = CenteredMeasurements(rng.normal(size=(m, 2)) * 2, cfg.R,
                                            CenteringMode.BATCH)
            out = batch_update_orientation(orient, centered, axis, cfg)
            assert 0.0 < out.var <= orient.var

    def test_two_measurement_consistency_with_sequential(self):
        # the batch information form and two chained sequential updates are
        # different approximations of the same posterior; on typical draws
        # they must agree closely (means 10%, variances 15%)
        rng = np.random.default_rng(42)
        cfg = FilterConfig(R=np.eye(2), c=0.25)
        for _ in range(100):
            theta = rng.uniform(0.5, 1.2)
            axes = np.array([rng.uniform(3.0, 6.0), rng.uniform(1.0, 2.5)])
            axis = AxisState(axes, np.diag([0.3, 0.2]))
            orient = OrientationState(theta, rng.uniform(0.01, 0.1))
            h = np.clip(rng.normal(size=(2, 2)) * 0.5, -1.0, 1.0)
            w = np.clip(rng.multivariate_normal(np.zeros(2), cfg.R, size=2),
                        -2.0, 2.0)
            s = (rot(theta) @ np.diag(axes) @ h.T).T + w
            centered = CenteredMeasurements(s, cfg.R, CenteringMode.BATCH)
            from_batch = batch_update_orientation(orient, centered, axis, cfg)

            b = np.column_stack((s ** 2, s[:, 0] * s[:, 1]))
            first = update_orientation(
                orient, b[0], orientation_moments(axis, orient, cfg.R, cfg))
            chained = update_orientation(
                first, b[1], orientation_moments(axis, first, cfg.R, cfg))
            assert abs(from_batch.mean - chained.mean) <= 0.10 * abs(chained.mean)
            assert abs(from_batch.var - chained.var) <= 0.15 * chained.var


class TestStepBatch:
    def test_single_measurement_delegates_bit_identically(self, default_config):
        est, motion = make_estimate(), make_motion()
        z = MeasurementSet([[4.0, 1.0]])
        batch = step_batch(est, z, motion, default_config)
        seq = step_sequential(est, z, motion, default_config)
        assert np.array_equal(batch.kin.mean, seq.kin.mean)
        assert np.array_equal(batch.kin.cov, seq.kin.cov)
        assert np.array_equal(batch.axis.mean, seq.axis.mean)
        assert np.array_equal(batch.axis.cov, seq.axis.cov)
        assert batch.orient == seq.orient

    def test_empty_set_returns_prediction(self, default_config):
        est, motion = make_estimate(), make_motion()
        out = step_batch(est, MeasurementSet(np.empty((0, 2))), motion,
                         default_config)
        pred = predict(est, motion)
        np.testing.assert_array_equal(out.kin.mean, pred.kin.mean)
        assert out.orient == pred.orient

    def test_updates_read_only_the_prediction(self, default_config):
        # computing the three batch updates standalone, in every order,
        # reproduces the step output exactly
        est, motion = make_estimate(theta=0.2), make_motion()
        rng = np.random.default_rng(13)
        z = MeasurementSet(rng.normal(size=(7, 2)) * 2 + [3, 0])
        step_out = step_batch(est, z, motion, default_config)

        pred = predict(est, motion)
        shape = shape_matrix(pred.orient.mean, pred.axis.mean)
        centered = center_measurements(z, pred.kin, default_config.R)
        updates = {
            "kin": lambda: batch_update_kinematics(pred.kin, z, shape,
                                                   default_config),
            "axis": lambda: batch_update_axis(pred.axis, centered, pred.orient,
                                              default_config),
            "orient": lambda: batch_update_orientation(pred.orient, centered,
                                                       pred.axis,
                                                       default_config),
        }
        for order in itertools.permutations(updates):
            parts = {name: updates[name]() for name in order}
            assert np.array_equal(parts["kin"].mean, step_out.kin.mean)
            assert np.array_equal(parts["kin"].cov, step_out.kin.cov)
            assert np.array_equal(parts["axis"].mean, step_out.axis.mean)
            assert np.array_equal(parts["axis"].cov, step_out.axis.cov)
            assert parts["orient"] == step_out.orient

    def test_covariances_stay_symmetric_psd(self, default_config):
        rng = np.random.default_rng(14)
        est, motion = make_estimate(), make_motion()
        for _ in range(30):
            count = int(rng.integers(0, 15))
            z = MeasurementSet(rng.normal(size=(count, 2)) * 2 + [2, 1])
            est = step_batch(est, z, motion, default_config)
            assert_symmetric_psd(est.kin.cov)
            assert_symmetric_psd(est.axis.cov)
            assert est.orient.var >= 0.0
