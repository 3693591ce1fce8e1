"""
Unit tests for the twist Kalman filter driven by optical flow.
"""
import unittest

import numpy as np

from flow_pose_tracker.core.velocity_filter import (
    TwistBelief, TwistFilter, TwistFilterConfig, build_flow_measurement, predict, step, update,
)
from flow_pose_tracker.errors import ConfigError, DimensionMismatchError, NoMeasurementError
from flow_pose_tracker.geometry.camera import CameraIntrinsics, flow_jacobian
from flow_pose_tracker.geometry.types import DepthMap, FlowField, Mask, Twist


def random_spd(rng: np.random.Generator, size: int, scale: float) -> np.ndarray:
    factor = rng.normal(size=(size, size))
    return scale * (factor @ factor.T / size + 0.5 * np.eye(size))


class TestInformationUpdate(unittest.TestCase):
    """Test cases for the information-form correction."""

    def setUp(self):
        """Set up intrinsics and a config."""
        self.intr = CameraIntrinsics(500.0, 500.0, 160.0, 120.0, 320, 240)
        self.cfg = TwistFilterConfig(sigma_flow=0.7)

    def test_matches_covariance_form(self):
        """Test the posterior against the textbook gain over random problems."""
        rng = np.random.default_rng(3)
        for case in range(100):
            n = int(rng.integers(1, 51))
            u = rng.uniform(0, 319, n)
            v = rng.uniform(0, 239, n)
            depth = rng.uniform(0.4, 2.0, n)
            jacobian = flow_jacobian(u, v, depth, self.intr, self.cfg.dt).reshape(-1, 6)
            y = rng.normal(0.0, 3.0, 2 * n)
            prior = TwistBelief(Twist.from_vector(rng.normal(size=6)), random_spd(rng, 6, 0.5))

            posterior = update(prior, y, jacobian, self.cfg)

            noise = self.cfg.sigma_flow ** 2 * np.eye(2 * n)
            innovation_cov = jacobian @ prior.covariance @ jacobian.T + noise
            gain = prior.covariance @ jacobian.T @ np.linalg.inv(innovation_cov)
            mean = prior.mean.as_vector() + gain @ (y - jacobian @ prior.mean.as_vector())
            covariance = (np.eye(6) - gain @ jacobian) @ prior.covariance
            scale = max(1.0, float(np.abs(mean).max()))
            np.testing.assert_allclose(posterior.mean.as_vector(), mean, atol=1e-9 * scale, err_msg=f"case {case}")
            np.testing.assert_allclose(posterior.covariance, covariance, atol=1e-9, err_msg=f"case {case}")

    def test_covariance_stays_symmetric(self):
        """Test that the posterior covariance is symmetric positive-definite."""
        rng = np.random.default_rng(5)
        jacobian = flow_jacobian(rng.uniform(0, 319, 30), rng.uniform(0, 239, 30), np.full(30, 1.0),
                                 self.intr, self.cfg.dt).reshape(-1, 6)
        posterior = update(TwistBelief.initial(self.cfg), rng.normal(size=60), jacobian, self.cfg)
        np.testing.assert_array_equal(posterior.covariance, posterior.covariance.T)
        self.assertTrue(np.all(np.linalg.eigvalsh(posterior.covariance) > 0.0))

    def test_shape_mismatch(self):
        """Test that y and J must agree."""
        with self.assertRaises(ValueError):
            update(TwistBelief.initial(self.cfg), np.zeros(4), np.zeros((6, 6)), self.cfg)

    def test_predict_adds_process_noise(self):
        """Test the random-walk prediction."""
        belief = TwistBelief(Twist.from_vector(np.arange(6.0)), np.eye(6))
        predicted = predict(belief, self.cfg)
        np.testing.assert_array_equal(predicted.mean.as_vector(), np.arange(6.0))
        np.testing.assert_allclose(predicted.covariance, np.eye(6) + self.cfg.process_noise)


class TestFlowMeasurement(unittest.TestCase):
    """Test cases for building the stacked flow measurement."""

    def setUp(self):
        """Set up a plane at 1 m and a square mask."""
        self.intr = CameraIntrinsics(400.0, 400.0, 80.0, 60.0, 160, 120)
        self.cfg = TwistFilterConfig(max_pixels=100)
        self.depth = DepthMap(np.ones((120, 160)))
        bitmap = np.zeros((120, 160), dtype=bool)
        bitmap[40:80, 60:100] = True
        self.mask = Mask(bitmap)

    def test_thinning(self):
        """Test that large masks are thinned to at most max_pixels."""
        y, jacobian = build_flow_measurement(FlowField.zeros(160, 120), self.mask, self.depth, self.intr, self.cfg)
        self.assertLessEqual(len(y) // 2, self.cfg.max_pixels)
        self.assertEqual(jacobian.shape, (len(y), 6))

    def test_invalid_depth_is_skipped(self):
        """Test that pixels without depth are not used."""
        data = np.zeros((120, 160))
        data[40, 60] = 1.0
        y, _ = build_flow_measurement(FlowField.zeros(160, 120), self.mask, DepthMap(data), self.intr, self.cfg)
        self.assertEqual(len(y), 2)

    def test_no_valid_pixel(self):
        """Test NoMeasurementError when no pixel has depth."""
        with self.assertRaises(NoMeasurementError):
            build_flow_measurement(FlowField.zeros(160, 120), self.mask, DepthMap.invalid(160, 120),
                                   self.intr, self.cfg)

    def test_size_mismatch(self):
        """Test that inputs must match the intrinsics."""
        with self.assertRaises(DimensionMismatchError):
            build_flow_measurement(FlowField.zeros(100, 120), self.mask, self.depth, self.intr, self.cfg)


class TestTwistFilter(unittest.TestCase):
    """Test cases for the stateful filter."""

    def setUp(self):
        """Set up a plane with a mask and the exact flow of a known twist."""
        self.intr = CameraIntrinsics(400.0, 400.0, 80.0, 60.0, 160, 120)
        self.cfg = TwistFilterConfig(sigma_flow=0.1)
        self.twist = Twist([0.05, -0.02, 0.1], [0.2, -0.1, 0.3])
        self.depth = DepthMap(np.full((120, 160), 0.8))
        bitmap = np.zeros((120, 160), dtype=bool)
        bitmap[30:90, 40:120] = True
        self.mask = Mask(bitmap)
        coords = self.mask.coords()
        jacobians = flow_jacobian(coords[:, 0], coords[:, 1], np.full(len(coords), 0.8), self.intr, self.cfg.dt)
        data = np.zeros((120, 160, 2))
        data[coords[:, 1], coords[:, 0]] = jacobians @ self.twist.as_vector()
        self.flow = FlowField(data)

    def test_recovers_twist(self):
        """Test that repeated exact flow drives the estimate to the true twist."""
        twist_filter = TwistFilter(self.intr, self.cfg)
        for _ in range(10):
            estimate = twist_filter.step(self.flow, self.mask, self.depth)
        np.testing.assert_allclose(estimate.v_o, self.twist.v_o, atol=1e-3)
        np.testing.assert_allclose(estimate.omega, self.twist.omega, atol=1e-2)

    def test_prediction_only_without_mask(self):
        """Test that a missing or empty mask skips the correction."""
        belief = TwistBelief.initial(self.cfg)
        posterior, measurement = step(belief, self.flow, None, self.depth, self.intr, self.cfg)
        np.testing.assert_array_equal(measurement.as_vector(), np.zeros(6))
        np.testing.assert_allclose(posterior.covariance, belief.covariance + self.cfg.process_noise)
        posterior, _ = step(belief, self.flow, Mask.empty(160, 120), self.depth, self.intr, self.cfg)
        np.testing.assert_allclose(posterior.covariance, belief.covariance + self.cfg.process_noise)

    def test_prediction_only_without_depth(self):
        """Test that a mask with no valid depth skips the correction."""
        belief = TwistBelief.initial(self.cfg)
        posterior, _ = step(belief, self.flow, self.mask, DepthMap.invalid(160, 120), self.intr, self.cfg)
        np.testing.assert_allclose(posterior.covariance, belief.covariance + self.cfg.process_noise)


class TestTwistFilterConfig(unittest.TestCase):
    """Test cases for config validation."""

    def test_rejects_bad_values(self):
        """Test ConfigError on invalid settings."""
        with self.assertRaises(ConfigError):
            TwistFilterConfig(sigma_flow=0.0)
        with self.assertRaises(ConfigError):
            TwistFilterConfig(max_pixels=10)
        with self.assertRaises(ConfigError):
            TwistFilterConfig(q_v=-np.eye(3))


if __name__ == "__main__":
    unittest.main()
