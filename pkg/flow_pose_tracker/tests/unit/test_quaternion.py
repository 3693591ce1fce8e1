"""
Unit tests for the quaternion primitives.

Products, exponentials and matrices are checked against scipy's Rotation,
which stores quaternions scalar-last.
"""
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from flow_pose_tracker.errors import DomainError
from flow_pose_tracker.geometry.quaternion import (
    UnitQuaternion, geodesic_angle, geodesic_angles, quat_conjugate, quat_exp, quat_log, quat_multiply,
    quat_to_matrix, quat_transition,
)


def to_scipy(q: np.ndarray) -> Rotation:
    return Rotation.from_quat(np.roll(q, -1, axis=-1))


def from_scipy(rotation: Rotation) -> np.ndarray:
    return np.roll(rotation.as_quat(), 1, axis=-1)


def same_rotation(q1: np.ndarray, q2: np.ndarray) -> bool:
    return bool(np.allclose(q1, q2, atol=1e-12) or np.allclose(q1, -q2, atol=1e-12))


class TestQuaternionArrays(unittest.TestCase):
    """Test cases for the stacked quaternion helpers."""

    def setUp(self):
        """Set up random rotations."""
        self.rng = np.random.default_rng(7)
        self.rotations = Rotation.random(50, random_state=7)
        self.quats = from_scipy(self.rotations)

    def test_multiply_matches_composition(self):
        """Test that the Hamilton product composes like rotation matrices."""
        other = Rotation.random(50, random_state=8)
        product = quat_multiply(self.quats, from_scipy(other))
        expected = from_scipy(self.rotations * other)
        for q, e in zip(product, expected):
            self.assertTrue(same_rotation(q, e))

    def test_multiply_identity(self):
        """Test that the identity is neutral on both sides."""
        identity = np.array([1.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(quat_multiply(identity, self.quats), self.quats)
        np.testing.assert_allclose(quat_multiply(self.quats, identity), self.quats)

    def test_conjugate_inverts(self):
        """Test that q ⊗ q* is the identity."""
        product = quat_multiply(self.quats, quat_conjugate(self.quats))
        np.testing.assert_allclose(np.abs(product[:, 0]), 1.0, atol=1e-12)
        np.testing.assert_allclose(product[:, 1:], 0.0, atol=1e-12)

    def test_to_matrix_matches_scipy(self):
        """Test the rotation matrix of each quaternion."""
        np.testing.assert_allclose(quat_to_matrix(self.quats), self.rotations.as_matrix(), atol=1e-12)

    def test_exp_matches_scipy(self):
        """Test the exponential map against Rotation.from_rotvec."""
        rotvecs = self.rng.normal(size=(50, 3))
        rotvecs *= (np.pi * self.rng.random((50, 1))) / np.linalg.norm(rotvecs, axis=1, keepdims=True)
        for q, e in zip(quat_exp(rotvecs), from_scipy(Rotation.from_rotvec(rotvecs))):
            self.assertTrue(same_rotation(q, e))

    def test_exp_log_round_trip(self):
        """Test that log inverts exp inside the ball of radius π."""
        rotvecs = self.rotations.as_rotvec()
        np.testing.assert_allclose(quat_log(quat_exp(rotvecs)), rotvecs, atol=1e-10)

    def test_log_is_sign_invariant(self):
        """Test that q and -q map to the same rotation vector."""
        np.testing.assert_allclose(quat_log(self.quats), quat_log(-self.quats), atol=1e-12)

    def test_small_angles(self):
        """Test the series branch near the identity."""
        rotvec = np.array([1e-10, -2e-10, 3e-10])
        q = quat_exp(rotvec)
        self.assertAlmostEqual(float(np.linalg.norm(q)), 1.0, places=14)
        np.testing.assert_allclose(quat_log(q), rotvec, rtol=1e-9, atol=1e-20)
        np.testing.assert_allclose(quat_exp(np.zeros(3)), [1.0, 0.0, 0.0, 0.0])

    def test_transition_rotates_about_omega(self):
        """Test that A_q(ω) applies exp(ω dt) on the left."""
        omega = np.array([0.3, -1.2, 2.0])
        dt = 1.0 / 30.0
        q = self.quats[0]
        moved = quat_transition(omega, dt) @ q
        expected = from_scipy(Rotation.from_rotvec(omega * dt) * to_scipy(q))
        self.assertTrue(same_rotation(moved, expected))
        self.assertAlmostEqual(float(np.linalg.norm(moved)), 1.0, places=12)

    def test_transition_large_rate_stays_unit(self):
        """Test that fast spins keep the quaternion normalized."""
        moved = quat_transition(np.array([0.0, 0.0, 40.0]), 0.1) @ self.quats[3]
        self.assertAlmostEqual(float(np.linalg.norm(moved)), 1.0, places=12)

    def test_transition_stacked(self):
        """Test the stacked form used for sigma points."""
        omegas = self.rng.normal(size=(5, 3))
        matrices = quat_transition(omegas, 0.05)
        self.assertEqual(matrices.shape, (5, 4, 4))
        np.testing.assert_allclose(matrices[2], quat_transition(omegas[2], 0.05))

    def test_transition_rejects_bad_time_step(self):
        """Test that a non-positive dt raises DomainError."""
        with self.assertRaises(DomainError):
            quat_transition(np.zeros(3), 0.0)
        with self.assertRaises(DomainError):
            quat_transition(np.zeros(3), -0.1)


class TestUnitQuaternion(unittest.TestCase):
    """Test cases for the UnitQuaternion value type."""

    def test_normalizes_on_construction(self):
        """Test that components are scaled to unit norm."""
        q = UnitQuaternion(2.0, 0.0, 0.0, 0.0)
        np.testing.assert_allclose(q.as_array(), [1.0, 0.0, 0.0, 0.0])

    def test_zero_norm_rejected(self):
        """Test that the zero quaternion is refused."""
        with self.assertRaises(ValueError):
            UnitQuaternion(0.0, 0.0, 0.0, 0.0)

    def test_axis_angle(self):
        """Test a quarter turn about z."""
        q = UnitQuaternion.from_axis_angle([0.0, 0.0, 2.0], np.pi / 2)
        np.testing.assert_allclose(q.rotate([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)

    def test_inverse_and_product(self):
        """Test that q * q⁻¹ is the identity rotation."""
        q = UnitQuaternion.from_rotvec([0.4, -0.1, 0.9])
        np.testing.assert_allclose((q * q.inverse()).as_matrix(), np.eye(3), atol=1e-12)

    def test_geodesic_angle(self):
        """Test the angle metric and its sign invariance."""
        a = UnitQuaternion.from_rotvec([0.1, 0.2, 0.3])
        b = UnitQuaternion.from_rotvec([0.1, 0.2, 0.3]) * UnitQuaternion.from_axis_angle([1, 0, 0], 0.25)
        self.assertAlmostEqual(geodesic_angle(a, b), 0.25, places=12)
        self.assertAlmostEqual(geodesic_angle(a, -b), 0.25, places=12)
        self.assertAlmostEqual(geodesic_angle(b, a), 0.25, places=12)
        self.assertAlmostEqual(geodesic_angle(a, a), 0.0, places=7)

    def test_geodesic_angles_vectorized(self):
        """Test the stacked angle helper."""
        q1 = from_scipy(Rotation.random(10, random_state=1))
        q2 = from_scipy(Rotation.random(10, random_state=2))
        expected = (to_scipy(q1).inv() * to_scipy(q2)).magnitude()
        np.testing.assert_allclose(geodesic_angles(q1, q2), expected, atol=1e-9)


if __name__ == "__main__":
    unittest.main()
