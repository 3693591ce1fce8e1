"""
Unit tests for trajectories, corruption schedules and the scene generator.
"""
import math
import unittest

import numpy as np

from flow_pose_tracker.errors import ConfigError
from flow_pose_tracker.geometry.quaternion import UnitQuaternion, geodesic_angle
from flow_pose_tracker.geometry.types import DepthMap, Pose, Twist
from flow_pose_tracker.rendering.mesh import box_mesh
from flow_pose_tracker.simulation.scene import (
    default_intrinsics, default_trajectory, generate, ground_truth_flow_check,
)
from flow_pose_tracker.simulation.trajectory import (
    CorruptionSpec, Keyframe, KeyframeTrajectory, TrajectorySegment, TrajectorySpec, screw_motion,
    trajectory_from_dict,
)


class TestTrajectory(unittest.TestCase):
    """Test cases for TrajectorySpec."""

    def setUp(self):
        """Set up a two-segment trajectory."""
        self.initial = Pose([0.05, 0.0, 0.8], UnitQuaternion.from_rotvec([0.2, 0.0, 0.1]))
        self.first = Twist([0.1, 0.0, 0.0], [0.0, 0.0, 1.0])
        self.second = Twist([0.0, 0.05, -0.1], [0.5, 0.0, 0.0])
        self.spec = TrajectorySpec(self.initial, [TrajectorySegment(1.0, self.first),
                                                  TrajectorySegment(1.0, self.second)])

    def test_pure_translation(self):
        """Test that a twist without rotation translates linearly."""
        motion = screw_motion(Twist([0.1, -0.2, 0.3], [0.0, 0.0, 0.0]), 2.0)
        np.testing.assert_allclose(motion.t, [0.2, -0.4, 0.6])
        np.testing.assert_allclose(motion.rotation, np.eye(3))

    def test_velocity_matches_twist(self):
        """Test that the sampled motion has the point velocity of the held twist."""
        h = 1e-6
        for time, twist in ((0.4, self.first), (1.5, self.second)):
            pose = self.spec.pose_at(time)
            velocity = (self.spec.pose_at(time + h).t - self.spec.pose_at(time - h).t) / (2 * h)
            np.testing.assert_allclose(velocity, twist.point_velocity(pose.t), atol=1e-6)
            turned = UnitQuaternion.from_rotvec(twist.omega * h) * pose.q
            self.assertLess(geodesic_angle(self.spec.pose_at(time + h).q, turned), 1e-10)

    def test_segments(self):
        """Test segment lookup and continuity at the boundary."""
        self.assertIs(self.spec.twist_at(0.5), self.first)
        self.assertIs(self.spec.twist_at(1.0), self.second)
        self.assertIs(self.spec.twist_at(10.0), self.second)
        before, after = self.spec.pose_at(1.0 - 1e-9), self.spec.pose_at(1.0 + 1e-9)
        np.testing.assert_allclose(before.t, after.t, atol=1e-8)
        np.testing.assert_allclose(self.spec.pose_at(0.0).as_array(), self.initial.as_array())
        with self.assertRaises(ValueError):
            self.spec.pose_at(-1.0)

    def test_sample(self):
        """Test that sampling yields one pose and twist per frame."""
        samples = self.spec.sample(5, 0.5)
        self.assertEqual(len(samples), 5)
        self.assertIs(samples[3][1], self.second)

    def test_from_dict(self):
        """Test building a trajectory from YAML-style values."""
        spec = TrajectorySpec.from_dict({
            "initial_pose": {"t": [0.0, 0.1, 0.9], "q": [1.0, 0.0, 0.0, 0.0]},
            "segments": [{"duration": 2.0, "v_o": [0.1, 0.0, 0.0]}, {"duration": 1.0, "omega": [0, 0, 1]}],
        })
        self.assertEqual(len(spec.segments), 2)
        np.testing.assert_allclose(spec.initial_pose.t, [0.0, 0.1, 0.9])
        np.testing.assert_allclose(spec.segments[1].twist.omega, [0.0, 0.0, 1.0])

    def test_validation(self):
        """Test ConfigError on empty trajectories and bad durations."""
        with self.assertRaises(ConfigError):
            TrajectorySpec(Pose(), [])
        with self.assertRaises(ConfigError):
            TrajectorySegment(0.0, Twist())

    def test_default_trajectory(self):
        """Test the circling default and its straight-line variant."""
        spec = default_trajectory(depth=0.8, speed=0.3, angular_speed=math.radians(90.0))
        origin_speed = np.linalg.norm(spec.segments[0].twist.point_velocity(spec.initial_pose.t))
        self.assertAlmostEqual(float(origin_speed), 0.3)
        straight = default_trajectory(angular_speed=0.0)
        np.testing.assert_allclose(straight.pose_at(1.0).t - straight.initial_pose.t, [0.3, 0.0, 0.0])


class TestKeyframeTrajectory(unittest.TestCase):
    """Test cases for KeyframeTrajectory."""

    def setUp(self):
        """Set up three keyframes over two seconds."""
        self.keyframes = [
            Keyframe(0.0, Pose([0.0, 0.0, 0.8], UnitQuaternion.from_rotvec([0.3, 0.0, 0.0]))),
            Keyframe(1.0, Pose([0.05, -0.02, 0.85], UnitQuaternion.from_rotvec([0.3, 0.4, 0.1]))),
            Keyframe(2.0, Pose([0.1, 0.0, 0.8], UnitQuaternion.from_rotvec([0.0, 0.6, 0.5]))),
        ]
        self.trajectory = KeyframeTrajectory(self.keyframes)

    def test_passes_through_keyframes(self):
        """Test that the trajectory meets every keyframe pose."""
        for keyframe in self.keyframes:
            pose = self.trajectory.pose_at(keyframe.time)
            np.testing.assert_allclose(pose.t, keyframe.pose.t, atol=1e-12)
            self.assertLess(geodesic_angle(pose.q, keyframe.pose.q), 1e-9)

    def test_twist_matches_motion(self):
        """Test that the twist gives the velocity and turn rate of the sampled poses."""
        h = 1e-4
        for time in (0.3, 1.0, 1.7):
            pose = self.trajectory.pose_at(time)
            twist = self.trajectory.twist_at(time)
            velocity = (self.trajectory.pose_at(time + h).t - self.trajectory.pose_at(time - h).t) / (2 * h)
            np.testing.assert_allclose(twist.point_velocity(pose.t), velocity, atol=1e-6)
            turned = UnitQuaternion.from_rotvec(twist.omega * h) * pose.q
            self.assertLess(geodesic_angle(self.trajectory.pose_at(time + h).q, turned), 1e-6)

    def test_starts_at_rest_and_holds_last_pose(self):
        """Test zero velocity at the start and a held pose after the last keyframe."""
        np.testing.assert_allclose(self.trajectory.twist_at(0.0).point_velocity(self.keyframes[0].pose.t),
                                   np.zeros(3), atol=1e-9)
        np.testing.assert_allclose(self.trajectory.pose_at(5.0).as_array(),
                                   self.trajectory.pose_at(2.0).as_array())
        self.assertFalse(self.trajectory.twist_at(2.0).as_vector().any())
        self.assertEqual(len(self.trajectory.sample(4, 1.0)), 4)
        with self.assertRaises(ValueError):
            self.trajectory.pose_at(-0.1)

    def test_validation(self):
        """Test ConfigError on too few keyframes and bad times."""
        with self.assertRaises(ConfigError):
            KeyframeTrajectory(self.keyframes[:1])
        with self.assertRaises(ConfigError):
            KeyframeTrajectory([self.keyframes[1], self.keyframes[2]])
        with self.assertRaises(ConfigError):
            KeyframeTrajectory([self.keyframes[0], self.keyframes[2], self.keyframes[1]])

    def test_from_dict(self):
        """Test that a keyframes key selects the keyframe trajectory."""
        trajectory = trajectory_from_dict({"keyframes": [
            {"time": 0.0, "t": [0.0, 0.0, 0.8]},
            {"time": 1.5, "t": [0.1, 0.0, 0.8], "q": [0.0, 0.0, 0.0, 1.0]},
        ]})
        self.assertIsInstance(trajectory, KeyframeTrajectory)
        self.assertAlmostEqual(trajectory.duration, 1.5)
        np.testing.assert_allclose(trajectory.pose_at(1.5).t, [0.1, 0.0, 0.8])
        segments = trajectory_from_dict({"segments": [{"duration": 1.0, "omega": [0, 0, 1]}]})
        self.assertIsInstance(segments, TrajectorySpec)

    def test_generated_flow(self):
        """Test that a scene along keyframes has flow close to the first-order model."""
        bundle = generate(self.trajectory, CorruptionSpec.clean(delay=2), box_mesh(),
                          default_intrinsics(160, 120, 150.0), 10)
        self.assertEqual(bundle.n_frames, 10)
        self.assertLess(ground_truth_flow_check(bundle), 0.5)


class TestCorruptionSpec(unittest.TestCase):
    """Test cases for CorruptionSpec."""

    def test_schedule(self):
        """Test the delayed stream timetable."""
        spec = CorruptionSpec(mask_delay=2, pose_delay=2)
        self.assertEqual(list(spec.schedule(2, 2, 10)), [(0, 0), (4, 2), (6, 4), (8, 6)])
        self.assertEqual(list(spec.schedule(0, 1, 3)), [(0, 0), (1, 1), (2, 2)])

    def test_default_periods(self):
        """Test that periods default to the delays."""
        spec = CorruptionSpec(mask_delay=4, pose_delay=0)
        self.assertEqual((spec.mask_period, spec.pose_period), (4, 1))

    def test_validation(self):
        """Test ConfigError on invalid corruption settings."""
        with self.assertRaises(ConfigError):
            CorruptionSpec(mask_delay=-1)
        with self.assertRaises(ConfigError):
            CorruptionSpec(outlier_rate=1.5)
        with self.assertRaises(ConfigError):
            CorruptionSpec(flow_noise=-0.1)
        with self.assertRaises(ConfigError):
            CorruptionSpec(background_depth=0.0)


class TestGenerate(unittest.TestCase):
    """Test cases for the scene generator."""

    @classmethod
    def setUpClass(cls):
        """Generate a short clean sequence."""
        cls.intr = default_intrinsics(160, 120, 150.0)
        cls.mesh = box_mesh()
        cls.spec = default_trajectory(depth=0.8, speed=0.3, angular_speed=math.radians(90.0))
        cls.bundle = generate(cls.spec, CorruptionSpec.clean(delay=3), cls.mesh, cls.intr, 12, seed=4)

    def test_streams(self):
        """Test frame counts and the delayed stream timetables."""
        bundle = self.bundle
        self.assertEqual(bundle.n_frames, 12)
        self.assertEqual(len(bundle.flows), 12)
        self.assertEqual([(m.available, m.origin) for m in bundle.mask_stream], [(0, 0), (6, 3), (9, 6)])
        self.assertEqual([(m.available, m.origin) for m in bundle.pose_stream], [(0, 0), (6, 3), (9, 6)])
        self.assertEqual(len(bundle.poses_available_at(6)), 1)
        self.assertEqual(bundle.masks_at(6)[0][1], 3)
        self.assertEqual(bundle.poses_at(7), [])

    def test_clean_poses_are_exact(self):
        """Test that a clean pose stream carries the true poses."""
        for entry in self.bundle.pose_stream:
            np.testing.assert_allclose(entry.value.as_array(), self.bundle.poses[entry.origin].as_array(),
                                       atol=1e-15)
            self.assertFalse(entry.injected)

    def test_depth_is_millimeter_quantized(self):
        """Test that measured depth survives the millimeter conversion exactly."""
        for depth in self.bundle.depths:
            restored = DepthMap.from_millimeters(depth.to_millimeters())
            np.testing.assert_array_equal(restored.data, depth.data)

    def test_exact_depth_kept_before_quantization(self):
        """Test that the rendered depth is kept alongside its millimeter measurement."""
        self.assertEqual(len(self.bundle.exact_depths), self.bundle.n_frames)
        differs = False
        for exact, measured in zip(self.bundle.exact_depths, self.bundle.depths):
            np.testing.assert_array_equal(exact.valid, measured.valid)
            gap = np.abs(exact.data[exact.valid] - measured.data[exact.valid])
            self.assertLessEqual(float(gap.max()), 0.5e-3 + 1e-6)
            differs = differs or bool(gap.max() > 0.0)
        self.assertTrue(differs)

    def test_masks_match_depth(self):
        """Test that masks cover exactly the rendered object."""
        for mask, depth in zip(self.bundle.masks, self.bundle.depths):
            np.testing.assert_array_equal(mask.bitmap, depth.valid)

    def test_flow_agrees_with_first_order_model(self):
        """Test that the exact flow is close to J·V for slow motion."""
        self.assertLess(ground_truth_flow_check(self.bundle), 0.5)
        self.assertFalse(self.bundle.flows[0].data.any())

    def test_deterministic(self):
        """Test that the same seed reproduces the same noisy bundle."""
        corruption = CorruptionSpec(pose_noise_t=0.01, flow_noise=0.5, depth_noise=0.002, outlier_rate=0.5)
        a = generate(self.spec, corruption, self.mesh, self.intr, 8, seed=9)
        b = generate(self.spec, corruption, self.mesh, self.intr, 8, seed=9)
        for x, y in zip(a.flows, b.flows):
            np.testing.assert_array_equal(x.data, y.data)
        for x, y in zip(a.pose_stream, b.pose_stream):
            np.testing.assert_array_equal(x.value.as_array(), y.value.as_array())

    def test_outliers_and_background(self):
        """Test outlier injection and the background plane."""
        corruption = CorruptionSpec(mask_delay=1, pose_delay=1, outlier_rate=1.0, background_depth=1.5)
        bundle = generate(self.spec, corruption, self.mesh, self.intr, 5, seed=1)
        self.assertEqual([entry.injected for entry in bundle.pose_stream], [False, True, True, True, True])
        self.assertTrue(bundle.depths[0].valid.all())
        self.assertTrue(np.any(np.isclose(bundle.depths[0].data, 1.5)))

    def test_object_leaving_view_truncates(self):
        """Test that the sequence stops once the object is out of view."""
        spec = TrajectorySpec.constant(Pose([0.0, 0.0, 0.8]), Twist([3.0, 0.0, 0.0], [0.0, 0.0, 0.0]))
        with self.assertLogs("flow_pose_tracker.simulation.scene", level="WARNING"):
            bundle = generate(spec, CorruptionSpec.clean(1), self.mesh, self.intr, 30)
        self.assertLess(bundle.n_frames, 30)

    def test_invalid_arguments(self):
        """Test ConfigError for bad frame counts and an invisible object."""
        with self.assertRaises(ConfigError):
            generate(self.spec, CorruptionSpec(), self.mesh, self.intr, 0)
        hidden = TrajectorySpec.constant(Pose([0.0, 0.0, -1.0]), Twist())
        with self.assertRaises(ConfigError):
            generate(hidden, CorruptionSpec(), self.mesh, self.intr, 3)


if __name__ == "__main__":
    unittest.main()
