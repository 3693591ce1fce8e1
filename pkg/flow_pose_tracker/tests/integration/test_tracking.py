"""
Integration tests running the whole tracker on simulated sequences and
checking the accuracy and throughput it reaches.
"""
import math
import unittest

import numpy as np

from flow_pose_tracker.core.tracker import Tracker, run_tracker
from flow_pose_tracker.geometry.types import mask_iou
from flow_pose_tracker.io.config import load_run_config
from flow_pose_tracker.metrics.pose_metrics import PoseTrace, translation_errors
from flow_pose_tracker.metrics.report import evaluate_traces
from flow_pose_tracker.pipeline import estimates_trace
from flow_pose_tracker.rendering.mesh import box_mesh, sample_surface_points
from flow_pose_tracker.simulation.scene import default_intrinsics, default_trajectory, generate
from flow_pose_tracker.simulation.trajectory import CorruptionSpec

WIDTH, HEIGHT, FOCAL = 320, 240, 300.0


def ground_truth_trace(bundle):
    """Poses and origin velocities of a generated bundle."""
    v = [twist.point_velocity(pose.t) for pose, twist in zip(bundle.poses, bundle.twists)]
    omega = [twist.omega for twist in bundle.twists]
    return PoseTrace.from_poses(bundle.poses, v=v, omega=omega)


def simulate(trajectory, corruption, n_frames=150, seed=0, intr=None):
    return generate(trajectory, corruption, box_mesh(), intr or default_intrinsics(WIDTH, HEIGHT, FOCAL),
                    n_frames, seed)


class TestVelocityRecovery(unittest.TestCase):
    """Test cases for the velocity measurements on exact flow and masks."""

    def settled_errors(self, bundle):
        """RMSE of v_O (m/s) and ω (rad/s) of the twist stream from frame 15 on."""
        result = run_tracker(bundle, load_run_config())
        self.assertEqual(len(result.twists), bundle.n_frames - 1)
        settled = [(frame, twist) for frame, twist in result.twists if frame >= 15]
        v_errors = [np.linalg.norm(twist.v_o - bundle.twists[frame].v_o) for frame, twist in settled]
        omega_errors = [np.linalg.norm(twist.omega - bundle.twists[frame].omega) for frame, twist in settled]
        return math.sqrt(np.mean(np.square(v_errors))), math.sqrt(np.mean(np.square(omega_errors)))

    def test_converges_to_constant_twist(self):
        """Test that the twist stream tracks a constant twist after 15 frames."""
        bundle = simulate(default_trajectory(speed=0.1, angular_speed=math.radians(30.0)), CorruptionSpec.clean())
        e_v, e_omega = self.settled_errors(bundle)
        self.assertLess(100.0 * e_v, 1.0)
        self.assertLess(math.degrees(e_omega), 2.0)

    def test_fast_rotation_within_first_order_bias(self):
        """Test that at 0.3 m/s and 90 deg/s the v_O error stays within the first-order flow bias."""
        angular_speed = math.radians(90.0)
        bundle = simulate(default_trajectory(speed=0.3, angular_speed=angular_speed), CorruptionSpec.clean())
        depth = max(float(exact.data[exact.valid].max()) for exact in bundle.exact_depths)
        bias = depth * angular_speed ** 2 * bundle.dt / 2.0
        e_v, e_omega = self.settled_errors(bundle)
        self.assertLess(e_v, bias + 0.005)
        self.assertLess(math.degrees(e_omega), 5.0)


class TestMaskSync(unittest.TestCase):
    """Test cases for mask synchronization inside the tracker."""

    @classmethod
    def setUpClass(cls):
        """Generate a sequence with exact flow and six-frame-delayed masks."""
        cls.bundle = simulate(default_trajectory(speed=0.1, angular_speed=math.radians(30.0)),
                              CorruptionSpec.clean(6), n_frames=90)

    def _ious(self, cfg):
        tracker = Tracker(self.bundle.intr, cfg, self.bundle.mesh)
        tracker.start(self.bundle.depth_at(0), self.bundle.masks_at(0), self.bundle.poses_at(0))
        ious = []
        for frame in range(1, self.bundle.n_frames):
            tracker.process(frame, self.bundle.flow_at(frame), self.bundle.depth_at(frame),
                            self.bundle.masks_at(frame), self.bundle.poses_at(frame))
            ious.append(mask_iou(tracker.mask_sync.mask, self.bundle.masks[frame]))
        return np.array(ious)

    def test_synchronized_masks_follow_object(self):
        """Test IoU of at least 0.9 on every frame, and lower IoU without synchronization."""
        cfg = load_run_config()
        synchronized = self._ious(cfg)
        raw = self._ious(cfg.ablated("no_mask_sync"))
        self.assertGreaterEqual(synchronized.min(), 0.90)
        self.assertLess(raw.mean(), synchronized.mean())


class TestOutlierRejection(unittest.TestCase):
    """Test cases for vetting gross pose outliers against measured depth."""

    @classmethod
    def setUpClass(cls):
        """Generate a sequence with 10% outlier poses and run it with and without rejection."""
        corruption = CorruptionSpec(mask_delay=6, pose_delay=6, pose_period=2, outlier_rate=0.1,
                                    background_depth=1.5)
        cls.bundle = simulate(default_trajectory(speed=0.1, angular_speed=math.radians(30.0)), corruption, seed=7)
        cfg = load_run_config()
        cls.with_rejection = run_tracker(cls.bundle, cfg)
        cls.without_rejection = run_tracker(cls.bundle, cfg.ablated("no_outlier_rejection"))
        cls.injected = {entry.origin: entry.injected for entry in cls.bundle.pose_stream}

    def test_decisions(self):
        """Test that outliers are rejected and clean poses accepted."""
        outliers = [accepted for _, origin, accepted in self.with_rejection.decisions if self.injected[origin]]
        clean = [accepted for _, origin, accepted in self.with_rejection.decisions if not self.injected[origin]]
        self.assertGreaterEqual(len(outliers), 3)
        self.assertGreaterEqual(outliers.count(False) / len(outliers), 0.90)
        self.assertGreaterEqual(clean.count(True) / len(clean), 0.95)

    def test_rejection_halves_position_error(self):
        """Test that rejection at least halves the position RMSE."""
        gt = ground_truth_trace(self.bundle)

        def rmse(result):
            return math.sqrt(np.mean(np.square(translation_errors(estimates_trace(result.estimates), gt))))

        self.assertLessEqual(rmse(self.with_rejection), 0.5 * rmse(self.without_rejection))


class TestAblationOrdering(unittest.TestCase):
    """Test cases for the accuracy ordering of the ablation variants."""

    def test_ordering(self):
        """Test full > no mask sync > no velocity > no pose on noisy fast motion."""
        corruption = CorruptionSpec(pose_noise_t=0.01, pose_noise_rot=math.radians(5.0), flow_noise=0.5,
                                    background_depth=1.5)
        bundle = simulate(default_trajectory(), corruption, seed=11)
        cfg = load_run_config(overrides=["ablation.use_outlier_rejection=false"])
        gt = ground_truth_trace(bundle)
        points = sample_surface_points(bundle.mesh, 1000, seed=0)
        scores = {}
        for variant in ("full", "no_mask_sync", "no_velocity", "no_pose"):
            result = run_tracker(bundle, cfg.ablated(variant))
            scores[variant] = evaluate_traces(estimates_trace(result.estimates), gt, points, variant).aggregate.add_auc
        self.assertGreater(scores["full"], scores["no_mask_sync"])
        self.assertGreater(scores["no_mask_sync"], scores["no_velocity"])
        self.assertGreater(scores["no_velocity"], scores["no_pose"])


class TestThroughput(unittest.TestCase):
    """Test cases for the real-time budget."""

    def test_real_time_on_vga(self):
        """Test at least 30 fps on 640x480 frames with the 3000-pixel cap."""
        bundle = simulate(default_trajectory(), CorruptionSpec(), n_frames=40, intr=default_intrinsics())
        cfg = load_run_config()
        self.assertEqual(cfg.max_pixels, 3000)
        result = run_tracker(bundle, cfg)
        self.assertEqual(result.timer.frames, bundle.n_frames - 1)
        self.assertGreaterEqual(result.timer.fps, 30.0)


if __name__ == "__main__":
    unittest.main()
