"""
Integration tests for the command-line interface.
"""
import csv
import tempfile
import unittest
from pathlib import Path

from flow_pose_tracker.cli import main

SMALL = ["--frames", "12", "--width", "160", "--height", "120", "--focal", "150",
         "--mask-delay", "3", "--pose-delay", "3", "--angular-speed", "60"]
DELAYS = ["--set", "mask_sync.delay=3", "--set", "pose_filter.delay=3"]


def read_report(path):
    with open(path, newline="") as handle:
        return {row["name"]: row for row in csv.DictReader(handle)}


class TestCommandLine(unittest.TestCase):
    """Test cases for generate, track, evaluate and ablate."""

    def setUp(self):
        """Generate a small sequence."""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.dir = Path(self.temp_dir.name)
        self.seq = self.dir / "seq"
        self.assertEqual(main(["--log-level", "WARNING", "generate", str(self.seq)] + SMALL), 0)

    def tearDown(self):
        """Remove the temporary directory."""
        self.temp_dir.cleanup()

    def test_generate_layout(self):
        """Test that generate writes a complete sequence."""
        self.assertEqual(len(list((self.seq / "depth").glob("*.png"))), 12)
        self.assertTrue((self.seq / "ground_truth.csv").is_file())

    def test_deterministic(self):
        """Test byte-identical estimates from identical inputs."""
        other = self.dir / "other"
        self.assertEqual(main(["generate", str(other)] + SMALL), 0)
        for root in (self.seq, other):
            self.assertEqual(main(["track", str(root), "--report", str(root / "report.txt")] + DELAYS), 0)
        self.assertEqual((self.seq / "estimates.csv").read_bytes(), (other / "estimates.csv").read_bytes())
        self.assertEqual((self.seq / "poses.csv").read_bytes(), (other / "poses.csv").read_bytes())

    def test_track_and_evaluate(self):
        """Test that evaluate reproduces the score printed by track."""
        tracked = self.dir / "track.csv"
        evaluated = self.dir / "evaluate.csv"
        self.assertEqual(main(["track", str(self.seq), "--format", "csv", "--report", str(tracked)] + DELAYS), 0)
        self.assertEqual(main(["evaluate", "--estimates", str(self.seq / "estimates.csv"),
                               "--ground-truth", str(self.seq / "ground_truth.csv"), "--mesh", "box",
                               "--name", "seq", "--format", "csv", "--report", str(evaluated)]), 0)
        self.assertEqual(read_report(tracked), read_report(evaluated))

    def test_baseline_is_worse(self):
        """Test that the held delayed poses score worse in orientation than the tracker."""
        tracked = self.dir / "track.csv"
        baseline = self.dir / "baseline.csv"
        self.assertEqual(main(["track", str(self.seq), "--format", "csv", "--report", str(tracked)] + DELAYS), 0)
        self.assertEqual(main(["evaluate", "--baseline", str(self.seq / "poses.csv"),
                               "--ground-truth", str(self.seq / "ground_truth.csv"), "--mesh", "box",
                               "--format", "csv", "--report", str(baseline)]), 0)
        held = read_report(baseline)["object"]
        ours = read_report(tracked)["seq"]
        self.assertEqual(held["rmse_e_v [cm/s]"], "")
        self.assertGreater(float(held["rmse_e_a [deg]"]), float(ours["rmse_e_a [deg]"]))

    def test_switches_and_outputs(self):
        """Test an ablation switch with explicit output paths."""
        code = main(["track", str(self.seq), "--no-mask-sync", "--output", str(self.dir / "est.csv"),
                     "--twists", str(self.dir / "twists.csv"), "--overlays", str(self.dir / "overlays"),
                     "--report", str(self.dir / "report.txt")] + DELAYS)
        self.assertEqual(code, 0)
        self.assertTrue((self.dir / "est.csv").is_file())
        self.assertTrue((self.dir / "twists.csv").is_file())
        self.assertEqual(len(list((self.dir / "overlays").glob("*.png"))), 12)

    def test_track_several_sequences(self):
        """Test a pooled report over two sequences, and output paths refused for several."""
        other = self.dir / "other"
        self.assertEqual(main(["generate", str(other), "--seed", "2"] + SMALL), 0)
        report = self.dir / "pooled.csv"
        code = main(["track", str(self.seq), str(other), "--format", "csv", "--report", str(report)] + DELAYS)
        self.assertEqual(code, 0)
        rows = read_report(report)
        self.assertEqual(list(rows), ["seq", "other", "all"])
        self.assertEqual(int(rows["all"]["n_frames"]), 24)
        self.assertEqual(main(["track", str(self.seq), str(other), "--output", str(self.dir / "e.csv")] + DELAYS), 2)

    def test_keyframe_trajectory(self):
        """Test generating a sequence along keyframes read from YAML."""
        trajectory = self.dir / "keyframes.yaml"
        trajectory.write_text("keyframes:\n"
                              "  - {time: 0.0, t: [0.0, 0.0, 0.8]}\n"
                              "  - {time: 1.0, t: [0.05, 0.0, 0.8], q: [0.966, 0.0, 0.259, 0.0]}\n")
        keyframed = self.dir / "keyframed"
        self.assertEqual(main(["generate", str(keyframed), "--trajectory", str(trajectory)] + SMALL), 0)
        self.assertEqual(len(list((keyframed / "depth").glob("*.png"))), 12)
        trajectory.write_text("keyframes:\n  - {time: 0.0}\n")
        self.assertEqual(main(["generate", str(self.dir / "single"), "--trajectory", str(trajectory)] + SMALL), 2)

    def test_ablate(self):
        """Test the ablation report rows."""
        report = self.dir / "ablate.csv"
        code = main(["ablate", str(self.seq), "--variants", "full", "no_pose", "--format", "csv",
                     "--report", str(report)] + DELAYS)
        self.assertEqual(code, 0)
        self.assertEqual(list(read_report(report)), ["full", "no_pose"])

    def test_exit_codes(self):
        """Test the exit codes of configuration and data errors."""
        self.assertEqual(main(["generate", str(self.dir / "none"), "--frames", "0"]), 2)
        self.assertEqual(main(["generate", str(self.seq)] + SMALL), 3)
        self.assertEqual(main(["track", str(self.dir / "missing")]), 3)
        self.assertEqual(main(["track", str(self.seq), "--set", "pose_filter.gamma=-1"]), 2)
        self.assertEqual(main(["track", str(self.seq), "--set", "no_such.key=1"]), 2)
        self.assertEqual(main(["evaluate", "--ground-truth", str(self.seq / "ground_truth.csv"), "--mesh", "box"]), 2)
        (self.seq / "flow" / "000004.flo").unlink()
        self.assertEqual(main(["track", str(self.seq)] + DELAYS), 3)

    def test_no_ground_truth(self):
        """Test that a live-style sequence is tracked with overlays and no report."""
        live = self.dir / "live"
        self.assertEqual(main(["generate", str(live), "--no-ground-truth"] + SMALL), 0)
        self.assertEqual(main(["track", str(live), "--report", str(self.dir / "unused.txt")] + DELAYS), 0)
        self.assertFalse((self.dir / "unused.txt").exists())
        self.assertEqual(len(list((live / "overlays").glob("*.png"))), 12)


if __name__ == "__main__":
    unittest.main()
