"""
CSV traces: tracker estimates, ground truth, pose measurements and twists.

Writing goes through the csv module with repr-formatted floats, so a trace
written twice from the same values is byte-identical. Reading and frame
alignment run in an in-memory DuckDB connection: estimates and ground truth
are matched with JOIN ... USING (frame), and the zero-order-hold baseline
resamples the delayed pose stream with an ASOF JOIN on the availability
frame.
"""
import csv
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import duckdb
import numpy as np

from ..core.tracker import FrameEstimate
from ..errors import DataError
from ..geometry.types import Pose, Twist
from ..metrics.pose_metrics import PoseTrace

PathLike = Union[str, Path]

ESTIMATE_FORMAT = "# format: estimates/1"

POSE_COLUMNS = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"]
VELOCITY_COLUMNS = ["vx", "vy", "vz", "wx", "wy", "wz"]
ORIGIN_VELOCITY_COLUMNS = ["vox", "voy", "voz"]

ESTIMATE_HEADER = ["frame"] + POSE_COLUMNS + VELOCITY_COLUMNS + ["accepted"]
GROUND_TRUTH_HEADER = ["frame"] + POSE_COLUMNS + VELOCITY_COLUMNS + ORIGIN_VELOCITY_COLUMNS
POSES_HEADER = ["available", "origin"] + POSE_COLUMNS + ["injected"]
TWIST_HEADER = ["frame", "vox", "voy", "voz", "wx", "wy", "wz"]


def _format(values: Iterable[float]) -> List[str]:
    return [repr(float(value)) for value in values]


def _pose_fields(pose: Pose) -> List[str]:
    return _format(pose.as_array())


def write_estimates(path: PathLike, estimates: Sequence[FrameEstimate]) -> None:
    """
    Write tracker estimates, preceded by the format version line.

    The accepted column is 1 or 0 when pose measurements were processed at
    the frame (1 if any was accepted) and empty otherwise.
    """
    with open(path, "w", newline="") as handle:
        handle.write(ESTIMATE_FORMAT + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(ESTIMATE_HEADER)
        for estimate in estimates:
            accepted = "" if estimate.accepted is None else str(int(estimate.accepted))
            state = estimate.belief.mean
            writer.writerow([estimate.frame] + _pose_fields(state.pose)
                            + _format(state.v) + _format(state.omega) + [accepted])


def write_ground_truth(path: PathLike, poses: Sequence[Pose], twists: Sequence[Twist]) -> None:
    """Write per-frame ground truth: pose, origin velocity v, ω and the twist's v_O."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(GROUND_TRUTH_HEADER)
        for frame, (pose, twist) in enumerate(zip(poses, twists)):
            writer.writerow([frame] + _pose_fields(pose) + _format(twist.point_velocity(pose.t))
                            + _format(twist.omega) + _format(twist.v_o))


def write_pose_stream(path: PathLike, stream: Iterable) -> None:
    """Write delayed pose measurements with their (available, origin) provenance."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(POSES_HEADER)
        for entry in stream:
            writer.writerow([entry.available, entry.origin] + _pose_fields(entry.value)
                            + [int(entry.injected)])


def write_twists(path: PathLike, twists: Sequence[Tuple[int, Twist]]) -> None:
    """Dump the velocity filter output stream as (frame, v_O, ω) rows."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TWIST_HEADER)
        for frame, twist in twists:
            writer.writerow([frame] + _format(twist.as_vector()))


def _quoted(path: PathLike) -> str:
    return "'" + str(path).replace("'", "''") + "'"


def _check_version(path: PathLike) -> None:
    with open(path) as handle:
        first = handle.readline().strip()
    if first != ESTIMATE_FORMAT:
        raise DataError(f"Unsupported estimate file format line {first!r}", path=str(path))


def _check_exists(path: PathLike) -> None:
    if not Path(path).is_file():
        raise DataError("File not found", path=str(path))


def _connect(est_path: Optional[PathLike], gt_path: Optional[PathLike],
             poses_path: Optional[PathLike] = None) -> duckdb.DuckDBPyConnection:
    """Open an in-memory connection with views over the given CSV files."""
    conn = duckdb.connect(":memory:")
    try:
        if est_path is not None:
            _check_exists(est_path)
            _check_version(est_path)
            conn.execute(f"CREATE VIEW est AS SELECT * FROM read_csv({_quoted(est_path)}, "
                         f"skip=1, header=true, all_varchar=true)")
        if gt_path is not None:
            _check_exists(gt_path)
            conn.execute(f"CREATE VIEW gt AS SELECT * FROM read_csv({_quoted(gt_path)}, "
                         f"header=true, all_varchar=true)")
        if poses_path is not None:
            _check_exists(poses_path)
            conn.execute(f"CREATE VIEW poses AS SELECT * FROM read_csv({_quoted(poses_path)}, "
                         f"header=true, all_varchar=true)")
    except duckdb.Error as exc:
        conn.close()
        raise DataError(f"Could not read trace files: {exc}") from exc
    return conn


def _cast(alias: str, columns: Sequence[str], kind: str = "DOUBLE") -> str:
    return ", ".join(f"CAST({alias}.{column} AS {kind})" for column in columns)


def _fetch(conn: duckdb.DuckDBPyConnection, sql: str, path: Optional[PathLike] = None) -> np.ndarray:
    try:
        rows = conn.execute(sql).fetchall()
    except duckdb.Error as exc:
        raise DataError(f"Malformed trace: {exc}", path=None if path is None else str(path)) from exc
    if any(value is None for row in rows for value in row):
        raise DataError("Trace has empty fields", path=None if path is None else str(path))
    return np.array(rows, dtype=float).reshape(len(rows), -1)


def _trace(values: np.ndarray, with_velocity: bool) -> PoseTrace:
    frames = values[:, 0].astype(np.int64)
    if not with_velocity:
        return PoseTrace(frames, values[:, 1:4], values[:, 4:8])
    return PoseTrace(frames, values[:, 1:4], values[:, 4:8], values[:, 8:11], values[:, 11:14])


def load_ground_truth(path: PathLike) -> PoseTrace:
    """Ground-truth trace with the object-origin velocity."""
    conn = _connect(None, path)
    try:
        values = _fetch(conn, f"SELECT CAST(frame AS BIGINT), {_cast('gt', POSE_COLUMNS + VELOCITY_COLUMNS)} "
                              f"FROM gt ORDER BY 1", path)
    finally:
        conn.close()
    return _trace(values, with_velocity=True)


def load_estimates(path: PathLike) -> PoseTrace:
    conn = _connect(path, None)
    try:
        values = _fetch(conn, f"SELECT CAST(frame AS BIGINT), {_cast('est', POSE_COLUMNS + VELOCITY_COLUMNS)} "
                              f"FROM est ORDER BY 1", path)
    finally:
        conn.close()
    return _trace(values, with_velocity=True)


def align_traces(est_path: PathLike, gt_path: PathLike) -> Tuple[PoseTrace, PoseTrace]:
    """
    Load an estimate file and ground truth matched frame by frame.

    Args:
        est_path: Estimate CSV written by write_estimates
        gt_path: ground_truth.csv of the sequence

    Returns:
        Tuple of (estimate, ground truth) traces on the same frames

    Raises:
        DataError: If the files are malformed or do not cover the same frames
    """
    conn = _connect(est_path, gt_path)
    try:
        counts = conn.execute(
            "SELECT (SELECT count(*) FROM est), (SELECT count(*) FROM gt), "
            "(SELECT count(*) FROM est JOIN gt USING (frame))"
        ).fetchone()
        n_est, n_gt, n_joined = counts
        if not n_est == n_gt == n_joined:
            missing = conn.execute(
                "SELECT min(CAST(frame AS BIGINT)) FROM est FULL OUTER JOIN gt USING (frame) "
                "WHERE est.tx IS NULL OR gt.tx IS NULL"
            ).fetchone()[0]
            raise DataError(f"Estimates ({n_est} frames) and ground truth ({n_gt} frames) are misaligned",
                            frame=missing, path=str(est_path))
        columns = POSE_COLUMNS + VELOCITY_COLUMNS
        values = _fetch(conn,
                        f"SELECT CAST(frame AS BIGINT) AS f, {_cast('est', columns)}, {_cast('gt', columns)} "
                        f"FROM est JOIN gt USING (frame) ORDER BY f", est_path)
    finally:
        conn.close()
    width = 1 + len(columns)
    est = _trace(values[:, :width], with_velocity=True)
    gt = _trace(np.hstack([values[:, :1], values[:, width:]]), with_velocity=True)
    return est, gt


def zero_order_hold(poses_path: PathLike, gt_path: PathLike) -> Tuple[PoseTrace, PoseTrace]:
    """
    Resample the delayed pose stream at the input frame rate.

    Each ground-truth frame takes the latest pose measurement already
    available at that frame, which is how a delayed pose estimator would be
    scored without any filtering. The baseline has no velocities.

    Returns:
        Tuple of (baseline, ground truth) traces on the same frames

    Raises:
        DataError: If a frame precedes every available pose
    """
    conn = _connect(None, gt_path, poses_path)
    try:
        values = conn.execute(
            f"SELECT CAST(g.frame AS BIGINT) AS f, {_cast('p', POSE_COLUMNS)}, "
            f"{_cast('g', POSE_COLUMNS + VELOCITY_COLUMNS)} "
            f"FROM (SELECT *, CAST(frame AS BIGINT) AS frame_index FROM gt) g ASOF LEFT JOIN "
            f"(SELECT *, CAST(available AS BIGINT) AS available_frame FROM poses "
            f" QUALIFY row_number() OVER (PARTITION BY CAST(available AS BIGINT) "
            f"                            ORDER BY CAST(origin AS BIGINT) DESC) = 1) p "
            f"ON g.frame_index >= p.available_frame ORDER BY f"
        ).fetchall()
    except duckdb.Error as exc:
        raise DataError(f"Malformed pose stream: {exc}", path=str(poses_path)) from exc
    finally:
        conn.close()
    for row in values:
        if row[1] is None:
            raise DataError("No pose available yet", frame=int(row[0]), path=str(poses_path))
    values = np.array(values, dtype=float).reshape(len(values), -1)
    width = 1 + len(POSE_COLUMNS)
    baseline = _trace(values[:, :width], with_velocity=False)
    gt = _trace(np.hstack([values[:, :1], values[:, width:]]), with_velocity=True)
    return baseline, gt


def load_pose_stream(path: PathLike) -> List[Tuple[int, int, Pose, bool]]:
    """
    Read poses.csv as (available, origin, pose, injected) tuples, ordered by availability.

    Raises:
        DataError: If an origin lies after its availability frame
    """
    conn = _connect(None, None, path)
    try:
        values = _fetch(conn, f"SELECT CAST(available AS BIGINT), CAST(origin AS BIGINT), "
                              f"{_cast('poses', POSE_COLUMNS)}, CAST(injected AS BIGINT) "
                              f"FROM poses ORDER BY 1, 2", path)
    finally:
        conn.close()
    stream = []
    for row in values:
        available, origin = int(row[0]), int(row[1])
        if origin > available:
            raise DataError(f"Pose from frame {origin} available before it was measured",
                            frame=available, path=str(path))
        stream.append((available, origin, Pose.from_array(row[2:9]), bool(row[9])))
    return stream
