"""Trajectory smoothness and completeness measures.

All measures run over the masked-in subsequence (mask >= 1) using the true
timestamps, so gaps simply lengthen the time step.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import TooFewPoints, ZeroDt
from .trajectory import Trajectory3D


def _valid(traj: Trajectory3D) -> tuple[np.ndarray, np.ndarray]:
    """Masked-in timestamps (integer ns) and points."""
    keep = traj.mask > 0
    return traj.timestamps[keep], traj.points[keep]


def _diffs(t: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # differencing the integer stamps first keeps equal steps bit-identical
    dt = np.diff(t).astype(np.float64) * 1e-9
    if np.any(dt <= 0):
        raise ZeroDt("consecutive timestamps must strictly increase")
    return dt, np.diff(p, axis=0) / dt[:, None]


def velocities(traj: Trajectory3D) -> np.ndarray:
    """Forward-difference velocities, shape (n - 1, 3), m/s."""
    t, p = _valid(traj)
    if len(t) < 2:
        raise TooFewPoints(f"velocities need 2 points, got {len(t)}")
    return _diffs(t, p)[1]


def velocity_smoothness(traj: Trajectory3D) -> float:
    """Mean of |v_i - v_{i-1}|^2 over the n - 2 interior points."""
    t, p = _valid(traj)
    if len(t) < 3:
        raise TooFewPoints(f"velocity smoothness needs 3 points, got {len(t)}")
    _, v = _diffs(t, p)
    dv = np.diff(v, axis=0)
    return float(np.sum(dv * dv) / (len(t) - 2))


def acceleration_smoothness(traj: Trajectory3D) -> float:
    """Mean squared central-difference acceleration: |v_i - v_{i-1}| / ((t_{i+1} - t_{i-1}) / 2)."""
    t, p = _valid(traj)
    if len(t) < 3:
        raise TooFewPoints(f"acceleration smoothness needs 3 points, got {len(t)}")
    _, v = _diffs(t, p)
    half_span = (t[2:] - t[:-2]).astype(np.float64) * 0.5e-9
    da = np.diff(v, axis=0) / half_span[:, None]
    return float(np.sum(da * da) / (len(t) - 2))


def acceleration_jitter(traj: Trajectory3D) -> float:
    """Mean |a_i - a_{i-1}|^2 with a_i = (v_{i+1} - v_i) / (t_{i+1} - t_i)."""
    t, p = _valid(traj)
    if len(t) < 4:
        raise TooFewPoints(f"acceleration jitter needs 4 points, got {len(t)}")
    dt, v = _diffs(t, p)
    a = np.diff(v, axis=0) / dt[1:, None]
    da = np.diff(a, axis=0)
    return float(np.mean(np.sum(da * da, axis=1)))


def avg_centroid_shift(traj: Trajectory3D) -> float:
    """Mean distance between consecutive points, meters."""
    _, p = _valid(traj)
    if len(p) < 2:
        raise TooFewPoints(f"centroid shift needs 2 points, got {len(p)}")
    return float(np.mean(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def completeness(traj: Trajectory3D, total_frames: int | None = None) -> float:
    """Percent of frames carrying a point.

    With ``total_frames`` given this is a plain ratio. Without it the
    denominator is the track's own extent, first to last frame with a point,
    so frames before acquisition and after loss do not count.
    """
    filled = int(np.count_nonzero(traj.mask))
    if total_frames is None:
        idx = np.flatnonzero(traj.mask)
        total_frames = int(idx[-1] - idx[0] + 1) if len(idx) else 0
    if total_frames < 1:
        return 0.0
    return 100.0 * filled / total_frames


@dataclass
class MetricsReport:
    s_v: float | None
    s_a: float | None
    s_a_alt: float | None
    c_avg_m: float | None
    c_avg_cm: float | None
    completeness: float
    n_frames: int
    n_detected: int

    def to_dict(self) -> dict:
        return asdict(self)


def _maybe(fn, traj):
    try:
        return fn(traj)
    except TooFewPoints:
        return None


def report(traj: Trajectory3D, total_frames: int | None = None) -> MetricsReport:
    c_avg = _maybe(avg_centroid_shift, traj)
    return MetricsReport(
        s_v=_maybe(velocity_smoothness, traj),
        s_a=_maybe(acceleration_smoothness, traj),
        s_a_alt=_maybe(acceleration_jitter, traj),
        c_avg_m=c_avg,
        c_avg_cm=None if c_avg is None else 100.0 * c_avg,
        completeness=completeness(traj, total_frames),
        n_frames=len(traj),
        n_detected=int(np.count_nonzero(traj.mask == 1)),
    )


def mean_report(reports: list[MetricsReport]) -> MetricsReport:
    """Per-trajectory metrics averaged over several runs (one clip each)."""

    def avg(name):
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        return float(np.mean(vals)) if vals else None

    return MetricsReport(
        s_v=avg("s_v"),
        s_a=avg("s_a"),
        s_a_alt=avg("s_a_alt"),
        c_avg_m=avg("c_avg_m"),
        c_avg_cm=avg("c_avg_cm"),
        completeness=avg("completeness") or 0.0,
        n_frames=sum(r.n_frames for r in reports),
        n_detected=sum(r.n_detected for r in reports),
    )
