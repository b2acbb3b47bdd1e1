"""Gap filling for tracked trajectories.

Two independent fills are built for every missing frame: a stereo fill
(each camera's pixel track interpolated over time, then re-triangulated)
and a direct 3D spline through the detected points. A frame is filled with
their blend ``alpha * stereo + (1 - alpha) * spline`` only when the stereo
fill lands within ``epsilon3`` of the nearest detected point in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DegenerateRays, TooSparse
from .geometry import StereoRig, triangulate
from .trajectory import COMPENSATED, DETECTED, MISSING, Trajectory3D

MIN_KNOTS = 4

PROV_DETECTED = "detected"
PROV_COMPENSATED = "compensated"
PROV_UNFILLED = "unfilled"


@dataclass(frozen=True)
class CompensationConfig:
    alpha: float = 0.5
    epsilon3: float = 1.5  # m
    spline_kind: str = "cubic"
    max_gap: int = 20  # frames

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.epsilon3 > 0:
            raise ConfigError("epsilon3 must be positive")
        if self.max_gap < 1:
            raise ConfigError("max_gap must be at least 1")
        if self.spline_kind != "cubic":
            raise ConfigError(f"unsupported spline_kind {self.spline_kind!r}")


@dataclass
class GapFill:
    values: np.ndarray  # (n, d), NaN where unfilled
    filled: np.ndarray  # bool, True where values is finite
    long_gaps: list[tuple[int, int]] = field(default_factory=list)  # [start, stop) frame ranges


@dataclass
class CompensatedTrajectory:
    trajectory: Trajectory3D
    provenance: list[str]

    @property
    def completeness(self) -> float:
        n = len(self.trajectory)
        return 100.0 * int(np.count_nonzero(self.trajectory.mask)) / n if n else 0.0


def _gaps(known: np.ndarray) -> list[tuple[int, int]]:
    """Interior runs of unknown frames as [start, stop) ranges."""
    idx = np.flatnonzero(known)
    out = []
    for a, b in zip(idx[:-1], idx[1:]):
        if b - a > 1:
            out.append((int(a) + 1, int(b)))
    return out


def fill_gaps(seconds: np.ndarray, values: np.ndarray, known: np.ndarray, max_gap: int) -> GapFill:
    """Natural cubic spline through ``values[known]``, evaluated over interior gaps of at most ``max_gap`` frames."""
    values = np.asarray(values, dtype=np.float64)
    squeeze = values.ndim == 1
    vals = values.reshape(len(values), -1)
    known = np.asarray(known, dtype=bool)
    if int(known.sum()) < MIN_KNOTS:
        raise TooSparse(f"{int(known.sum())} known samples, need at least {MIN_KNOTS}")
    out = np.where(known[:, None], vals, np.nan)
    spline = CubicSpline(seconds[known], vals[known], axis=0, bc_type="natural")
    long_gaps = []
    for a, b in _gaps(known):
        if b - a > max_gap:
            long_gaps.append((a, b))
            continue
        out[a:b] = spline(seconds[a:b])
    filled = np.all(np.isfinite(out), axis=1)
    return GapFill(out[:, 0] if squeeze else out, filled, long_gaps)


def interpolate_2d(
    seconds: np.ndarray, pixels: np.ndarray, found: np.ndarray, max_gap: int = 20
) -> GapFill:
    """Fill missing pixel positions from a per-axis natural cubic spline over time.

    Found entries pass through unchanged; leading and trailing misses, and
    interior gaps longer than ``max_gap``, stay NaN.
    """
    return fill_gaps(np.asarray(seconds, dtype=np.float64), pixels, found, max_gap)


def compensate_stereo(
    seconds: np.ndarray,
    left_px: np.ndarray,
    right_px: np.ndarray,
    mask: np.ndarray,
    rig: StereoRig,
    max_gap: int = 20,
) -> np.ndarray:
    """Stereo fill: interpolate both pixel tracks, then triangulate every frame with a pair.

    Only frames with ``mask == 1`` act as knots in either view, so a frame
    missed by one camera is rebuilt from both tracks.
    """
    known = np.asarray(mask) == DETECTED
    n = len(known)
    out = np.full((n, 3), np.nan)
    try:
        fl = interpolate_2d(seconds, left_px, known, max_gap)
        fr = interpolate_2d(seconds, right_px, known, max_gap)
        both = fl.filled & fr.filled
        lv, rv = fl.values, fr.values
    except TooSparse:
        both = known
        lv, rv = left_px, right_px
    for i in np.flatnonzero(both):
        try:
            out[i] = triangulate((lv[i, 0], lv[i, 1]), (rv[i, 0], rv[i, 1]), rig)
        except DegenerateRays:
            pass
    return out


def spline_3d(traj: Trajectory3D, max_gap: int | None = None) -> np.ndarray:
    """Per-axis natural cubic spline through the detected points, evaluated at every frame."""
    known = traj.mask == DETECTED
    gap = len(traj) if max_gap is None else max_gap
    return fill_gaps(traj.seconds, traj.points, known, gap).values


def merge(
    p_w: Trajectory3D,
    p_stereo: np.ndarray,
    p_spline: np.ndarray,
    config: CompensationConfig = CompensationConfig(),
) -> CompensatedTrajectory:
    """Combine detected points with the two fills frame by frame.

    Detected and previously compensated frames are copied verbatim. A
    missing frame takes the blend when both fills exist and the stereo fill
    is within ``epsilon3`` of the temporally nearest detected point.
    """
    mask = p_w.mask
    points = p_w.points.copy()
    new_mask = mask.copy()
    provenance = [PROV_DETECTED if m == DETECTED else PROV_COMPENSATED if m == COMPENSATED else PROV_UNFILLED for m in mask]
    det_idx = np.flatnonzero(mask == DETECTED)
    if len(det_idx):
        ts = p_w.timestamps
        det_ts = ts[det_idx]
        a = config.alpha
        for i in np.flatnonzero(mask == MISSING):
            hat = p_stereo[i]
            tilde = p_spline[i]
            if not (np.all(np.isfinite(hat)) and np.all(np.isfinite(tilde))):
                continue
            k = int(np.searchsorted(det_ts, ts[i]))
            # nearest detected frame in time; ties go to the earlier one
            cands = [c for c in (k - 1, k) if 0 <= c < len(det_idx)]
            j = min(cands, key=lambda c: (abs(int(det_ts[c]) - int(ts[i])), c))
            if np.linalg.norm(hat - points[det_idx[j]]) <= config.epsilon3:
                points[i] = a * hat + (1.0 - a) * tilde
                new_mask[i] = COMPENSATED
                provenance[i] = PROV_COMPENSATED
    return CompensatedTrajectory(Trajectory3D(p_w.timestamps.copy(), points, new_mask), provenance)


def compensate(
    traj: Trajectory3D,
    left_px: np.ndarray,
    right_px: np.ndarray,
    rig: StereoRig,
    config: CompensationConfig = CompensationConfig(),
) -> CompensatedTrajectory:
    """Fill missing frames of a tracked trajectory; sparse input passes through untouched."""
    if int(np.count_nonzero(traj.mask == MISSING)) == 0 or int(np.count_nonzero(traj.mask == DETECTED)) < MIN_KNOTS:
        return merge(traj, np.full((len(traj), 3), np.nan), np.full((len(traj), 3), np.nan), config)
    secs = traj.seconds
    p_stereo = compensate_stereo(secs, left_px, right_px, traj.mask, rig, config.max_gap)
    p_spline = spline_3d(traj, config.max_gap)
    return merge(traj, p_stereo, p_spline, config)
