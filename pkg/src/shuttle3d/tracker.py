"""Stereo tracking state machine with predictive ROI feedback and plausibility gates.

Per frame: both cameras must report the shuttle, the pair must agree
vertically (epsilon1), the triangulated point must land near the fitted
prediction (epsilon2), and every ``roi_refresh_interval`` frames the
prediction is reprojected to recenter each camera's crop.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .detection_io import Detection2D, DetectionStream, DetectorModel, RoI, detect
from .errors import (
    AlignmentError,
    BehindCamera,
    ConfigError,
    DegenerateRays,
    ExtrapolationTooFar,
    InsufficientPoints,
    SingularFit,
)
from .geometry import (
    CameraModel,
    PixelPoint,
    StereoRig,
    WorldPoint,
    project,
    triangulate,
)
from .trajectory import Trajectory3D

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    epsilon1: float = 10.0  # px, vertical pair disagreement
    epsilon2: float = 0.5  # m, detection vs prediction
    roi_size: float = 640.0
    roi_refresh_interval: int = 10
    fit_window: int = 15
    fit_min_points: int = 5
    fit_degree: int = 2

    def __post_init__(self) -> None:
        if not (self.epsilon1 > 0 and self.epsilon2 > 0 and self.roi_size > 0):
            raise ConfigError("epsilon1, epsilon2 and roi_size must be positive")
        if self.fit_degree < 0:
            raise ConfigError("fit_degree must be non-negative")
        if self.fit_min_points < self.fit_degree + 1:
            raise ConfigError("fit_min_points must be at least fit_degree + 1")
        if self.fit_window < self.fit_min_points:
            raise ConfigError("fit_window must be at least fit_min_points")
        if self.roi_refresh_interval < 1:
            raise ConfigError("roi_refresh_interval must be at least 1")


class Strategy(str, enum.Enum):
    A = "A"  # full frame, no gates
    B = "B"  # fixed central ROI, no gates
    C = "C"  # predictive ROI + epsilon gates
    D = "D"  # C + compensation


class StepOutcome(str, enum.Enum):
    ACCEPTED = "Accepted"
    REJECTED_PAIR = "RejectedPair"
    REJECTED_GATE = "RejectedGate"
    MISSED = "Missed"


@dataclass(frozen=True)
class AxisFit:
    """Per-axis polynomials in seconds since ``t0_ns``; ``coeffs[axis][k]`` multiplies t**k."""

    coeffs: np.ndarray  # (3, degree + 1)
    t0_ns: int
    t_end_ns: int
    window_span: float  # seconds
    residual_rms: float

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1


def initial_roi(cam: CameraModel, size: float = 640.0) -> RoI:
    """Square crop at the image center, clamped to the frame."""
    roi = RoI(PixelPoint(cam.image_width / 2.0, cam.image_height / 2.0), size, size)
    return roi.clamped(cam.image_width, cam.image_height)


def validate_pair(dL: Detection2D, dR: Detection2D, epsilon1: float) -> bool:
    if not (dL.found and dR.found):
        return False
    return abs(dL.v - dR.v) <= epsilon1


def fit_axes(
    window: Sequence[tuple[WorldPoint, int]], degree: int = 2, min_points: int | None = None
) -> AxisFit:
    """Least-squares polynomial per world axis over (point, timestamp_ns) pairs."""
    if min_points is None:
        min_points = degree + 1
    n = len(window)
    if n < max(min_points, degree + 1):
        raise InsufficientPoints(f"{n} points, need {max(min_points, degree + 1)} for degree {degree}")
    ts = np.fromiter((t for _, t in window), dtype=np.int64, count=n)
    pts = np.array([p for p, _ in window], dtype=np.float64)
    t0 = int(ts[0])
    tau = (ts - t0) * 1e-9
    vander = np.vander(tau, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(vander, pts, rcond=None)
    if rank < degree + 1:
        raise SingularFit(f"design matrix rank {rank} < {degree + 1}")
    resid = pts - vander @ coeffs
    rms = float(math.sqrt(np.mean(resid * resid)))
    return AxisFit(coeffs.T.copy(), t0, int(ts.max()), float(tau.max() - tau.min()), rms)


def predict_position(fit: AxisFit, t_ns: int) -> WorldPoint:
    """Evaluate the fit, refusing to extrapolate more than two window spans past either end."""
    reach = 2.0 * fit.window_span
    dt = (t_ns - fit.t0_ns) * 1e-9
    past_end = (t_ns - fit.t_end_ns) * 1e-9
    if past_end > reach or -dt > reach:
        raise ExtrapolationTooFar(
            f"t is {max(past_end, -dt):.4g} s outside a fit window spanning {fit.window_span:.4g} s"
        )
    out = []
    for c in fit.coeffs:
        acc = 0.0
        for coef in c[::-1]:
            acc = acc * dt + coef
        out.append(float(acc))
    return WorldPoint(*out)


def plausibility_gate(detected: WorldPoint, predicted: WorldPoint | None, epsilon2: float) -> bool:
    if predicted is None:
        return True
    return math.dist(detected, predicted) <= epsilon2


@dataclass
class TrackerState:
    window: deque
    roi_left: RoI
    roi_right: RoI
    frames_since_roi_update: int = 0
    current_fit: AxisFit | None = None
    consecutive_misses: int = 0
    last_timestamp: int | None = None
    timestamps: list[int] = field(default_factory=list)
    points: list[tuple[float, float, float]] = field(default_factory=list)
    mask: list[int] = field(default_factory=list)
    # pixels of accepted pairs, NaN elsewhere; input for compensation
    left_px: list[tuple[float, float]] = field(default_factory=list)
    right_px: list[tuple[float, float]] = field(default_factory=list)
    outcomes: list[StepOutcome] = field(default_factory=list)

    @classmethod
    def initial(cls, rig: StereoRig, config: TrackerConfig) -> TrackerState:
        return cls(
            window=deque(maxlen=config.fit_window),
            roi_left=initial_roi(rig.left, config.roi_size),
            roi_right=initial_roi(rig.right, config.roi_size),
        )

    def trajectory(self) -> Trajectory3D:
        return Trajectory3D(
            np.array(self.timestamps, dtype=np.int64),
            np.array(self.points, dtype=np.float64).reshape(-1, 3),
            np.array(self.mask, dtype=np.int8),
        )

    def pixel_tracks(self) -> tuple[np.ndarray, np.ndarray]:
        return (
            np.array(self.left_px, dtype=np.float64).reshape(-1, 2),
            np.array(self.right_px, dtype=np.float64).reshape(-1, 2),
        )


def refresh_rois(state: TrackerState, rig: StereoRig, t_next: int) -> TrackerState:
    """Recenter both ROIs on the reprojected prediction for ``t_next``."""
    state.frames_since_roi_update = 0
    if state.current_fit is None:
        return state
    try:
        pred = predict_position(state.current_fit, t_next)
    except ExtrapolationTooFar as exc:
        log.debug("ROI refresh skipped: %s", exc)
        return state
    for attr, cam in (("roi_left", rig.left), ("roi_right", rig.right)):
        roi = getattr(state, attr)
        try:
            q = project(pred, cam)
        except BehindCamera:
            log.debug("ROI refresh for %s skipped: prediction behind camera", attr)
            continue
        moved = RoI(q, roi.width, roi.height).clamped(cam.image_width, cam.image_height)
        setattr(state, attr, moved)
    return state


_NAN2 = (math.nan, math.nan)
_NAN3 = (math.nan, math.nan, math.nan)


def step(
    state: TrackerState,
    dL: Detection2D,
    dR: Detection2D,
    rig: StereoRig,
    config: TrackerConfig,
    constrained: bool = True,
) -> tuple[TrackerState, StepOutcome]:
    """Advance the tracker by one frame.

    ``constrained=False`` turns off the epsilon gates, fitting, and ROI
    feedback (strategies A and B). The state is updated in place and returned.
    """
    if dL.timestamp_ns != dR.timestamp_ns or dL.frame_index != dR.frame_index:
        raise AlignmentError(
            f"left frame {dL.frame_index}@{dL.timestamp_ns} vs right frame {dR.frame_index}@{dR.timestamp_ns}"
        )
    t = dL.timestamp_ns
    if state.last_timestamp is not None and t <= state.last_timestamp:
        raise AlignmentError(f"timestamp {t} does not advance past {state.last_timestamp}")

    outcome = StepOutcome.MISSED
    point = None
    if dL.found and dR.found:
        if constrained and not validate_pair(dL, dR, config.epsilon1):
            outcome = StepOutcome.REJECTED_PAIR
        else:
            try:
                point = triangulate((dL.u, dL.v), (dR.u, dR.v), rig)
            except DegenerateRays:
                outcome = StepOutcome.REJECTED_PAIR
            if point is not None:
                predicted = None
                if constrained and state.current_fit is not None:
                    try:
                        predicted = predict_position(state.current_fit, t)
                    except ExtrapolationTooFar:
                        state.current_fit = None
                if plausibility_gate(point, predicted, config.epsilon2):
                    outcome = StepOutcome.ACCEPTED
                else:
                    outcome = StepOutcome.REJECTED_GATE

    state.timestamps.append(t)
    state.outcomes.append(outcome)
    if outcome is StepOutcome.ACCEPTED:
        state.points.append(tuple(point))
        state.mask.append(1)
        state.left_px.append((dL.u, dL.v))
        state.right_px.append((dR.u, dR.v))
        state.consecutive_misses = 0
        if constrained:
            state.window.append((point, t))
            if len(state.window) >= config.fit_min_points:
                try:
                    state.current_fit = fit_axes(state.window, config.fit_degree, config.fit_min_points)
                except SingularFit:
                    state.current_fit = None
    else:
        state.points.append(_NAN3)
        state.mask.append(0)
        state.left_px.append(_NAN2)
        state.right_px.append(_NAN2)
        state.consecutive_misses += 1
        if constrained and state.consecutive_misses >= config.fit_window:
            # lost it: drop the fit and fall back to central ROIs
            state.current_fit = None
            state.window.clear()
            state.roi_left = initial_roi(rig.left, config.roi_size)
            state.roi_right = initial_roi(rig.right, config.roi_size)
            state.frames_since_roi_update = 0

    if constrained:
        state.frames_since_roi_update += 1
        if (
            state.frames_since_roi_update >= config.roi_refresh_interval
            and state.current_fit is not None
            and state.last_timestamp is not None
        ):
            refresh_rois(state, rig, t + (t - state.last_timestamp))
    state.last_timestamp = t
    return state, outcome


class Tracker:
    """Convenience wrapper owning one TrackerState."""

    def __init__(self, rig: StereoRig, config: TrackerConfig = TrackerConfig(), constrained: bool = True):
        self.rig = rig
        self.config = config
        self.constrained = constrained
        self.state = TrackerState.initial(rig, config)

    def step(self, dL: Detection2D, dR: Detection2D) -> StepOutcome:
        _, outcome = step(self.state, dL, dR, self.rig, self.config, self.constrained)
        return outcome


@dataclass
class RunStats:
    frames: int = 0
    accepted: int = 0
    rejected_pair: int = 0
    rejected_gate: int = 0
    missed: int = 0
    step_ns: list[int] = field(default_factory=list, repr=False)
    compensation_ms: float | None = None

    @property
    def mean_step_us(self) -> float:
        return float(np.mean(self.step_ns)) / 1e3 if self.step_ns else 0.0

    @property
    def fps_equivalent(self) -> float:
        mean_ns = float(np.mean(self.step_ns)) if self.step_ns else 0.0
        return 1e9 / mean_ns if mean_ns > 0 else math.inf

    def to_dict(self) -> dict:
        out = {
            "frames": self.frames,
            "accepted": self.accepted,
            "rejected_pair": self.rejected_pair,
            "rejected_gate": self.rejected_gate,
            "missed": self.missed,
            "mean_step_us": self.mean_step_us,
            "fps_equivalent": self.fps_equivalent,
        }
        if self.compensation_ms is not None:
            out["compensation_ms"] = self.compensation_ms
        return out


@dataclass
class RunResult:
    strategy: Strategy
    trajectory: Trajectory3D
    stats: RunStats
    outcomes: list[StepOutcome]
    left_px: np.ndarray
    right_px: np.ndarray
    provenance: list[str] | None = None


def run_strategy(
    streams: tuple[DetectionStream, DetectionStream],
    strategy: Strategy | str,
    rig: StereoRig,
    config: TrackerConfig = TrackerConfig(),
    detector: DetectorModel = DetectorModel(),
    compensation_config=None,
) -> RunResult:
    """Track a pair of streams under one of the four strategies."""
    from .compensation import CompensationConfig, compensate

    strategy = Strategy(strategy)
    left, right = streams
    if len(left) != len(right):
        raise AlignmentError(f"stream lengths differ: {len(left)} left vs {len(right)} right")
    constrained = strategy in (Strategy.C, Strategy.D)
    state = TrackerState.initial(rig, config)
    stats = RunStats()
    full_conf = (
        detector.min_confidence(rig.left.image_width, rig.left.image_height),
        detector.min_confidence(rig.right.image_width, rig.right.image_height),
    )
    perf = time.perf_counter_ns
    counters = {
        StepOutcome.ACCEPTED: "accepted",
        StepOutcome.REJECTED_PAIR: "rejected_pair",
        StepOutcome.REJECTED_GATE: "rejected_gate",
        StepOutcome.MISSED: "missed",
    }
    for i in range(len(left)):
        t_start = perf()
        if strategy is Strategy.A:
            dL = detect(left, i, None, full_conf[0])
            dR = detect(right, i, None, full_conf[1])
        else:
            # B never refreshes, so its ROIs stay at the initial center
            rl, rr = state.roi_left, state.roi_right
            dL = detect(left, i, rl, detector.min_confidence(rl.width, rl.height))
            dR = detect(right, i, rr, detector.min_confidence(rr.width, rr.height))
        _, outcome = step(state, dL, dR, rig, config, constrained)
        stats.step_ns.append(perf() - t_start)
        setattr(stats, counters[outcome], getattr(stats, counters[outcome]) + 1)
    stats.frames = len(left)

    traj = state.trajectory()
    left_px, right_px = state.pixel_tracks()
    result = RunResult(strategy, traj, stats, list(state.outcomes), left_px, right_px)
    if strategy is Strategy.D:
        t0 = perf()
        comp = compensate(traj, left_px, right_px, rig, compensation_config or CompensationConfig())
        stats.compensation_ms = (perf() - t0) / 1e6
        result.trajectory = comp.trajectory
        result.provenance = comp.provenance
    return result
