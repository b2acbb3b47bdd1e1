"""Synthetic shuttlecock flights and noisy stereo detection rendering.

Flight physics: gravity plus quadratic drag normalized by the terminal
velocity, ``a = g_vec - (g / v_t**2) * |v| * v``, integrated with fixed-step RK4.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from .detection_io import Detection2D, DetectionStream
from .errors import BehindCamera, ConfigError, InvalidScript
from .geometry import StereoRig, project
from .trajectory import Trajectory3D

log = logging.getLogger(__name__)

FRAME_RATE = 160.0


@dataclass(frozen=True)
class FlightParams:
    gravity: float = 9.81
    terminal_velocity: float = 6.8
    timestep: float = 1.0 / FRAME_RATE
    duration: float = 3.0  # per segment, seconds

    def __post_init__(self) -> None:
        if not self.gravity > 0:
            raise ConfigError("gravity must be positive")
        if not self.terminal_velocity > 0:
            raise ConfigError("terminal_velocity must be positive")
        if not self.timestep > 0:
            raise ConfigError("timestep must be positive")
        if not self.duration >= 0:
            raise ConfigError("duration must be non-negative")

    @property
    def drag_coefficient(self) -> float:
        if math.isinf(self.terminal_velocity):
            return 0.0
        return self.gravity / self.terminal_velocity**2


@dataclass(frozen=True)
class Segment:
    """One struck flight. ``position=None`` continues from where the previous segment is."""

    launch_time: float
    launch_position: tuple[float, float, float] | None
    launch_velocity: tuple[float, float, float]


@dataclass(frozen=True)
class RallyScript:
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise InvalidScript("rally script has no segments")
        times = [s.launch_time for s in self.segments]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidScript(f"launch times must be strictly increasing, got {times}")
        if self.segments[0].launch_position is None:
            raise InvalidScript("first segment needs a launch position")
        for s in self.segments:
            if s.launch_position is not None and not s.launch_position[2] > 0:
                raise InvalidScript(f"launch position {s.launch_position} is not above ground")


@dataclass(frozen=True)
class NoiseModel:
    pixel_sigma: float = 0.0
    miss_rate: float = 0.0
    false_positive_rate: float = 0.0
    false_positive_radius: float = 50.0
    rng_seed: int = 0
    # detector score range for true and false detections
    confidence_low: float = 1.0
    confidence_high: float = 1.0
    # when > 0, a true detection's score also scales with the shuttle's
    # apparent size: min(1, fx * shuttle_diameter / depth / score_size_px)
    shuttle_diameter: float = 0.0
    score_size_px: float = 16.0

    def __post_init__(self) -> None:
        for name in ("miss_rate", "false_positive_rate"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {val}")
        if self.pixel_sigma < 0 or self.false_positive_radius < 0:
            raise ConfigError("pixel_sigma and false_positive_radius must be non-negative")
        if not 0.0 <= self.confidence_low <= self.confidence_high <= 1.0:
            raise ConfigError("need 0 <= confidence_low <= confidence_high <= 1")
        if self.shuttle_diameter < 0 or not self.score_size_px > 0:
            raise ConfigError("shuttle_diameter must be >= 0 and score_size_px > 0")


def _accel(v: np.ndarray, g: float, k: float) -> np.ndarray:
    a = -k * math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * v
    a[2] -= g
    return a


def rk4_step(pos: np.ndarray, vel: np.ndarray, dt: float, g: float, k: float) -> tuple[np.ndarray, np.ndarray]:
    a1 = _accel(vel, g, k)
    v2 = vel + 0.5 * dt * a1
    a2 = _accel(v2, g, k)
    v3 = vel + 0.5 * dt * a2
    a3 = _accel(v3, g, k)
    v4 = vel + dt * a3
    a4 = _accel(v4, g, k)
    new_pos = pos + dt / 6.0 * (vel + 2.0 * v2 + 2.0 * v3 + v4)
    new_vel = vel + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return new_pos, new_vel


def simulate_flight(script: RallyScript, params: FlightParams = FlightParams()) -> Trajectory3D:
    """Integrate every segment and sample it on the frame grid.

    Frames between a ground contact and the next launch are emitted with
    mask 0 so the output stays one row per frame.
    """
    dt = params.timestep
    g, k = params.gravity, params.drag_coefficient
    launch_frames = [int(round(s.launch_time / dt)) for s in script.segments]
    if any(b <= a for a, b in zip(launch_frames, launch_frames[1:])):
        raise InvalidScript("launch times collapse onto the same frame at this timestep")
    max_steps = int(math.floor(params.duration / dt + 1e-9))

    frames: list[int] = []
    points: list[np.ndarray] = []
    pos = vel = None
    for idx, seg in enumerate(script.segments):
        start = launch_frames[idx]
        end = launch_frames[idx + 1] if idx + 1 < len(script.segments) else None
        if seg.launch_position is not None:
            pos = np.array(seg.launch_position, dtype=np.float64)
        elif pos is None or not frames or frames[-1] != start:
            raise InvalidScript(f"segment {idx} continues a flight that is not airborne at launch")
        else:
            pos = points.pop()
            frames.pop()
        vel = np.array(seg.launch_velocity, dtype=np.float64)
        frames.append(start)
        points.append(pos.copy())
        for n in range(1, max_steps + 1):
            frame = start + n
            pos, vel = rk4_step(pos, vel, dt, g, k)
            if pos[2] <= 0.0:
                break
            frames.append(frame)
            points.append(pos.copy())
            if end is not None and frame >= end:
                break
        if end is not None and frames[-1] == end and script.segments[idx + 1].launch_position is not None:
            # the next segment brings its own start point
            frames.pop()
            points.pop()

    first = frames[0]
    n_frames = frames[-1] - first + 1
    xyz = np.full((n_frames, 3), np.nan)
    mask = np.zeros(n_frames, dtype=np.int8)
    for f, p in zip(frames, points):
        xyz[f - first] = p
        mask[f - first] = 1
    dt_ns = dt * 1e9
    timestamps = np.array([int(round((first + i) * dt_ns)) for i in range(n_frames)], dtype=np.int64)
    return Trajectory3D(timestamps, xyz, mask)


def render_detections(
    traj: Trajectory3D, rig: StereoRig, noise: NoiseModel = NoiseModel()
) -> tuple[DetectionStream, DetectionStream]:
    """Per-frame left/right detections of a ground-truth trajectory.

    The generator consumes the same number of draws for every frame and
    camera, so a given seed always yields the same streams regardless of
    which frames happen to be visible.
    """
    rng = np.random.default_rng(noise.rng_seed)
    n = len(traj)
    out: dict[str, list[Detection2D]] = {"L": [], "R": []}
    visible = 0
    for i in range(n):
        ts = int(traj.timestamps[i])
        seen = False
        for cam_id in ("L", "R"):
            cam = rig.camera(cam_id)
            # miss, false positive, fp center u/v, fp radius/angle, confidence
            draws = rng.random(7)
            gauss = rng.standard_normal(2)
            pix = None
            conf = noise.confidence_low + (noise.confidence_high - noise.confidence_low) * draws[6]
            if traj.mask[i]:
                try:
                    q = project(traj.points[i], cam)
                except BehindCamera:
                    q = None
                if q is not None and cam.in_image(q):
                    seen = True
                    pix = (q[0] + noise.pixel_sigma * gauss[0], q[1] + noise.pixel_sigma * gauss[1])
                    if noise.shuttle_diameter > 0:
                        depth = float(cam.rotation[2] @ traj.points[i] + cam.translation[2])
                        size_px = cam.fx * noise.shuttle_diameter / depth
                        conf *= min(1.0, size_px / noise.score_size_px)
            if draws[1] < noise.false_positive_rate:
                conf = noise.confidence_low + (noise.confidence_high - noise.confidence_low) * draws[6]
                r = noise.false_positive_radius * math.sqrt(draws[4])
                theta = 2.0 * math.pi * draws[5]
                pix = (
                    draws[2] * cam.image_width + r * math.cos(theta),
                    draws[3] * cam.image_height + r * math.sin(theta),
                )
            if draws[0] < noise.miss_rate:
                pix = None
            if pix is None:
                out[cam_id].append(Detection2D.miss(i, ts))
            else:
                out[cam_id].append(Detection2D(i, ts, float(pix[0]), float(pix[1]), float(conf), True))
        visible += seen
    if 2 * visible < n:
        log.warning("trajectory visible in only %d of %d frames", visible, n)
    return DetectionStream("L", tuple(out["L"])), DetectionStream("R", tuple(out["R"]))


# --- JSON documents -------------------------------------------------------

def _check_keys(data: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _vec3(value: Any, where: str) -> tuple[float, float, float]:
    try:
        x, y, z = (float(c) for c in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected a 3-vector, got {value!r}") from exc
    return (x, y, z)


def script_from_dict(data: Mapping[str, Any]) -> RallyScript:
    _check_keys(data, {"segments", "flight"}, "rally script")
    segs = []
    for i, s in enumerate(data.get("segments") or []):
        _check_keys(s, {"launch_time", "launch_position", "launch_velocity"}, f"segment {i}")
        pos = s.get("launch_position")
        segs.append(
            Segment(
                float(s["launch_time"]),
                None if pos is None else _vec3(pos, f"segment {i} launch_position"),
                _vec3(s["launch_velocity"], f"segment {i} launch_velocity"),
            )
        )
    return RallyScript(tuple(segs))


def script_to_dict(script: RallyScript) -> dict[str, Any]:
    return {
        "segments": [
            {
                "launch_time": s.launch_time,
                "launch_position": None if s.launch_position is None else list(s.launch_position),
                "launch_velocity": list(s.launch_velocity),
            }
            for s in script.segments
        ]
    }


def flight_params_from_dict(data: Mapping[str, Any] | None) -> FlightParams:
    data = data or {}
    _check_keys(data, {"gravity", "terminal_velocity", "timestep", "duration"}, "flight params")
    return FlightParams(**{k: float(v) for k, v in data.items()})


def noise_from_dict(data: Mapping[str, Any] | None) -> NoiseModel:
    data = dict(data or {})
    _check_keys(
        data,
        {
            "pixel_sigma", "miss_rate", "false_positive_rate", "false_positive_radius",
            "rng_seed", "confidence_low", "confidence_high", "shuttle_diameter", "score_size_px",
        },
        "noise model",
    )
    if "rng_seed" in data:
        data["rng_seed"] = int(data["rng_seed"])
    return NoiseModel(**data)


# --- reference fixtures ---------------------------------------------------

def serve_script(
    start: Sequence[float] = (0.4, 10.5, 1.6),
    drop_speed: float = 0.0,
    toss_time: float = 0.25,
    hit_velocity: Sequence[float] = (0.0, -9.0, 7.0),
) -> RallyScript:
    """Dropped shuttle struck upward: descent, a high arc, and a second descent."""
    return RallyScript(
        (
            Segment(0.0, tuple(start), (0.0, 0.0, -drop_speed)),
            Segment(toss_time, None, tuple(hit_velocity)),
        )
    )


def reference_rallies() -> list[RallyScript]:
    """Twelve rallies flying toward the rig, all starting near the image center.

    Serves, cross-court clears, and flat drives with enough lateral and
    vertical travel that the shuttle leaves a fixed central crop.
    """
    # (kind, lateral velocity m/s, forward speed m/s, upward speed m/s)
    table = [
        ("serve", -1.5, 9.5, 7.0),
        ("clear", 2.5, 13.0, 10.5),
        ("drive", -3.0, 12.0, 4.0),
        ("serve", 2.0, 10.0, 7.5),
        ("clear", -2.5, 13.5, 11.0),
        ("drive", 3.5, 11.0, 5.0),
        ("serve", 0.5, 9.0, 8.0),
        ("clear", -3.5, 14.0, 10.0),
        ("drive", 2.5, 12.5, 3.5),
        ("serve", -2.5, 10.5, 6.5),
        ("clear", 3.0, 12.5, 11.5),
        ("drive", -2.0, 13.0, 4.5),
    ]
    rallies = []
    for i, (kind, vx, vy, vz) in enumerate(table):
        x0 = 0.4 + 0.1 * ((i % 3) - 1)
        if kind == "serve":
            rallies.append(
                serve_script(start=(x0, 10.5, 1.6), toss_time=0.2 + 0.025 * (i % 3), hit_velocity=(vx, -vy, vz))
            )
        elif kind == "clear":
            rallies.append(RallyScript((Segment(0.0, (x0, 11.0, 1.9), (vx, -vy, vz)),)))
        else:
            rallies.append(RallyScript((Segment(0.0, (x0, 10.0, 1.8), (vx, -vy, vz)),)))
    return rallies


REFERENCE_NOISE = NoiseModel(
    pixel_sigma=1.0,
    miss_rate=0.10,
    false_positive_rate=0.05,
    false_positive_radius=50.0,
    rng_seed=42,
    confidence_low=0.6,
    confidence_high=1.0,
    shuttle_diameter=0.068,
    score_size_px=12.0,
)
