"""Stereo 3D shuttlecock trajectory tracking with ROI feedback, gap compensation and smoothness metrics."""

__version__ = "0.1.0"

from .compensation import CompensatedTrajectory, CompensationConfig, compensate
from .detection_io import (
    Detection2D,
    DetectionStream,
    DetectorModel,
    RoI,
    detect,
    read_detections,
    read_trajectory,
    write_detections,
    write_trajectory,
)
from .flight_sim import (
    FlightParams,
    NoiseModel,
    RallyScript,
    Segment,
    render_detections,
    simulate_flight,
)
from .geometry import (
    CameraModel,
    PixelPoint,
    StereoRig,
    WorldPoint,
    default_rig,
    project,
    triangulate,
)
from .metrics import MetricsReport, report
from .tracker import StepOutcome, Strategy, Tracker, TrackerConfig, run_strategy
from .trajectory import Trajectory3D

__all__ = [
    "CameraModel", "CompensatedTrajectory", "CompensationConfig", "Detection2D", "DetectionStream",
    "DetectorModel", "FlightParams", "MetricsReport", "NoiseModel", "PixelPoint", "RallyScript", "RoI",
    "Segment", "StepOutcome", "StereoRig", "Strategy", "Tracker", "TrackerConfig", "Trajectory3D",
    "WorldPoint", "compensate", "default_rig", "detect", "project", "read_detections", "read_trajectory",
    "render_detections", "report", "run_strategy", "simulate_flight", "triangulate", "write_detections",
    "write_trajectory",
]
