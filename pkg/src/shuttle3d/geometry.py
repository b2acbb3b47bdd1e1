"""Pinhole cameras, the stereo rig, projection and DLT triangulation.

World frame: origin on the floor under the left camera, z up, y pointing
down-court toward the opponent. Camera frame: x right, y down, z forward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, NamedTuple

import numpy as np

from .errors import BehindCamera, ConfigError, DegenerateRays

DEFAULT_BASELINE_M = 0.8
DEFAULT_HEIGHT_M = 1.8
DEFAULT_WIDTH = 1280
DEFAULT_HEIGHT = 1024
DEFAULT_FOCAL_PX = 1200.0

_MIN_DEPTH = 1e-9
_RANK_TOL = 1e-12
_ORTHO_TOL = 1e-9

# world axes expressed in camera axes for a camera looking along +y, level
LEVEL_ROTATION = np.array(
    [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]], dtype=np.float64
)


class PixelPoint(NamedTuple):
    u: float
    v: float


class WorldPoint(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera; ``rotation``/``translation`` map world to camera."""

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    image_width: int = DEFAULT_WIDTH
    image_height: int = DEFAULT_HEIGHT
    _projection: np.ndarray = field(init=False, repr=False)
    _k_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        rot = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        trans = np.array(self.translation, dtype=np.float64).reshape(3)
        if not (self.fx > 0 and self.fy > 0):
            raise ConfigError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.cx < self.image_width and 0 < self.cy < self.image_height):
            raise ConfigError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.image_width}x{self.image_height} image"
            )
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > _ORTHO_TOL:
            raise ConfigError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > _ORTHO_TOL:
            raise ConfigError("rotation must have determinant +1")
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        # triangulation works in normalized image coordinates for conditioning
        object.__setattr__(self, "_projection", np.hstack([rot, trans.reshape(3, 1)]))
        object.__setattr__(
            self,
            "_k_inv",
            np.array(
                [[1.0 / self.fx, 0.0, -self.cx / self.fx], [0.0, 1.0 / self.fy, -self.cy / self.fy]]
            ),
        )

    @property
    def intrinsics(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def center(self) -> np.ndarray:
        """Optical center in world coordinates."""
        return -self.rotation.T @ self.translation

    def projection_matrix(self) -> np.ndarray:
        """3x4 matrix K [R | t]."""
        return self.intrinsics @ self._projection

    def in_image(self, p: PixelPoint) -> bool:
        return 0.0 <= p[0] < self.image_width and 0.0 <= p[1] < self.image_height

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CameraModel):
            return NotImplemented
        return (
            (self.fx, self.fy, self.cx, self.cy, self.image_width, self.image_height)
            == (other.fx, other.fy, other.cx, other.cy, other.image_width, other.image_height)
            and np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class StereoRig:
    left: CameraModel
    right: CameraModel
    baseline: float

    def __post_init__(self) -> None:
        if not self.baseline > 0:
            raise ConfigError(f"baseline must be positive, got {self.baseline}")
        dist = float(np.linalg.norm(self.left.center - self.right.center))
        if abs(dist - self.baseline) > 1e-9:
            raise ConfigError(
                f"camera centers are {dist:.12g} m apart but baseline is {self.baseline} m"
            )

    def camera(self, camera_id: str) -> CameraModel:
        return self.left if camera_id in ("L", "left") else self.right


def pose_from_center(rotation: np.ndarray, center: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rotation = np.asarray(rotation, dtype=np.float64)
    return rotation, -rotation @ np.asarray(center, dtype=np.float64)


def rectified_rig(
    baseline: float = DEFAULT_BASELINE_M,
    height: float = DEFAULT_HEIGHT_M,
    fx: float = DEFAULT_FOCAL_PX,
    fy: float | None = None,
    cx: float | None = None,
    cy: float | None = None,
    width: int = DEFAULT_WIDTH,
    image_height: int = DEFAULT_HEIGHT,
    rotation: np.ndarray = LEVEL_ROTATION,
) -> StereoRig:
    """Two identical cameras side by side, right camera offset +x by ``baseline``."""
    fy = fx if fy is None else fy
    cx = width / 2.0 if cx is None else cx
    cy = image_height / 2.0 if cy is None else cy
    cams = []
    for x in (0.0, baseline):
        rot, trans = pose_from_center(rotation, [x, 0.0, height])
        cams.append(CameraModel(fx, fy, cx, cy, rot, trans, width, image_height))
    return StereoRig(cams[0], cams[1], baseline)


def default_rig() -> StereoRig:
    return rectified_rig()


def _camera_frame(p: Any, cam: CameraModel) -> np.ndarray:
    return cam.rotation @ np.asarray(p, dtype=np.float64) + cam.translation


def project(p: WorldPoint | np.ndarray, cam: CameraModel) -> PixelPoint:
    """Pinhole projection of a world point to pixels."""
    xc, yc, zc = _camera_frame(p, cam)
    if zc <= _MIN_DEPTH:
        raise BehindCamera(f"camera-frame depth {zc:.6g} m is not in front of the camera")
    return PixelPoint(float(cam.fx * xc / zc + cam.cx), float(cam.fy * yc / zc + cam.cy))


def triangulate(pL: PixelPoint, pR: PixelPoint, rig: StereoRig) -> WorldPoint:
    """Linear (DLT) two-view triangulation."""
    rows = []
    for cam, (u, v) in ((rig.left, pL), (rig.right, pR)):
        if not (math.isfinite(u) and math.isfinite(v)):
            raise DegenerateRays(f"non-finite pixel ({u}, {v})")
        xn = cam._k_inv[0, 0] * u + cam._k_inv[0, 2]
        yn = cam._k_inv[1, 1] * v + cam._k_inv[1, 2]
        proj = cam._projection
        rows.append(xn * proj[2] - proj[0])
        rows.append(yn * proj[2] - proj[1])
    _, s, vt = np.linalg.svd(np.array(rows))
    if s[2] <= _RANK_TOL * s[0]:
        raise DegenerateRays("projection constraints are rank-deficient")
    X = vt[3]
    if abs(X[3]) <= _RANK_TOL * np.linalg.norm(X):
        raise DegenerateRays("rays are parallel; intersection at infinity")
    X = X[:3] / X[3]
    return WorldPoint(float(X[0]), float(X[1]), float(X[2]))


def reprojection_error(p: WorldPoint, pL: PixelPoint, pR: PixelPoint, rig: StereoRig) -> float:
    """Mean pixel distance between ``p``'s projections and the observed pair."""
    qL = project(p, rig.left)
    qR = project(p, rig.right)
    return 0.5 * (math.hypot(qL.u - pL[0], qL.v - pL[1]) + math.hypot(qR.u - pR[0], qR.v - pR[1]))


def _pose_from_mapping(data: Mapping[str, Any], where: str) -> tuple[np.ndarray, np.ndarray]:
    unknown = set(data) - {"rotation", "translation", "center"}
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    rot = np.asarray(data.get("rotation", LEVEL_ROTATION), dtype=np.float64)
    if "translation" in data and "center" in data:
        raise ConfigError(f"{where}: give either translation or center, not both")
    if "center" in data:
        return pose_from_center(rot, data["center"])
    if "translation" not in data:
        raise ConfigError(f"{where}: translation or center required")
    return rot, np.asarray(data["translation"], dtype=np.float64)


_RIG_KEYS = {
    "baseline_m", "height_m", "fx", "fy", "cx", "cy", "width", "height", "left_pose", "right_pose"
}


def rig_from_dict(data: Mapping[str, Any]) -> StereoRig:
    """Build a rig from the JSON rig document; omitted poses default to rectified placement."""
    unknown = set(data) - _RIG_KEYS
    if unknown:
        raise ConfigError(f"rig config: unknown keys {sorted(unknown)}")
    width = int(data.get("width", DEFAULT_WIDTH))
    img_h = int(data.get("height", DEFAULT_HEIGHT))
    fx = float(data.get("fx", DEFAULT_FOCAL_PX))
    fy = float(data.get("fy", fx))
    cx = float(data.get("cx", width / 2.0))
    cy = float(data.get("cy", img_h / 2.0))
    baseline = float(data.get("baseline_m", DEFAULT_BASELINE_M))
    height = float(data.get("height_m", DEFAULT_HEIGHT_M))
    base = rectified_rig(baseline, height, fx, fy, cx, cy, width, img_h)
    cams = []
    for key, default in (("left_pose", base.left), ("right_pose", base.right)):
        if key in data and data[key] is not None:
            rot, trans = _pose_from_mapping(data[key], key)
            cams.append(CameraModel(fx, fy, cx, cy, rot, trans, width, img_h))
        else:
            cams.append(default)
    return StereoRig(cams[0], cams[1], baseline)


def rig_to_dict(rig: StereoRig) -> dict[str, Any]:
    cam = rig.left
    return {
        "baseline_m": rig.baseline,
        "height_m": float(cam.center[2]),
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "width": cam.image_width,
        "height": cam.image_height,
        "left_pose": {
            "rotation": rig.left.rotation.tolist(),
            "translation": rig.left.translation.tolist(),
        },
        "right_pose": {
            "rotation": rig.right.rotation.tolist(),
            "translation": rig.right.translation.tolist(),
        },
    }
