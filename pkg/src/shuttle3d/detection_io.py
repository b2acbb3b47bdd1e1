"""Per-camera detection streams, ROI-limited lookup, and the CSV file formats.

Detection CSV (one file per camera)::

    frame,timestamp_ns,camera,u,v,confidence,found

Trajectory CSV::

    frame,timestamp_ns,x_m,y_m,z_m,mask[,provenance]

Misses are explicit rows with empty ``u,v,confidence`` (detections) or
empty coordinates (trajectories).
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    ConfigError,
    FrameOutOfRange,
    NonMonotoneTimestamp,
    ParseError,
    SchemaError,
)
from .geometry import PixelPoint
from .trajectory import Trajectory3D

DETECTION_COLUMNS = ("frame", "timestamp_ns", "camera", "u", "v", "confidence", "found")
TRAJECTORY_COLUMNS = ("frame", "timestamp_ns", "x_m", "y_m", "z_m", "mask")
PROVENANCE_COLUMN = "provenance"


@dataclass(frozen=True, slots=True)
class Detection2D:
    frame_index: int
    timestamp_ns: int
    u: float | None
    v: float | None
    confidence: float | None
    found: bool

    @classmethod
    def miss(cls, frame_index: int, timestamp_ns: int) -> Detection2D:
        return cls(frame_index, timestamp_ns, None, None, None, False)

    @property
    def point(self) -> PixelPoint | None:
        if not self.found:
            return None
        return PixelPoint(self.u, self.v)

    def as_miss(self) -> Detection2D:
        return self if not self.found else Detection2D.miss(self.frame_index, self.timestamp_ns)


@dataclass(frozen=True)
class DetectionStream:
    camera_id: str  # "L" or "R"
    detections: tuple[Detection2D, ...]

    def __post_init__(self) -> None:
        if self.camera_id not in ("L", "R"):
            raise ValueError(f"camera_id must be 'L' or 'R', got {self.camera_id!r}")
        object.__setattr__(self, "detections", tuple(self.detections))
        prev = None
        for i, d in enumerate(self.detections):
            if d.frame_index != i:
                raise ValueError(f"frame indices must run 0..n-1; row {i} has frame {d.frame_index}")
            if prev is not None and d.timestamp_ns <= prev:
                raise NonMonotoneTimestamp(
                    f"timestamp {d.timestamp_ns} does not increase past {prev}", line=i + 2
                )
            prev = d.timestamp_ns

    def __len__(self) -> int:
        return len(self.detections)

    def __getitem__(self, i: int) -> Detection2D:
        return self.detections[i]

    def __iter__(self) -> Iterator[Detection2D]:
        return iter(self.detections)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([d.timestamp_ns for d in self.detections], dtype=np.int64)

    def pixels(self) -> tuple[np.ndarray, np.ndarray]:
        """(n, 2) pixel array with NaN for misses, and the found flags."""
        px = np.full((len(self), 2), np.nan)
        found = np.zeros(len(self), dtype=bool)
        for i, d in enumerate(self.detections):
            if d.found:
                px[i] = (d.u, d.v)
                found[i] = True
        return px, found


@dataclass(frozen=True)
class RoI:
    center: PixelPoint
    width: float = 640.0
    height: float = 640.0

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError("ROI width and height must be positive")

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(u_min, v_min, u_max, v_max)."""
        hw, hh = self.width / 2.0, self.height / 2.0
        return (self.center[0] - hw, self.center[1] - hh, self.center[0] + hw, self.center[1] + hh)

    def contains(self, u: float, v: float) -> bool:
        u0, v0, u1, v1 = self.bounds
        return u0 <= u <= u1 and v0 <= v <= v1

    def clamped(self, image_width: float, image_height: float) -> RoI:
        """Shrink to the image if larger, then slide inside it."""
        w = min(self.width, image_width)
        h = min(self.height, image_height)
        cu = min(max(self.center[0], w / 2.0), image_width - w / 2.0)
        cv = min(max(self.center[1], h / 2.0), image_height - h / 2.0)
        return RoI(PixelPoint(float(cu), float(cv)), w, h)


@dataclass(frozen=True)
class DetectorModel:
    """How the crop size affects what the detector reports.

    The network sees a fixed ``network_input``-pixel square; a larger crop is
    downscaled by ``network_input / extent`` and its scores shrink by the same
    factor. Detections scoring below ``score_threshold`` after scaling are
    dropped. The default threshold of 0 disables the effect.
    """

    network_input: float = 640.0
    score_threshold: float = 0.0

    def __post_init__(self) -> None:
        if not self.network_input > 0:
            raise ConfigError("network_input must be positive")
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ConfigError("score_threshold must lie in [0, 1]")

    def min_confidence(self, crop_width: float, crop_height: float) -> float:
        if self.score_threshold == 0.0:
            return 0.0
        scale = min(1.0, self.network_input / max(crop_width, crop_height))
        return self.score_threshold / scale


REFERENCE_DETECTOR = DetectorModel(network_input=640.0, score_threshold=0.35)


def detect(
    stream: DetectionStream, frame_index: int, roi: RoI | None = None, min_confidence: float = 0.0
) -> Detection2D:
    """The stream's entry for a frame as seen through a crop.

    ``roi=None`` means the full frame. A detection outside the ROI, or
    scoring under ``min_confidence``, comes back as a miss.
    """
    if not 0 <= frame_index < len(stream.detections):
        raise FrameOutOfRange(f"frame {frame_index} outside stream of {len(stream.detections)} frames")
    d = stream.detections[frame_index]
    if not d.found:
        return d
    if roi is not None and not roi.contains(d.u, d.v):
        return d.as_miss()
    if min_confidence > 0.0 and (d.confidence is None or d.confidence < min_confidence):
        return d.as_miss()
    return d


# --- CSV ------------------------------------------------------------------

def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def _parse_float(text: str, name: str, line: int, path: str | None) -> float:
    try:
        val = float(text)
    except ValueError:
        raise ParseError(f"column {name!r}: cannot parse {text!r} as a number", line, path) from None
    if not math.isfinite(val):
        raise ParseError(f"column {name!r}: non-finite value {text!r}", line, path)
    return val


def _parse_int(text: str, name: str, line: int, path: str | None) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"column {name!r}: cannot parse {text!r} as an integer", line, path) from None


def _read_rows(path: str | os.PathLike, required: Sequence[str]) -> Iterator[tuple[int, dict[str, str]]]:
    spath = os.fspath(path)
    try:
        fh = open(spath, newline="")
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file: {spath}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError("empty file, expected a header line", 1, spath)
        header = [h.strip() for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"missing columns {missing}", 1, spath)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line, spath)
            yield line, dict(zip(header, (c.strip() for c in row)))


def write_detections(stream: DetectionStream, path: str | os.PathLike) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DETECTION_COLUMNS)
    for d in stream.detections:
        if d.found:
            w.writerow((d.frame_index, d.timestamp_ns, stream.camera_id, _fmt(d.u), _fmt(d.v), _fmt(d.confidence), 1))
        else:
            w.writerow((d.frame_index, d.timestamp_ns, stream.camera_id, "", "", "", 0))
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_detections(path: str | os.PathLike) -> DetectionStream:
    spath = os.fspath(path)
    dets: list[Detection2D] = []
    camera = None
    prev_ts = None
    for line, row in _read_rows(spath, DETECTION_COLUMNS):
        frame = _parse_int(row["frame"], "frame", line, spath)
        ts = _parse_int(row["timestamp_ns"], "timestamp_ns", line, spath)
        cam = row["camera"]
        if cam not in ("L", "R"):
            raise ParseError(f"camera must be L or R, got {cam!r}", line, spath)
        if camera is None:
            camera = cam
        elif cam != camera:
            raise ParseError(f"mixed cameras in one stream ({camera} then {cam})", line, spath)
        if frame != len(dets):
            raise ParseError(f"expected frame {len(dets)}, got {frame}", line, spath)
        if prev_ts is not None and ts <= prev_ts:
            raise NonMonotoneTimestamp(f"timestamp {ts} does not increase past {prev_ts}", line, spath)
        prev_ts = ts
        found = row["found"]
        if found not in ("0", "1"):
            raise ParseError(f"found must be 0 or 1, got {found!r}", line, spath)
        if found == "1":
            for col in ("u", "v"):
                if row[col] == "":
                    raise ParseError(f"found=1 but column {col!r} is empty", line, spath)
            u = _parse_float(row["u"], "u", line, spath)
            v = _parse_float(row["v"], "v", line, spath)
            conf = _parse_float(row["confidence"], "confidence", line, spath) if row["confidence"] else None
            dets.append(Detection2D(frame, ts, u, v, conf, True))
        else:
            dets.append(Detection2D.miss(frame, ts))
    return DetectionStream(camera or "L", tuple(dets))


def write_trajectory(
    traj: Trajectory3D, path: str | os.PathLike, provenance: Sequence[str] | None = None
) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = TRAJECTORY_COLUMNS + ((PROVENANCE_COLUMN,) if provenance is not None else ())
    w.writerow(cols)
    for i in range(len(traj)):
        m = int(traj.mask[i])
        coords = ["", "", ""] if m == 0 else [_fmt(c) for c in traj.points[i]]
        row = [i, int(traj.timestamps[i]), *coords, m]
        if provenance is not None:
            row.append(provenance[i])
        w.writerow(row)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_trajectory(path: str | os.PathLike) -> tuple[Trajectory3D, list[str] | None]:
    """Returns the trajectory and the provenance column when the file has one."""
    spath = os.fspath(path)
    ts: list[int] = []
    pts: list[tuple[float, float, float]] = []
    mask: list[int] = []
    prov: list[str] = []
    has_prov = None
    for line, row in _read_rows(spath, TRAJECTORY_COLUMNS):
        if has_prov is None:
            has_prov = PROVENANCE_COLUMN in row
        frame = _parse_int(row["frame"], "frame", line, spath)
        if frame != len(ts):
            raise ParseError(f"expected frame {len(ts)}, got {frame}", line, spath)
        t = _parse_int(row["timestamp_ns"], "timestamp_ns", line, spath)
        if ts and t <= ts[-1]:
            raise NonMonotoneTimestamp(f"timestamp {t} does not increase past {ts[-1]}", line, spath)
        m = row["mask"]
        if m not in ("0", "1", "2"):
            raise ParseError(f"mask must be 0, 1 or 2, got {m!r}", line, spath)
        if m == "0":
            pts.append((math.nan, math.nan, math.nan))
        else:
            xyz = []
            for col in ("x_m", "y_m", "z_m"):
                if row[col] == "":
                    raise ParseError(f"mask={m} but column {col!r} is empty", line, spath)
                xyz.append(_parse_float(row[col], col, line, spath))
            pts.append(tuple(xyz))
        ts.append(t)
        mask.append(int(m))
        if has_prov:
            prov.append(row[PROVENANCE_COLUMN])
    traj = Trajectory3D(
        np.array(ts, dtype=np.int64), np.array(pts, dtype=np.float64).reshape(-1, 3), np.array(mask, dtype=np.int8)
    )
    return traj, (prov if has_prov else None)
