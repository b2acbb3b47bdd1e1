"""Timestamped 3D trajectory with a per-frame validity mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MISSING = 0
DETECTED = 1
COMPENSATED = 2


@dataclass(eq=False)
class Trajectory3D:
    """One row per frame; frame ``i`` is row ``i``.

    ``mask`` is 0 (no point), 1 (detected) or 2 (filled by compensation).
    Rows with mask 0 hold NaN coordinates.
    """

    timestamps: np.ndarray  # int64 nanoseconds
    points: np.ndarray  # (n, 3) meters
    mask: np.ndarray  # int8

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64).reshape(-1)
        self.points = np.array(self.points, dtype=np.float64).reshape(-1, 3)  # owned copy: NaN-blanking below must not touch the caller
        self.mask = np.asarray(self.mask, dtype=np.int8).reshape(-1)
        n = len(self.timestamps)
        if len(self.points) != n or len(self.mask) != n:
            raise ValueError("timestamps, points and mask must have the same length")
        if n > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        if np.any((self.mask < 0) | (self.mask > 2)):
            raise ValueError("mask values must be 0, 1 or 2")
        valid = self.mask > 0
        if not np.all(np.isfinite(self.points[valid])):
            raise ValueError("masked-in rows must carry finite coordinates")
        self.points[~valid] = np.nan

    def __len__(self) -> int:
        return len(self.timestamps)

    @classmethod
    def empty(cls) -> Trajectory3D:
        return cls(np.zeros(0, np.int64), np.zeros((0, 3)), np.zeros(0, np.int8))

    @property
    def valid(self) -> np.ndarray:
        return self.mask > 0

    @property
    def seconds(self) -> np.ndarray:
        """Seconds since the first frame (exact integer offset before scaling)."""
        if not len(self.timestamps):
            return np.zeros(0)
        return (self.timestamps - self.timestamps[0]).astype(np.float64) * 1e-9

    def copy(self) -> Trajectory3D:
        return Trajectory3D(self.timestamps.copy(), self.points.copy(), self.mask.copy())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory3D):
            return NotImplemented
        return (
            np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.points, other.points, equal_nan=True)
        )
