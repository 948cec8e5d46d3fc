"""Coordinate frames, oriented boxes, rigid transforms, and point sampling.

All point clouds are (n, 3) float64 arrays wrapped in :class:`PointCloud`
with an explicit frame tag. Boxes are gravity-aligned (yaw-only rotation),
which matches how traffic detection boxes are annotated.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloudError, FrameError


class Frame(enum.Enum):
    SENSOR = "sensor"
    OBJECT = "object"


class SampleMode(enum.Enum):
    RANDOM = "random"
    FARTHEST_POINT = "farthest_point"


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a < 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def as_points(points) -> np.ndarray:
    """Coerce to a read-only (n, 3) float64 array, rejecting non-finite values."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 0:
        pts = pts.reshape(0, 3)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got shape {pts.shape}")
    if pts.size and not np.isfinite(pts).all():
        raise ValueError("points contain NaN or Inf")
    pts = pts.copy()
    pts.setflags(write=False)
    return pts


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points in a named coordinate frame."""

    points: np.ndarray
    frame: Frame = Frame.SENSOR

    def __post_init__(self):
        object.__setattr__(self, "points", as_points(self.points))
        if not isinstance(self.frame, Frame):
            raise TypeError(f"frame must be a Frame, got {self.frame!r}")

    @property
    def count(self) -> int:
        return self.points.shape[0]

    def is_empty(self) -> bool:
        return self.count == 0

    def require_non_empty(self, what: str = "operation") -> None:
        if self.count == 0:
            raise EmptyCloudError(f"{what} requires a non-empty cloud")

    def require_frame(self, frame: Frame, what: str = "operation") -> None:
        if self.frame is not frame:
            raise FrameError(f"{what} requires a {frame.value}-frame cloud, got {self.frame.value}")

    def with_points(self, points) -> "PointCloud":
        """New cloud with the same frame tag and different points."""
        return PointCloud(points, self.frame)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation followed by translation; rotation must be orthonormal with det +1."""

    rotation: np.ndarray
    translation: np.ndarray

    _TOL = 1e-9

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64).copy()
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3).copy()
        if rot.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {rot.shape}")
        if not np.allclose(rot.T @ rot, np.eye(3), atol=self._TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > self._TOL:
            raise ValueError("rotation determinant is not +1")
        rot.setflags(write=False)
        tr.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = math.cos(yaw), math.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls(rot, np.asarray(translation, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rot_inv = self.rotation.T
        return RigidTransform(rot_inv, -(rot_inv @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self applied after other: (self o other)(p) = self(other(p))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )


@dataclass(frozen=True)
class OrientedBox:
    """3D detection box: center, dimensions, heading along the box +x axis."""

    center: np.ndarray
    length: float
    width: float
    height: float
    yaw: float
    detection_score: float | None = None

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3).copy()
        if not np.isfinite(center).all():
            raise ValueError("box center must be finite")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        for name in ("length", "width", "height"):
            v = float(getattr(self, name))
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"box {name} must be positive, got {v}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))
        if self.detection_score is not None:
            s = float(self.detection_score)
            if not (0.0 <= s <= 1.0):
                raise ValueError(f"detection_score must lie in [0, 1], got {s}")
            object.__setattr__(self, "detection_score", s)

    @property
    def size(self) -> tuple[float, float, float]:
        return (self.length, self.width, self.height)

    def object_frame(self) -> RigidTransform:
        """Transform mapping sensor-frame points into this box's object frame."""
        return RigidTransform.from_yaw(-self.yaw).compose(
            RigidTransform(np.eye(3), -self.center)
        )

    def sensor_frame(self) -> RigidTransform:
        """Inverse of :meth:`object_frame`."""
        return RigidTransform.from_yaw(self.yaw, self.center)

    def to_dict(self) -> dict:
        d = {
            "center": [float(v) for v in self.center],
            "length": self.length,
            "width": self.width,
            "height": self.height,
            "yaw": self.yaw,
        }
        if self.detection_score is not None:
            d["detection_score"] = self.detection_score
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OrientedBox":
        return cls(
            center=np.asarray(d["center"], dtype=np.float64),
            length=d["length"],
            width=d["width"],
            height=d["height"],
            yaw=d["yaw"],
            detection_score=d.get("detection_score"),
        )


def to_object_frame(cloud: PointCloud, box: OrientedBox) -> PointCloud:
    """Map a sensor-frame cloud into the box's object frame."""
    cloud.require_non_empty("to_object_frame")
    cloud.require_frame(Frame.SENSOR, "to_object_frame")
    return PointCloud(box.object_frame().apply(cloud.points), Frame.OBJECT)


def from_object_frame(cloud: PointCloud, box: OrientedBox) -> PointCloud:
    """Map an object-frame cloud back into the sensor frame."""
    cloud.require_non_empty("from_object_frame")
    cloud.require_frame(Frame.OBJECT, "from_object_frame")
    return PointCloud(box.sensor_frame().apply(cloud.points), Frame.SENSOR)


def box_membership(points: np.ndarray, box: OrientedBox, margin: float = 0.0) -> np.ndarray:
    """Boolean mask of sensor-frame points inside the box grown by `margin`."""
    local = box.object_frame().apply(points)
    half = np.array([box.length / 2.0, box.width / 2.0, box.height / 2.0]) + margin
    return (np.abs(local) <= half).all(axis=1)


def crop_to_box(cloud: PointCloud, box: OrientedBox, margin: float = 0.0) -> PointCloud:
    """Keep points whose object-frame coordinates fall inside the grown box.

    The result stays in the sensor frame and may be empty.
    """
    cloud.require_frame(Frame.SENSOR, "crop_to_box")
    if cloud.count == 0:
        return cloud
    mask = box_membership(cloud.points, box, margin)
    return cloud.with_points(cloud.points[mask])


def _cycled_indices(count: int, n: int) -> np.ndarray:
    return np.arange(n, dtype=np.intp) % count


def farthest_point_indices(points: np.ndarray, n: int) -> np.ndarray:
    """Greedy farthest-point selection starting from index 0.

    Ties in the farthest-distance step go to the lowest index.
    """
    count = points.shape[0]
    chosen = np.empty(n, dtype=np.intp)
    chosen[0] = 0
    d2 = ((points - points[0]) ** 2).sum(axis=1)
    for i in range(1, n):
        nxt = int(np.argmax(d2))
        chosen[i] = nxt
        nd2 = ((points - points[nxt]) ** 2).sum(axis=1)
        np.minimum(d2, nd2, out=d2)
    return chosen


def sample_fixed(cloud: PointCloud, n: int, mode: SampleMode = SampleMode.RANDOM,
                 seed: int = 0) -> PointCloud:
    """Resample a cloud to exactly `n` points.

    Undersized clouds are padded by cycling indices; otherwise RANDOM draws
    a seeded permutation prefix and FARTHEST_POINT runs greedy selection
    from the lowest-index point. Deterministic for a fixed (cloud, n, mode,
    seed) tuple.
    """
    cloud.require_non_empty("sample_fixed")
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    idx = sample_fixed_indices(cloud.points, n, mode, seed)
    return cloud.with_points(cloud.points[idx])


def sample_fixed_indices(points: np.ndarray, n: int, mode: SampleMode = SampleMode.RANDOM,
                         seed: int = 0) -> np.ndarray:
    """Index form of :func:`sample_fixed`, for callers that track provenance."""
    count = points.shape[0]
    if count == 0:
        raise EmptyCloudError("sample_fixed requires a non-empty cloud")
    if count < n:
        return _cycled_indices(count, n)
    if mode is SampleMode.RANDOM:
        rng = np.random.Generator(np.random.PCG64(seed))
        return rng.permutation(count)[:n].astype(np.intp)
    if mode is SampleMode.FARTHEST_POINT:
        return farthest_point_indices(points, n)
    raise ValueError(f"unknown sample mode {mode!r}")
