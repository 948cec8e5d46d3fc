"""Pseudo-ground-truth curation from tracked partial scans.

Vehicles seen across consecutive frames are canonicalized into their
per-frame box frames and merged. Merged clouds that are dense enough and
evenly distributed become whole-vehicle references; their front/back
halves populate the partial reference pool. Retrieval matches a training
input to the closest reference by size and shape.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyPoolError, ManifestError, NoObservationsError
from .geometry import Frame, OrientedBox, PointCloud, to_object_frame
from .io import POOL_MANIFEST_VERSION, read_json, read_xyzf32, write_json, write_xyzf32
from .metrics import View, chamfer_arrays, mcd_arrays, project_2d

MIN_WHOLE_POINTS = 1024
DEFAULT_COMPLETENESS_THRESHOLD = 0.10
DEFAULT_SIZE_TOL = 0.15
DEFAULT_SPARSE_CUTOFF = 256

_VIEWS = (View.SIDE, View.FRONT, View.BIRDS_EYE)


class GtKind(enum.Enum):
    WHOLE = "whole"
    FRONT_PARTIAL = "front"
    BACK_PARTIAL = "back"


@dataclass(frozen=True)
class Observation:
    frame_index: int
    cloud: PointCloud
    box: OrientedBox


@dataclass(frozen=True)
class TrackedInstance:
    """One physical vehicle with per-frame cloud/box observations."""

    track_id: int
    observations: tuple[Observation, ...]

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        frames = [o.frame_index for o in self.observations]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"track {self.track_id}: frame indices must strictly increase")


@dataclass(frozen=True)
class GtEntry:
    source_track_id: int
    cloud: PointCloud
    size: tuple[float, float, float]
    kind: GtKind


@dataclass(frozen=True)
class CompletenessResult:
    passed: bool
    fractions: np.ndarray  # (3, 4): views x quadrants

    def __iter__(self):
        return iter((self.passed, self.fractions))


@dataclass
class GtPool:
    whole: list[GtEntry]
    partial: list[GtEntry]
    completeness_threshold: float
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0.0 < self.completeness_threshold <= 0.25):
            raise ValueError("completeness_threshold must lie in (0, 0.25]")

    def partials_for(self, track_id: int) -> tuple[GtEntry, GtEntry]:
        front = back = None
        for e in self.partial:
            if e.source_track_id == track_id:
                if e.kind is GtKind.FRONT_PARTIAL:
                    front = e
                elif e.kind is GtKind.BACK_PARTIAL:
                    back = e
        if front is None or back is None:
            raise ManifestError(f"pool has no partial entries for track {track_id}")
        return front, back


def aggregate_instance(inst: TrackedInstance) -> PointCloud:
    """Merge all observations into the object frame of their own boxes."""
    if not inst.observations:
        raise NoObservationsError(f"track {inst.track_id} has no observations")
    parts = [to_object_frame(o.cloud, o.box).points for o in inst.observations]
    return PointCloud(np.concatenate(parts, axis=0), Frame.OBJECT)


def completeness_check(cloud: PointCloud,
                       threshold: float = DEFAULT_COMPLETENESS_THRESHOLD) -> CompletenessResult:
    """Quadrant point-fraction test over the three canonical views.

    Quadrants are taken about the object-frame origin (the box center), so
    a cloud missing its front or back half fails outright. Passing requires
    the smallest quadrant fraction to reach `threshold` in every view.
    """
    cloud.require_non_empty("completeness_check")
    cloud.require_frame(Frame.OBJECT, "completeness_check")
    n = cloud.count
    fractions = np.empty((3, 4), dtype=np.float64)
    for vi, view in enumerate(_VIEWS):
        uv = project_2d(cloud, view)
        pos_u = uv[:, 0] >= 0.0
        pos_v = uv[:, 1] >= 0.0
        fractions[vi, 0] = np.count_nonzero(pos_u & pos_v) / n
        fractions[vi, 1] = np.count_nonzero(~pos_u & pos_v) / n
        fractions[vi, 2] = np.count_nonzero(~pos_u & ~pos_v) / n
        fractions[vi, 3] = np.count_nonzero(pos_u & ~pos_v) / n
    passed = bool(fractions.min() >= threshold)
    return CompletenessResult(passed, fractions)


def split_front_back(cloud: PointCloud) -> tuple[PointCloud, PointCloud]:
    """Partition an object-frame cloud at the x = 0 plane (x >= 0 is front)."""
    cloud.require_frame(Frame.OBJECT, "split_front_back")
    mask = cloud.points[:, 0] >= 0.0
    return cloud.with_points(cloud.points[mask]), cloud.with_points(cloud.points[~mask])


def _instance_size(inst: TrackedInstance) -> tuple[float, float, float]:
    dims = np.array([[o.box.length, o.box.width, o.box.height] for o in inst.observations])
    med = np.median(dims, axis=0)
    return (float(med[0]), float(med[1]), float(med[2]))


def build_pool(instances: list[TrackedInstance],
               threshold: float = DEFAULT_COMPLETENESS_THRESHOLD) -> GtPool:
    """Curate whole and partial reference entries from tracked instances.

    Deterministic: instances are processed in track-id order. Candidates
    need at least MIN_WHOLE_POINTS merged points and a passing
    completeness check.
    """
    whole: list[GtEntry] = []
    partial: list[GtEntry] = []
    stats = {"instances": len(instances), "too_sparse": 0, "uneven": 0, "accepted": 0}
    for inst in sorted(instances, key=lambda t: t.track_id):
        merged = aggregate_instance(inst)
        if merged.count < MIN_WHOLE_POINTS:
            stats["too_sparse"] += 1
            continue
        if not completeness_check(merged, threshold).passed:
            stats["uneven"] += 1
            continue
        size = _instance_size(inst)
        whole.append(GtEntry(inst.track_id, merged, size, GtKind.WHOLE))
        front, back = split_front_back(merged)
        partial.append(GtEntry(inst.track_id, front, size, GtKind.FRONT_PARTIAL))
        partial.append(GtEntry(inst.track_id, back, size, GtKind.BACK_PARTIAL))
        stats["accepted"] += 1
    stats["warnings"] = 1 if not whole else 0
    return GtPool(whole, partial, threshold, stats)


@dataclass(frozen=True)
class RetrievedGt:
    whole: GtEntry
    front: GtEntry
    back: GtEntry


def retrieve_gt(input_cloud: PointCloud, input_size: tuple[float, float, float],
                pool: GtPool, size_tol: float = DEFAULT_SIZE_TOL,
                sparse_cutoff: int = DEFAULT_SPARSE_CUTOFF) -> RetrievedGt:
    """Best whole entry (plus its halves) for a training input.

    Entries within `size_tol` relative size difference on every dimension
    are scored first; if none qualify, all entries are scored. Sparse
    inputs (< sparse_cutoff points) are scored one-sided into the dense
    entry, dense inputs with the full two-sided distance. Ties break to
    the lowest track id.
    """
    input_cloud.require_non_empty("retrieve_gt")
    if not pool.whole:
        raise EmptyPoolError("retrieve_gt requires at least one whole entry")
    candidates = [
        e for e in pool.whole
        if all(abs(i - p) <= size_tol * p for i, p in zip(input_size, e.size))
    ]
    if not candidates:
        candidates = list(pool.whole)
    sparse = input_cloud.count < sparse_cutoff
    best = None
    best_key = None
    for entry in candidates:
        if sparse:
            score = mcd_arrays(input_cloud.points, entry.cloud.points)
        else:
            score = chamfer_arrays(input_cloud.points, entry.cloud.points)
        key = (score, entry.source_track_id)
        if best_key is None or key < best_key:
            best, best_key = entry, key
    front, back = pool.partials_for(best.source_track_id)
    return RetrievedGt(best, front, back)


# --- persistence -----------------------------------------------------------

def save_pool(pool: GtPool, out_dir: str | Path) -> None:
    """Persist as pool.json plus one XYZF32 file per entry."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for entry in [*pool.whole, *pool.partial]:
        name = f"{entry.source_track_id:06d}_{entry.kind.value}.xyzf32"
        write_xyzf32(out / name, entry.cloud)
        rec = {
            "id": f"{entry.source_track_id:06d}_{entry.kind.value}",
            "track_id": entry.source_track_id,
            "kind": entry.kind.value,
            "size": [float(v) for v in entry.size],
            "file": name,
        }
        if entry.kind is GtKind.WHOLE:
            frac = completeness_check(entry.cloud, pool.completeness_threshold).fractions
            rec["completeness_fractions"] = [[float(v) for v in row] for row in frac]
        entries.append(rec)
    write_json(out / "pool.json", {
        "format_version": POOL_MANIFEST_VERSION,
        "completeness_threshold": pool.completeness_threshold,
        "stats": pool.stats,
        "entries": entries,
    })


def load_pool(pool_dir: str | Path) -> GtPool:
    pool_dir = Path(pool_dir)
    manifest_path = pool_dir / "pool.json"
    if not manifest_path.exists():
        raise ManifestError(f"no pool.json under {pool_dir}")
    manifest = read_json(manifest_path)
    if manifest.get("format_version") != POOL_MANIFEST_VERSION:
        raise ManifestError(f"{manifest_path}: unsupported pool manifest version")
    whole: list[GtEntry] = []
    partial: list[GtEntry] = []
    for rec in manifest["entries"]:
        cloud = read_xyzf32(pool_dir / rec["file"], Frame.OBJECT)
        entry = GtEntry(
            source_track_id=int(rec["track_id"]),
            cloud=cloud,
            size=tuple(float(v) for v in rec["size"]),
            kind=GtKind(rec["kind"]),
        )
        (whole if entry.kind is GtKind.WHOLE else partial).append(entry)
    return GtPool(whole, partial, manifest["completeness_threshold"],
                  manifest.get("stats", {}))
