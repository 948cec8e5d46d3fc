"""Per-scene neighbor selection: the k closest objects within a radius.

Distances are measured between box centers in the ground plane (z
ignored), since a traffic neighborhood is a planar notion and box centers
stay put when clouds get sparse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import OrientedBox, PointCloud

DEFAULT_K = 3
DEFAULT_RADIUS = 20.0


@dataclass(frozen=True)
class SceneObject:
    object_id: int
    cloud: PointCloud
    box: OrientedBox

    def __post_init__(self):
        self.cloud.require_non_empty("SceneObject")


@dataclass(frozen=True)
class NeighborSet:
    target_id: int
    neighbors: tuple[tuple[int, float], ...]  # (object_id, center distance), ascending
    k: int
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "neighbors", tuple(self.neighbors))
        dists = [d for _, d in self.neighbors]
        assert len(self.neighbors) <= self.k
        assert all(d <= self.radius for d in dists)
        assert all(a <= b for a, b in zip(dists, dists[1:]))
        assert all(i != self.target_id for i, _ in self.neighbors)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.neighbors)


def build_scene_graph(objects: list[SceneObject], k: int = DEFAULT_K,
                      radius: float = DEFAULT_RADIUS) -> dict[int, NeighborSet]:
    """Neighbor sets for every object: up to k others within `radius`.

    Ordered by ascending center distance, ties to the lower object id.
    The relation is not symmetric.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    objs = sorted(objects, key=lambda o: o.object_id)
    graph: dict[int, NeighborSet] = {}
    for target in objs:
        tc = target.box.center
        ranked = []
        for other in objs:
            if other.object_id == target.object_id:
                continue
            dx = other.box.center[0] - tc[0]
            dy = other.box.center[1] - tc[1]
            dist = math.sqrt(dx * dx + dy * dy)
            if dist <= radius:
                ranked.append((dist, other.object_id))
        ranked.sort()
        graph[target.object_id] = NeighborSet(
            target_id=target.object_id,
            neighbors=tuple((oid, d) for d, oid in ranked[:k]),
            k=k,
            radius=radius,
        )
    return graph
