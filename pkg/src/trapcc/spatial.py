"""Exact nearest-neighbor search over a point cloud.

The tree computes candidate distances with the same elementwise arithmetic
as the brute-force path ((d * d).sum over the last axis), so query results
are bit-identical to a full scan. Ties on distance resolve to the lowest
original point index.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyCloudError
from .geometry import PointCloud

_LEAF_SIZE = 24


def sq_dists_to(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances from every row of `points` to `q`."""
    d = points - q
    return (d * d).sum(axis=1)


class SpatialIndex:
    """Immutable k-d tree over a point cloud, split on the widest extent."""

    def __init__(self, cloud: PointCloud):
        if cloud.count == 0:
            raise EmptyCloudError("build_index requires a non-empty cloud")
        self._n = cloud.count
        order = np.arange(self._n, dtype=np.intp)
        pts = cloud.points
        # node arrays: internal nodes carry (dim, val, left, right); leaves carry
        # a [start, end) range into the reordered point array with dim == -1.
        self._dims: list[int] = []
        self._vals: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._build(pts, order, 0, self._n)
        self._pts = pts[order].copy()
        self._orig = order
        self._dims_a = np.asarray(self._dims, dtype=np.intp)
        self._vals_a = np.asarray(self._vals, dtype=np.float64)
        self._left_a = np.asarray(self._left, dtype=np.intp)
        self._right_a = np.asarray(self._right, dtype=np.intp)

    def _build(self, pts: np.ndarray, order: np.ndarray, lo: int, hi: int) -> int:
        node = len(self._dims)
        self._dims.append(-1)
        self._vals.append(0.0)
        self._left.append(lo)
        self._right.append(hi)
        if hi - lo <= _LEAF_SIZE:
            return node
        seg = pts[order[lo:hi]]
        dim = int(np.argmax(seg.max(axis=0) - seg.min(axis=0)))
        mid = (hi - lo) // 2
        part = np.argpartition(seg[:, dim], mid)
        order[lo:hi] = order[lo:hi][part]
        split_val = pts[order[lo + mid], dim]
        left = self._build(pts, order, lo, lo + mid)
        right = self._build(pts, order, lo + mid, hi)
        self._dims[node] = dim
        self._vals[node] = float(split_val)
        self._left[node] = left
        self._right[node] = right
        return node

    def __len__(self) -> int:
        return self._n

    def nearest(self, q) -> tuple[int, float]:
        """Index and squared distance of the nearest point to `q`.

        Exact: equals the brute-force argmin with lowest-index tie breaking.
        """
        q = np.asarray(q, dtype=np.float64).reshape(3)
        dims, vals, lefts, rights = self._dims_a, self._vals_a, self._left_a, self._right_a
        pts, orig = self._pts, self._orig
        best_d2 = np.inf
        best_idx = self._n
        stack = [(0, 0.0)]
        while stack:
            node, bound = stack.pop()
            if bound > best_d2:
                continue
            dim = dims[node]
            while dim >= 0:
                diff = q[dim] - vals[node]
                if diff < 0.0:
                    near, far = lefts[node], rights[node]
                else:
                    near, far = rights[node], lefts[node]
                fbound = diff * diff
                if fbound <= best_d2:
                    stack.append((far, fbound))
                node = near
                dim = dims[node]
            lo, hi = lefts[node], rights[node]
            d2 = sq_dists_to(pts[lo:hi], q)
            jmin = int(np.argmin(d2))
            dmin = d2[jmin]
            if dmin < best_d2 or (dmin == best_d2 and best_idx < self._n):
                ties = np.flatnonzero(d2 == dmin)
                cand = int(orig[lo + ties].min()) if ties.size > 1 else int(orig[lo + jmin])
                if dmin < best_d2 or cand < best_idx:
                    best_d2 = dmin
                    best_idx = cand
        return best_idx, float(best_d2)

    def nearest_many(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vector form of :meth:`nearest` over the rows of `queries`."""
        queries = np.asarray(queries, dtype=np.float64)
        n = queries.shape[0]
        idx = np.empty(n, dtype=np.intp)
        d2 = np.empty(n, dtype=np.float64)
        for i in range(n):
            idx[i], d2[i] = self.nearest(queries[i])
        return idx, d2


def build_index(cloud: PointCloud) -> SpatialIndex:
    """Build an immutable spatial index over a non-empty cloud."""
    return SpatialIndex(cloud)
