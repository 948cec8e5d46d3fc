import numpy as np
import pytest

from trapcc.geometry import Frame, PointCloud


def sample_box_surface(l, w, h, n, seed=0, center=(0.0, 0.0, 0.0)):
    """Points uniform on the surface of an axis-aligned box (test fixture)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    half = np.array([l, w, h]) / 2.0
    areas = np.array([w * h, w * h, l * h, l * h, l * w, l * w], dtype=np.float64)
    faces = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-1.0, 1.0, size=n)
    v = rng.uniform(-1.0, 1.0, size=n)
    pts = np.empty((n, 3))
    for i, f in enumerate(faces):
        axis = f // 2
        sign = 1.0 if f % 2 == 0 else -1.0
        others = [a for a in range(3) if a != axis]
        pts[i, axis] = sign * half[axis]
        pts[i, others[0]] = u[i] * half[others[0]]
        pts[i, others[1]] = v[i] * half[others[1]]
    return pts + np.asarray(center)


@pytest.fixture
def box_surface_cloud():
    def make(l=4.0, w=2.0, h=1.6, n=2048, seed=0, frame=Frame.OBJECT):
        return PointCloud(sample_box_surface(l, w, h, n, seed), frame)
    return make
