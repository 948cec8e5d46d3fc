"""Self-supervised vehicle point-cloud completion for LiDAR traffic scans."""

from .geometry import Frame, OrientedBox, PointCloud, RigidTransform, SampleMode
from .metrics import EvalReport, View, Wrt, chamfer, contour_diff, evaluate, mcd

__all__ = [
    "Frame",
    "OrientedBox",
    "PointCloud",
    "RigidTransform",
    "SampleMode",
    "EvalReport",
    "View",
    "Wrt",
    "chamfer",
    "contour_diff",
    "evaluate",
    "mcd",
]

__version__ = "0.1.0"
