"""File formats: XYZF32 clouds, checkpoints, scene manifests, CSV reports.

Every writer goes through an atomic temp-file + rename, so an interrupted
run never leaves a truncated file behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointError, ManifestError
from .geometry import Frame, OrientedBox, PointCloud

XYZF32_MAGIC = b"PCXY"
CHECKPOINT_MAGIC = b"TRAPCC01"
CHECKPOINT_VERSION = 1
SCENE_MANIFEST_VERSION = 1
POOL_MANIFEST_VERSION = 1


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


# --- point cloud files -----------------------------------------------------

def write_xyzf32(path: str | Path, cloud: PointCloud) -> None:
    """Little-endian binary cloud: magic "PCXY", u32 count, count*3 f32."""
    buf = bytearray()
    buf += XYZF32_MAGIC
    buf += struct.pack("<I", cloud.count)
    buf += cloud.points.astype("<f4").tobytes()
    atomic_write_bytes(path, bytes(buf))


def read_xyzf32(path: str | Path, frame: Frame = Frame.SENSOR) -> PointCloud:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 8 or data[:4] != XYZF32_MAGIC:
        raise ManifestError(f"{path}: not an XYZF32 file")
    (count,) = struct.unpack("<I", data[4:8])
    expected = 8 + count * 12
    if len(data) != expected:
        raise ManifestError(f"{path}: expected {expected} bytes for {count} points, got {len(data)}")
    pts = np.frombuffer(data, dtype="<f4", offset=8).reshape(count, 3).astype(np.float64)
    return PointCloud(pts, frame)


def write_xyz_text(path: str | Path, cloud: PointCloud) -> None:
    """Plain-text debugging format: one "x y z" line per point."""
    lines = [f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in cloud.points]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_xyz_text(path: str | Path, frame: Frame = Frame.SENSOR) -> PointCloud:
    pts = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                x, y, z = line.split()
                pts.append((float(x), float(y), float(z)))
    return PointCloud(np.asarray(pts, dtype=np.float64).reshape(len(pts), 3), frame)


# --- checkpoints -----------------------------------------------------------

def save_checkpoint(path: str | Path, descriptor: dict, tensors: dict[str, np.ndarray]) -> None:
    """Binary checkpoint: magic, u32 version, length-prefixed JSON descriptor,
    then named f64 tensors sorted by name (u32 name len, name, u32 rank, u32 dims, data)."""
    desc = json.dumps(descriptor, sort_keys=True).encode("utf-8")
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<I", CHECKPOINT_VERSION)
    buf += struct.pack("<I", len(desc))
    buf += desc
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
        nb = name.encode("utf-8")
        buf += struct.pack("<I", len(nb))
        buf += nb
        buf += struct.pack("<I", arr.ndim)
        for d in arr.shape:
            buf += struct.pack("<I", d)
        buf += arr.astype("<f8").tobytes()
    atomic_write_bytes(path, bytes(buf))


def load_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    off = 0

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise CheckpointError(f"{path}: truncated checkpoint")
        out = data[off:off + n]
        off += n
        return out

    if take(8) != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad checkpoint magic")
    (version,) = struct.unpack("<I", take(4))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (desc_len,) = struct.unpack("<I", take(4))
    try:
        descriptor = json.loads(take(desc_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: bad descriptor: {e}") from e
    tensors: dict[str, np.ndarray] = {}
    while off < len(data):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = tuple(struct.unpack("<I", take(4))[0] for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(take(count * 8), dtype="<f8").reshape(shape).astype(np.float64)
        tensors[name] = arr
    return descriptor, tensors


# --- scene manifests -------------------------------------------------------

def write_scene_manifest(scene_dir: str | Path, frames: list[dict], seed: int | None = None,
                         extra: dict | None = None) -> None:
    """Manifest schema: {format_version, seed, frames: [{frame_index,
    objects: [{object_id, box, detection_score, cloud_file}]}]}."""
    manifest = {
        "format_version": SCENE_MANIFEST_VERSION,
        "seed": seed,
        "frames": frames,
    }
    if extra:
        manifest.update(extra)
    write_json(Path(scene_dir) / "manifest.json", manifest)


def load_scene_manifest(scene_dir: str | Path) -> dict:
    path = Path(scene_dir) / "manifest.json"
    if not path.exists():
        raise ManifestError(f"no manifest.json under {scene_dir}")
    manifest = read_json(path)
    if manifest.get("format_version") != SCENE_MANIFEST_VERSION:
        raise ManifestError(f"{path}: unsupported scene manifest version")
    if "frames" not in manifest:
        raise ManifestError(f"{path}: manifest has no frames")
    return manifest


def load_scene_object_cloud(scene_dir: str | Path, obj: dict) -> PointCloud:
    return read_xyzf32(Path(scene_dir) / obj["cloud_file"], Frame.SENSOR)


def scene_object_box(obj: dict) -> OrientedBox:
    box = OrientedBox.from_dict(obj["box"])
    score = obj.get("detection_score")
    if score is not None and box.detection_score is None:
        box = OrientedBox(box.center, box.length, box.width, box.height, box.yaw, score)
    return box


# --- CSV reports -----------------------------------------------------------

def format_csv(header: str, rows: list[str]) -> str:
    return "\n".join([header] + rows) + "\n"


def write_csv(path: str | Path, header: str, rows: list[str]) -> None:
    atomic_write_text(path, format_csv(header, rows))
