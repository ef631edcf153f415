"""File codecs: RGB frames, 16-bit centimeter depth PNGs, panoptic id PNGs.

Depth is stored on disk as 16-bit PNG in centimeters (Virtual KITTI 2
convention) and held in memory in meters. The values 0 and 65535 both decode
to "missing": 0 is our marker for unsampled pixels, 65535 is the dataset's
sky / far-plane marker.
"""

from __future__ import annotations

import json
from pathlib import Path

import cv2
import numpy as np

from .types import (
    INSTANCE_ID_CAPACITY,
    DenseDepthMap,
    PanopticCapacityError,
    PanopticMap,
    SparseDepthMap,
)

DEPTH_INVALID_RAW = 65535
CM_PER_M = 100.0


class FileFormatError(IOError):
    """Raised when a file cannot be read or does not match the expected format."""


def _imread(path: Path | str, flags: int) -> np.ndarray:
    img = cv2.imread(str(path), flags)
    if img is None:
        raise FileFormatError(f"cannot read image: {path}")
    return img


def read_rgb(path: Path | str) -> np.ndarray:
    """Read an RGB image as H x W x 3 float32 in [0, 1]."""
    img = _imread(path, cv2.IMREAD_COLOR)
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


def write_rgb(path: Path | str, pixels: np.ndarray) -> None:
    bgr = cv2.cvtColor((np.clip(pixels, 0.0, 1.0) * 255.0).round().astype(np.uint8), cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), bgr):
        raise FileFormatError(f"cannot write image: {path}")


def read_depth_png(path: Path | str, depth_max: float = 655.35) -> SparseDepthMap:
    """Decode a 16-bit centimeter depth PNG into meters with a validity mask."""
    raw = _imread(path, cv2.IMREAD_UNCHANGED)
    if raw.ndim != 2 or raw.dtype != np.uint16:
        raise FileFormatError(f"expected single-channel 16-bit depth PNG, got {raw.dtype} {raw.shape}: {path}")
    valid = (raw > 0) & (raw < DEPTH_INVALID_RAW)
    depth = np.where(valid, raw.astype(np.float32) / CM_PER_M, 0.0)
    return SparseDepthMap(depth=depth, validity=valid, depth_max=depth_max)


def write_depth_png(path: Path | str, depth_m: np.ndarray, validity: np.ndarray | None = None) -> None:
    """Encode meters to 16-bit centimeters. Invalid pixels are written as 0."""
    cm = np.clip(np.round(np.asarray(depth_m, dtype=np.float64) * CM_PER_M), 1, DEPTH_INVALID_RAW - 1)
    raw = cm.astype(np.uint16)
    if validity is not None:
        raw = np.where(validity, raw, 0).astype(np.uint16)
    if not cv2.imwrite(str(path), raw):
        raise FileFormatError(f"cannot write depth PNG: {path}")


def write_dense_depth_png(path: Path | str, depth: DenseDepthMap) -> None:
    write_depth_png(path, depth.depth)


def write_panoptic_png(path: Path | str, pan: PanopticMap) -> None:
    """Store per-pixel class*1000+instance ids as 16-bit PNG plus a JSON sidecar.

    The sidecar (<name>.segments.json) lists every segment with its id, class,
    instance and pixel area.
    """
    enc = pan.encoded()
    if enc.max(initial=0) > DEPTH_INVALID_RAW:
        raise PanopticCapacityError(
            f"panoptic id {int(enc.max())} does not fit a 16-bit PNG (class id too large)"
        )
    if not cv2.imwrite(str(path), enc.astype(np.uint16)):
        raise FileFormatError(f"cannot write panoptic PNG: {path}")
    segments = [
        {
            "id": seg.class_id * INSTANCE_ID_CAPACITY + seg.instance_id,
            "class_id": seg.class_id,
            "instance_id": seg.instance_id,
            "area": seg.area,
        }
        for seg in pan.segments()
    ]
    sidecar = Path(path).with_suffix(".segments.json")
    sidecar.write_text(json.dumps({"segments": segments}, indent=2) + "\n")


def read_panoptic_png(path: Path | str) -> PanopticMap:
    raw = _imread(path, cv2.IMREAD_UNCHANGED)
    if raw.ndim != 2:
        raise FileFormatError(f"expected single-channel panoptic PNG, got shape {raw.shape}: {path}")
    enc = raw.astype(np.int64)
    return PanopticMap(class_map=enc // INSTANCE_ID_CAPACITY, instance_map=enc % INSTANCE_ID_CAPACITY)
