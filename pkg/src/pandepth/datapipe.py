"""Sample assembly: panoptic ground-truth synthesis, depth sparsification, resizing."""

from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, replace

import numpy as np
import torch

from .types import (
    VOID_ID,
    CameraIntrinsics,
    DenseDepthMap,
    ImageFrame,
    LabelSchema,
    PanopticMap,
    SparseDepthMap,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sample:
    """One aligned frame with all modalities and ground truth."""

    frame: ImageFrame
    input_depth: SparseDepthMap
    gt_depth: SparseDepthMap
    semantic_gt: np.ndarray  # H x W class ids
    instance_gt: np.ndarray  # H x W instance ids (0 = none)
    panoptic_gt: PanopticMap
    intrinsics: CameraIntrinsics
    scene_id: str = ""
    variation_id: str = ""
    frame_index: int = 0
    camera: str = "Camera_0"

    def __post_init__(self):
        shape = (self.frame.height, self.frame.width)
        sem = np.ascontiguousarray(np.asarray(self.semantic_gt, dtype=np.int32))
        inst = np.ascontiguousarray(np.asarray(self.instance_gt, dtype=np.int32))
        sem.flags.writeable = False
        inst.flags.writeable = False
        object.__setattr__(self, "semantic_gt", sem)
        object.__setattr__(self, "instance_gt", inst)
        for name in ("input_depth", "gt_depth"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} shape {getattr(self, name).shape} != frame shape {shape}")
        if sem.shape != shape or inst.shape != shape or self.panoptic_gt.shape != shape:
            raise ValueError("all spatial fields must share the frame's H x W")
        # Panoptic class map may only void pixels or copy semantics, never relabel.
        pan_cls = self.panoptic_gt.class_map
        mismatched = (pan_cls != sem) & (pan_cls != VOID_ID)
        if mismatched.any():
            raise ValueError("panoptic class map disagrees with semantic ground truth")

    @property
    def shape(self) -> tuple[int, int]:
        return self.frame.height, self.frame.width


def derive_seed(global_seed: int, *keys: int | str) -> int:
    """Stable per-sample seed so results never depend on worker scheduling."""
    ints = tuple(zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in keys)
    return int(np.random.SeedSequence((int(global_seed),) + ints).generate_state(1)[0])


def synthesize_panoptic_gt(
    semantic_gt: np.ndarray, instance_gt: np.ndarray, schema: LabelSchema
) -> PanopticMap:
    """Combine semantic and instance annotations into one panoptic partition.

    Stuff pixels become (class, 0). Thing pixels get per-frame instance ids
    re-indexed densely from 1. Inconsistent pixels (a thing pixel without an
    instance id, or an instance id on a stuff class) are relabeled void.
    """
    sem = np.asarray(semantic_gt, dtype=np.int32)
    inst = np.asarray(instance_gt, dtype=np.int32)
    if sem.shape != inst.shape:
        raise ValueError(f"semantic {sem.shape} and instance {inst.shape} shapes differ")

    thing = np.isin(sem, schema.thing_ids)
    stuff = np.isin(sem, schema.stuff_ids)
    bad = (thing & (inst == 0)) | (stuff & (inst != 0))

    out_class = np.where(bad, VOID_ID, sem)
    out_class[~(thing | stuff)] = VOID_ID  # unknown ids collapse to void

    out_inst = np.zeros_like(inst)
    keep = thing & (inst != 0) & ~bad
    if keep.any():
        # Dense re-index: unique (class, raw id) pairs sorted lexicographically -> 1..K.
        m = int(inst.max()) + 1
        flat = out_class[keep].astype(np.int64) * m + inst[keep]
        keys = np.unique(flat)
        out_inst[keep] = np.searchsorted(keys, flat) + 1
    return PanopticMap(class_map=out_class, instance_map=out_inst)


def sparsify(dense: DenseDepthMap, fraction: float, seed: int) -> SparseDepthMap:
    """Keep exactly round(fraction * H * W) pixels, uniformly at random.

    Deterministic for a given (dense, fraction, seed).
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    h, w = dense.shape
    n_keep = int(round(fraction * h * w))
    rng = np.random.default_rng(seed)
    flat_idx = rng.choice(h * w, size=n_keep, replace=False)
    mask = np.zeros(h * w, dtype=bool)
    mask[flat_idx] = True
    mask = mask.reshape(h, w)
    return SparseDepthMap(depth=np.where(mask, dense.depth, 0.0), validity=mask)


def sparsify_within_valid(src: SparseDepthMap, fraction: float, seed: int) -> SparseDepthMap:
    """Subsample an already-sparse map, targeting round(fraction * H * W) pixels.

    Used when the source has invalid pixels (e.g. sky in dataset depth maps);
    the kept count is capped at the number of valid source pixels.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    h, w = src.shape
    valid_idx = np.flatnonzero(src.validity.ravel())
    n_keep = min(int(round(fraction * h * w)), valid_idx.size)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(valid_idx, size=n_keep, replace=False)
    mask = np.zeros(h * w, dtype=bool)
    mask[chosen] = True
    mask = mask.reshape(h, w)
    return SparseDepthMap(depth=np.where(mask, src.depth, 0.0), validity=mask, depth_max=src.depth_max)


def _nearest_index(src_len: int, dst_len: int) -> np.ndarray:
    # Pixel-center mapping; guarantees every output value comes from a source pixel.
    centers = (np.arange(dst_len) + 0.5) * (src_len / dst_len)
    return np.clip(np.floor(centers).astype(np.int64), 0, src_len - 1)


def resize_nearest(arr: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    rows = _nearest_index(arr.shape[0], target_h)
    cols = _nearest_index(arr.shape[1], target_w)
    return arr[np.ix_(rows, cols)]


def resize_bilinear(pixels: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    t = torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float32)).permute(2, 0, 1)[None]
    out = torch.nn.functional.interpolate(
        t, size=(target_h, target_w), mode="bilinear", align_corners=False
    )
    return np.clip(out[0].permute(1, 2, 0).numpy(), 0.0, 1.0)


def resize_sample(sample: Sample, target_h: int, target_w: int) -> Sample:
    """Resize all modalities to (target_h, target_w).

    RGB is interpolated bilinearly; labels and depth use nearest-neighbor so no
    values are invented across boundaries. Intrinsics are rescaled per axis.
    """
    h, w = sample.shape
    if (target_h, target_w) == (h, w):
        return sample
    if target_h > 4 * h or target_w > 4 * w:
        log.warning("upscaling %dx%d -> %dx%d exceeds 4x, expect quality loss", h, w, target_h, target_w)

    rows = _nearest_index(h, target_h)
    cols = _nearest_index(w, target_w)
    pick = lambda a: a[np.ix_(rows, cols)]

    sx, sy = target_w / w, target_h / h
    pan = sample.panoptic_gt
    return replace(
        sample,
        frame=ImageFrame(resize_bilinear(sample.frame.pixels, target_h, target_w)),
        input_depth=SparseDepthMap(
            depth=pick(sample.input_depth.depth),
            validity=pick(sample.input_depth.validity),
            depth_max=sample.input_depth.depth_max,
        ),
        gt_depth=SparseDepthMap(
            depth=pick(sample.gt_depth.depth),
            validity=pick(sample.gt_depth.validity),
            depth_max=sample.gt_depth.depth_max,
        ),
        semantic_gt=pick(sample.semantic_gt),
        instance_gt=pick(sample.instance_gt),
        panoptic_gt=PanopticMap(class_map=pick(pan.class_map), instance_map=pick(pan.instance_map)),
        intrinsics=sample.intrinsics.scaled(sx, sy),
    )
