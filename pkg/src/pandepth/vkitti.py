"""Virtual KITTI 2 ingestion: directory indexing and sample loading.

Expected layout per scene and variation::

    SceneXX/<variation>/frames/rgb/Camera_0/rgb_00000.jpg
    SceneXX/<variation>/frames/classSegmentation/Camera_0/classgt_00000.png
    SceneXX/<variation>/frames/instanceSegmentation/Camera_0/instancegt_00000.png
    SceneXX/<variation>/frames/depth/Camera_0/depth_00000.png
    SceneXX/<variation>/intrinsic.txt   (or SceneXX/intrinsic.txt, shared)

intrinsic.txt rows are "frame camera fx fy cx cy"; a header line is skipped.
The four angle variations (15-deg-left/right, 30-deg-left/right) are never
indexed.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path

import cv2
import numpy as np

from . import io as pio
from .datapipe import Sample, derive_seed, resize_sample, sparsify_within_valid, synthesize_panoptic_gt
from .types import CameraIntrinsics, ImageFrame, LabelSchema, vkitti2_palette, vkitti2_schema

log = logging.getLogger(__name__)

KEPT_VARIATIONS = ("clone", "fog", "morning", "overcast", "rain", "sunset")
ANGLE_VARIATIONS = ("15-deg-left", "15-deg-right", "30-deg-left", "30-deg-right")

DEFAULT_SPLITS: dict[str, tuple[str, ...]] = {
    "train": ("Scene01", "Scene06", "Scene20"),
    "val": ("Scene18",),
    "test": ("Scene02",),
}

MODALITY_DIRS = {
    "rgb": ("rgb", "rgb_{:05d}.jpg"),
    "semantic": ("classSegmentation", "classgt_{:05d}.png"),
    "instance": ("instanceSegmentation", "instancegt_{:05d}.png"),
    "depth": ("depth", "depth_{:05d}.png"),
}


class IngestionError(RuntimeError):
    pass


@dataclass(frozen=True)
class FrameDescriptor:
    scene: str
    variation: str
    camera: str
    frame_index: int
    paths: dict
    intrinsics: CameraIntrinsics

    @property
    def key(self) -> tuple:
        return (self.scene, self.variation, self.camera, self.frame_index)


@dataclass
class DatasetIndex:
    splits: dict[str, list[FrameDescriptor]]
    skipped: int = 0

    def __getitem__(self, split: str) -> list[FrameDescriptor]:
        return self.splits[split]

    def unique_frame_count(self) -> int:
        """Distinct (scene, frame, camera) triples, counting variations once."""
        return len({(d.scene, d.camera, d.frame_index) for descs in self.splits.values() for d in descs})


def _read_intrinsics_file(path: Path) -> dict[tuple[int, int], CameraIntrinsics]:
    table = {}
    for line in path.read_text().splitlines():
        parts = line.split()
        if len(parts) < 6:
            continue
        try:
            frame, cam = int(parts[0]), int(parts[1])
            fx, fy, cx, cy = (float(x) for x in parts[2:6])
        except ValueError:
            continue  # header line
        table[(frame, cam)] = CameraIntrinsics(fx, fy, cx, cy)
    return table


def _find_intrinsics(scene_dir: Path, variation: str) -> dict[tuple[int, int], CameraIntrinsics]:
    for candidate in (scene_dir / variation / "intrinsic.txt", scene_dir / "intrinsic.txt"):
        if candidate.is_file():
            table = _read_intrinsics_file(candidate)
            if table:
                return table
    raise IngestionError(f"no usable intrinsic.txt for {scene_dir.name}/{variation}")


def build_index(
    dataset_root: Path | str,
    splits: dict[str, tuple[str, ...]] | None = None,
    cameras: tuple[str, ...] = ("Camera_0",),
) -> DatasetIndex:
    """Index every kept variation of the configured scenes.

    Pure function of the directory tree: two runs over the same tree yield the
    same index. Frames with a missing modality are skipped with a warning.
    """
    root = Path(dataset_root)
    splits = splits or DEFAULT_SPLITS
    out: dict[str, list[FrameDescriptor]] = {name: [] for name in splits}
    skipped = 0

    for split_name, scenes in splits.items():
        for scene in sorted(scenes):
            scene_dir = root / scene
            if not scene_dir.is_dir():
                raise IngestionError(f"scene directory not found: {scene_dir}")
            for variation in KEPT_VARIATIONS:
                var_dir = scene_dir / variation / "frames"
                if not var_dir.is_dir():
                    continue
                intr = _find_intrinsics(scene_dir, variation)
                for camera in cameras:
                    cam_idx = int(camera.rsplit("_", 1)[-1])
                    rgb_dir = var_dir / "rgb" / camera
                    if not rgb_dir.is_dir():
                        continue
                    for rgb_path in sorted(rgb_dir.glob("rgb_*.jpg")):
                        m = re.fullmatch(r"rgb_(\d+)\.jpg", rgb_path.name)
                        if m is None:
                            continue
                        frame = int(m.group(1))
                        paths = {"rgb": rgb_path}
                        missing = []
                        for key, (sub, pattern) in MODALITY_DIRS.items():
                            if key == "rgb":
                                continue
                            p = var_dir / sub / camera / pattern.format(frame)
                            if p.is_file():
                                paths[key] = p
                            else:
                                missing.append(key)
                        if (frame, cam_idx) not in intr:
                            missing.append("intrinsics")
                        if missing:
                            skipped += 1
                            log.warning(
                                "skipping %s/%s/%s frame %d: missing %s",
                                scene, variation, camera, frame, ",".join(missing),
                            )
                            continue
                        out[split_name].append(
                            FrameDescriptor(scene, variation, camera, frame, paths, intr[(frame, cam_idx)])
                        )
    return DatasetIndex(splits=out, skipped=skipped)


def decode_class_png(path: Path | str, schema: LabelSchema | None = None) -> np.ndarray:
    """Map a color-coded class PNG to class ids; unknown colors become void."""
    rgb = (pio.read_rgb(path) * 255.0).round().astype(np.int64)
    packed = rgb[..., 0] * 65536 + rgb[..., 1] * 256 + rgb[..., 2]
    palette = vkitti2_palette()
    out = np.zeros(packed.shape, dtype=np.int32)
    for (r, g, b), cid in palette.items():
        out[packed == (r * 65536 + g * 256 + b)] = cid
    return out


def decode_instance_png(path: Path | str) -> np.ndarray:
    """Read instance ids: single-channel values directly, or colors mapped to 1..K."""
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise pio.FileFormatError(f"cannot read instance PNG: {path}")
    if raw.ndim == 2:
        return raw.astype(np.int32)
    packed = raw[..., 0].astype(np.int64) * 65536 + raw[..., 1].astype(np.int64) * 256 + raw[..., 2]
    ids = np.zeros(packed.shape, dtype=np.int32)
    colors = np.unique(packed[packed != 0])
    for new_id, color in enumerate(sorted(colors.tolist()), start=1):
        ids[packed == color] = new_id
    return ids


def load_sample(
    desc: FrameDescriptor,
    schema: LabelSchema | None = None,
    input_sparsity: float = 0.05,
    gt_sparsity: float = 0.20,
    seed: int = 0,
    target_size: tuple[int, int] | None = (200, 1000),
    depth_max: float = 655.35,
) -> Sample:
    """Load one frame, synthesize panoptic GT and draw the two sparsity masks.

    The sparsity masks are derived from (seed, frame identity) only, so the
    result is independent of loader worker count and call order.
    """
    schema = schema or vkitti2_schema()
    frame = ImageFrame(pio.read_rgb(desc.paths["rgb"]))
    semantic = decode_class_png(desc.paths["semantic"], schema)
    instance = decode_instance_png(desc.paths["instance"])
    dense = pio.read_depth_png(desc.paths["depth"], depth_max=depth_max)
    if dense.num_valid == 0:
        raise IngestionError(f"depth map has no valid pixels: {desc.paths['depth']}")
    panoptic = synthesize_panoptic_gt(semantic, instance, schema)

    sample = Sample(
        frame=frame,
        input_depth=dense,
        gt_depth=dense,
        semantic_gt=semantic,
        instance_gt=instance,
        panoptic_gt=panoptic,
        intrinsics=desc.intrinsics,
        scene_id=desc.scene,
        variation_id=desc.variation,
        frame_index=desc.frame_index,
        camera=desc.camera,
    )
    if target_size is not None:
        sample = resize_sample(sample, *target_size)

    seed_in = derive_seed(seed, desc.scene, desc.variation, desc.camera, desc.frame_index, 0)
    seed_gt = derive_seed(seed, desc.scene, desc.variation, desc.camera, desc.frame_index, 1)
    from dataclasses import replace

    return replace(
        sample,
        input_depth=sparsify_within_valid(sample.input_depth, input_sparsity, seed_in),
        gt_depth=sparsify_within_valid(sample.gt_depth, gt_sparsity, seed_gt),
    )
