"""Shared domain types: label schema, frames, depth maps, predictions, panoptic maps.

All types are immutable value objects. Array fields are marked read-only after
construction so instances can be shared freely across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np

VOID_ID = 0

# Largest instance id representable by the class*1000+instance panoptic encoding.
INSTANCE_ID_CAPACITY = 1000


class PanopticCapacityError(ValueError):
    """Raised when an instance id does not fit the panoptic id encoding."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ClassDef:
    id: int
    name: str
    kind: Literal["thing", "stuff"]


@dataclass(frozen=True)
class LabelSchema:
    """Ordered class table. Id 0 is reserved for void and never listed."""

    classes: tuple[ClassDef, ...]

    def __post_init__(self):
        ids = [c.id for c in self.classes]
        if any(i < 1 for i in ids):
            raise ValueError(f"class ids must be >= 1 (0 is reserved for void), got {ids}")
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate class ids: {ids}")
        kinds = {c.kind for c in self.classes}
        if kinds - {"thing", "stuff"}:
            raise ValueError(f"unknown class kind in {kinds}")
        if "thing" not in kinds or "stuff" not in kinds:
            raise ValueError("schema needs at least one thing class and one stuff class")

    @staticmethod
    def from_pairs(pairs: Sequence[tuple[int, str, str]]) -> "LabelSchema":
        return LabelSchema(tuple(ClassDef(i, n, k) for i, n, k in pairs))

    @property
    def num_classes(self) -> int:
        """Total channel count including the void channel."""
        return len(self.classes) + 1

    @property
    def thing_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.classes if c.kind == "thing")

    @property
    def stuff_ids(self) -> tuple[int, ...]:
        return tuple(c.id for c in self.classes if c.kind == "stuff")

    def is_thing(self, class_id: int) -> bool:
        return class_id in self._thing_set

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._id_set

    @property
    def _thing_set(self) -> frozenset:
        return frozenset(self.thing_ids)

    @property
    def _id_set(self) -> frozenset:
        return frozenset(c.id for c in self.classes)

    def channel_of(self, class_id: int) -> int:
        """Logit channel index for a class id (channel 0 is void)."""
        return self._channel_map[class_id]

    def id_of_channel(self, channel: int) -> int:
        if channel == 0:
            return VOID_ID
        return self.classes[channel - 1].id

    @property
    def _channel_map(self) -> dict:
        return {VOID_ID: 0, **{c.id: i + 1 for i, c in enumerate(self.classes)}}

    def channel_map_array(self, max_id: int | None = None) -> np.ndarray:
        """Lookup table mapping class id -> channel index, for vectorized use."""
        top = max(c.id for c in self.classes) if max_id is None else max_id
        table = np.zeros(top + 1, dtype=np.int64)
        for i, c in enumerate(self.classes):
            table[c.id] = i + 1
        return table


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def scaled(self, sx: float, sy: float) -> "CameraIntrinsics":
        """Intrinsics after resizing the image by (sx, sy) = (w_new/w, h_new/h)."""
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy)


@dataclass(frozen=True)
class ImageFrame:
    """RGB image, H x W x 3 float values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise ValueError(f"expected HxWx3 pixels, got shape {p.shape}")
        h, w = p.shape[:2]
        if h < 32 or w < 32:
            raise ValueError(f"frame must be at least 32x32, got {h}x{w}")
        p = p.astype(np.float32, copy=False)
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class SparseDepthMap:
    """Depth in meters with an explicit validity mask; 0 marks missing pixels."""

    depth: np.ndarray
    validity: np.ndarray
    depth_max: float = 655.35

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float32)
        v = np.asarray(self.validity, dtype=bool)
        if d.ndim != 2 or d.shape != v.shape:
            raise ValueError(f"depth {d.shape} and validity {v.shape} must be equal 2-d shapes")
        if not np.all((d > 0) == v):
            raise ValueError("validity mask must equal (depth > 0)")
        vals = d[v]
        if vals.size and (not np.all(np.isfinite(vals)) or vals.max() > self.depth_max + 1e-6):
            raise ValueError(f"valid depths must be finite and <= {self.depth_max} m")
        object.__setattr__(self, "depth", _freeze(d))
        object.__setattr__(self, "validity", _freeze(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def num_valid(self) -> int:
        return int(self.validity.sum())


@dataclass(frozen=True)
class DenseDepthMap:
    """Fully populated depth map in meters, every entry finite and positive."""

    depth: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float32)
        if d.ndim != 2:
            raise ValueError(f"expected HxW depth, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or not np.all(d > 0):
            raise ValueError("dense depth must be finite and strictly positive everywhere")
        object.__setattr__(self, "depth", _freeze(d))

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape


@dataclass(frozen=True)
class SemanticLogits:
    """Per-class logits, (num_classes including void) x H x W."""

    logits: np.ndarray

    def __post_init__(self):
        l = np.asarray(self.logits, dtype=np.float32)
        if l.ndim != 3:
            raise ValueError(f"expected CxHxW logits, got shape {l.shape}")
        object.__setattr__(self, "logits", _freeze(l))

    @property
    def num_classes(self) -> int:
        return self.logits.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.logits.shape[1:]

    def probabilities(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=0, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=0, keepdims=True)

    def argmax_channels(self) -> np.ndarray:
        return self.logits.argmax(axis=0)


@dataclass(frozen=True)
class InstancePrediction:
    """One detected thing: box in pixels, class id, confidence, 28x28 mask logits."""

    box: np.ndarray  # (x1, y1, x2, y2)
    class_id: int
    score: float
    mask_logits: np.ndarray  # 28 x 28

    def __post_init__(self):
        b = np.asarray(self.box, dtype=np.float32)
        if b.shape != (4,):
            raise ValueError(f"box must be (x1,y1,x2,y2), got shape {b.shape}")
        if not (b[0] < b[2] and b[1] < b[3]):
            raise ValueError(f"degenerate box {b.tolist()}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")
        m = np.asarray(self.mask_logits, dtype=np.float32)
        if m.shape != (28, 28):
            raise ValueError(f"mask logits must be 28x28, got {m.shape}")
        object.__setattr__(self, "box", _freeze(b))
        object.__setattr__(self, "mask_logits", _freeze(m))


@dataclass(frozen=True)
class Segment:
    class_id: int
    instance_id: int
    area: int


@dataclass(frozen=True)
class PanopticMap:
    """Per-pixel (class id, instance id) partition.

    Instance id is 0 on stuff and void pixels and > 0 only on thing pixels.
    """

    class_map: np.ndarray
    instance_map: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.class_map, dtype=np.int32)
        i = np.asarray(self.instance_map, dtype=np.int32)
        if c.ndim != 2 or c.shape != i.shape:
            raise ValueError(f"class {c.shape} and instance {i.shape} maps must be equal 2-d shapes")
        if c.min(initial=0) < 0 or i.min(initial=0) < 0:
            raise ValueError("ids must be nonnegative")
        if np.any((i > 0) & (c == VOID_ID)):
            raise ValueError("void pixels cannot carry an instance id")
        object.__setattr__(self, "class_map", _freeze(c))
        object.__setattr__(self, "instance_map", _freeze(i))

    @property
    def shape(self) -> tuple[int, int]:
        return self.class_map.shape

    def validate_against(self, schema: LabelSchema) -> None:
        """Check schema-dependent invariants: known ids, instances only on things."""
        ids = np.unique(self.class_map)
        for cid in ids:
            if cid != VOID_ID and int(cid) not in schema:
                raise ValueError(f"unknown class id {int(cid)}")
        inst_classes = np.unique(self.class_map[self.instance_map > 0])
        for cid in inst_classes:
            if not schema.is_thing(int(cid)):
                raise ValueError(f"instance id on non-thing class {int(cid)}")

    def encoded(self) -> np.ndarray:
        """Per-pixel panoptic ids (class*1000 + instance)."""
        if self.instance_map.max(initial=0) >= INSTANCE_ID_CAPACITY:
            raise PanopticCapacityError(
                f"instance id {int(self.instance_map.max())} exceeds capacity {INSTANCE_ID_CAPACITY - 1}"
            )
        return self.class_map.astype(np.int64) * INSTANCE_ID_CAPACITY + self.instance_map

    def segments(self) -> list[Segment]:
        """All non-void segments with their pixel counts."""
        enc = self.class_map.astype(np.int64) * INSTANCE_ID_CAPACITY + self.instance_map
        ids, counts = np.unique(enc, return_counts=True)
        out = []
        for pid, area in zip(ids.tolist(), counts.tolist()):
            c, i = decode_panoptic_id(pid)
            if c == VOID_ID:
                continue
            out.append(Segment(c, i, area))
        return out

    def iter_segment_masks(self) -> Iterator[tuple[Segment, np.ndarray]]:
        enc = self.class_map.astype(np.int64) * INSTANCE_ID_CAPACITY + self.instance_map
        for seg in self.segments():
            yield seg, enc == encode_panoptic_id(seg.class_id, seg.instance_id)


def encode_panoptic_id(class_id: int, instance_id: int) -> int:
    """Pack (class, instance) into a single id; inverse of decode_panoptic_id."""
    if instance_id < 0:
        raise ValueError(f"instance id must be nonnegative, got {instance_id}")
    if instance_id >= INSTANCE_ID_CAPACITY:
        raise PanopticCapacityError(
            f"instance id {instance_id} exceeds capacity {INSTANCE_ID_CAPACITY - 1}"
        )
    return class_id * INSTANCE_ID_CAPACITY + instance_id


def decode_panoptic_id(panoptic_id: int) -> tuple[int, int]:
    class_id, instance_id = divmod(int(panoptic_id), INSTANCE_ID_CAPACITY)
    return class_id, instance_id


# Virtual KITTI 2 palette: ground-truth class PNGs store these RGB colors.
VKITTI2_CLASSES = (
    (1, "terrain", "stuff", (210, 0, 200)),
    (2, "sky", "stuff", (90, 200, 255)),
    (3, "tree", "stuff", (0, 199, 0)),
    (4, "vegetation", "stuff", (90, 240, 0)),
    (5, "building", "stuff", (140, 140, 140)),
    (6, "road", "stuff", (100, 60, 100)),
    (7, "guardrail", "stuff", (250, 100, 255)),
    (8, "trafficsign", "stuff", (255, 255, 0)),
    (9, "trafficlight", "stuff", (200, 200, 0)),
    (10, "pole", "stuff", (255, 130, 0)),
    (11, "misc", "stuff", (80, 80, 80)),
    (12, "truck", "thing", (160, 60, 60)),
    (13, "car", "thing", (255, 127, 80)),
    (14, "van", "thing", (0, 139, 139)),
)


def vkitti2_schema() -> LabelSchema:
    return LabelSchema.from_pairs([(i, n, k) for i, n, k, _ in VKITTI2_CLASSES])


def vkitti2_palette() -> dict[tuple[int, int, int], int]:
    """RGB color -> class id for Virtual KITTI 2 class segmentation PNGs."""
    return {rgb: i for i, _, _, rgb in VKITTI2_CLASSES}
