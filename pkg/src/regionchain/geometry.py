"""Box arithmetic and the aspect-preserving crop-and-pad coordinate transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import FLOAT_DECIMALS, BBox, round_half_up
from .errors import ConstructionError, OutOfBoundsError, UsageError

DEFAULT_TARGET = 336


def iou(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class PadTransform:
    """Isotropic scale into a ``target`` square, short axis centered with padding."""

    scale: float
    pad_x: int
    pad_y: int
    target: int = DEFAULT_TARGET

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise UsageError(f"scale must be > 0, got {self.scale}")
        # Stored at record precision so the transform survives serialization.
        object.__setattr__(self, "scale", round(float(self.scale), FLOAT_DECIMALS))
        if self.scale <= 0:
            raise UsageError("scale rounds to zero")
        if self.pad_x < 0 or self.pad_y < 0:
            raise UsageError("padding must be non-negative")
        if self.target <= 0:
            raise UsageError("target must be positive")

    def to_record(self) -> dict:
        return {"scale": self.scale, "pad_x": self.pad_x, "pad_y": self.pad_y, "target": self.target}

    @classmethod
    def from_record(cls, rec: dict) -> PadTransform:
        return cls(float(rec["scale"]), int(rec["pad_x"]), int(rec["pad_y"]), int(rec["target"]))


def compute_pad_transform(width: int, height: int, target: int = DEFAULT_TARGET) -> PadTransform:
    if width <= 0 or height <= 0 or target <= 0:
        raise UsageError(f"dimensions must be positive, got {width}x{height} -> {target}")
    scale = target / max(width, height)
    scaled_w = round_half_up(width * scale)
    scaled_h = round_half_up(height * scale)
    return PadTransform(
        scale=scale,
        pad_x=(target - scaled_w) // 2,
        pad_y=(target - scaled_h) // 2,
        target=target,
    )


def _clip(v: int, hi: int) -> int:
    return min(max(v, 0), hi)


def map_bbox_to_padded(b: BBox, t: PadTransform) -> BBox:
    """Map an original-frame box into the padded square frame."""
    xs = [_clip(round_half_up(v * t.scale + t.pad_x), t.target) for v in (b.x1, b.x2)]
    ys = [_clip(round_half_up(v * t.scale + t.pad_y), t.target) for v in (b.y1, b.y2)]
    if xs[0] >= xs[1] or ys[0] >= ys[1]:
        raise ConstructionError(f"{b} collapses to zero area under scale {t.scale:.6g}")
    return BBox(xs[0], ys[0], xs[1], ys[1])


def map_bbox_from_padded(b: BBox, t: PadTransform) -> BBox:
    """Inverse of :func:`map_bbox_to_padded`, up to pixel rounding."""
    coords = [
        round_half_up((b.x1 - t.pad_x) / t.scale),
        round_half_up((b.y1 - t.pad_y) / t.scale),
        round_half_up((b.x2 - t.pad_x) / t.scale),
        round_half_up((b.y2 - t.pad_y) / t.scale),
    ]
    coords = [max(c, 0) for c in coords]
    if coords[0] >= coords[2] or coords[1] >= coords[3]:
        raise ConstructionError(f"{b} maps to a degenerate box in the original frame")
    return BBox(*coords)


def crop_spec(b: BBox | Sequence[float], width: int, height: int) -> BBox:
    """Clamp a requested crop to ``[0, width] x [0, height]``.

    ``b`` may be a raw 4-sequence so that model output with negative or
    overflowing coordinates can be clamped before it becomes a ``BBox``.
    """
    if width <= 0 or height <= 0:
        raise UsageError(f"image dimensions must be positive, got {width}x{height}")
    if isinstance(b, BBox):
        x1, y1, x2, y2 = b.as_list()
    else:
        x1, y1, x2, y2 = b
        x1, x2 = sorted((x1, x2))
        y1, y2 = sorted((y1, y2))
    cx1 = round_half_up(min(max(x1, 0), width))
    cy1 = round_half_up(min(max(y1, 0), height))
    cx2 = round_half_up(min(max(x2, 0), width))
    cy2 = round_half_up(min(max(y2, 0), height))
    if cx1 >= cx2 or cy1 >= cy2:
        raise OutOfBoundsError(f"crop {[x1, y1, x2, y2]} lies outside the {width}x{height} image")
    return BBox(cx1, cy1, cx2, cy2)
