"""Background substitution: paste masked foreground onto other backgrounds.

Masks come from any external segmenter. They are binarized first; with a
feather radius the binary mask is box-blurred into an alpha matte.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import DimensionMismatch, LengthMismatch
from .tubes import round_half_away


@dataclass(frozen=True)
class AugmentSpec:
    binarize_threshold: int = 128
    feather_radius: int = 0

    def __post_init__(self):
        if not 0 <= self.binarize_threshold <= 255:
            raise ValueError(f"binarize_threshold must be a byte, got {self.binarize_threshold}")
        if self.feather_radius < 0:
            raise ValueError(f"feather_radius must be >= 0, got {self.feather_radius}")


def binarize(mask: np.ndarray, threshold: int = 128) -> np.ndarray:
    return np.where(np.asarray(mask) >= threshold, 255, 0).astype(np.uint8)


def alpha_matte(mask: np.ndarray, spec: AugmentSpec) -> np.ndarray:
    """Binarized mask box-blurred with radius ``feather_radius``, scaled to [0, 1]."""
    hard = binarize(mask, spec.binarize_threshold).astype(np.float64) / 255.0
    if spec.feather_radius == 0:
        return hard
    return uniform_filter(hard, size=2 * spec.feather_radius + 1, mode="nearest")


def composite_frame(fg: np.ndarray, mask: np.ndarray, bg: np.ndarray,
                    spec: AugmentSpec = AugmentSpec()) -> np.ndarray:
    fg, mask, bg = np.asarray(fg), np.asarray(mask), np.asarray(bg)
    if mask.ndim == 3 and mask.shape[2] == 1:
        mask = mask[..., 0]
    if fg.shape != bg.shape or fg.shape[:2] != mask.shape:
        raise DimensionMismatch(
            f"frame {fg.shape}, mask {mask.shape} and background {bg.shape} must share height and width"
        )
    if spec.feather_radius == 0:
        keep = binarize(mask, spec.binarize_threshold) == 255
        return np.where(keep[..., None], fg, bg).astype(np.uint8)
    alpha = alpha_matte(mask, spec)[..., None]
    blended = alpha * fg.astype(np.float64) + (1.0 - alpha) * bg.astype(np.float64)
    return round_half_away(blended)


def augment_clip(frames: Sequence[np.ndarray], masks: Sequence[np.ndarray], background,
                 spec: AugmentSpec = AugmentSpec()) -> list[np.ndarray]:
    """Composite every frame; a background clip shorter than the input loops.

    ``background`` is a single ``(H, W, 3)`` image or a sequence/array of them.
    Labels are untouched: callers reuse the source clip's label vector.
    """
    if len(frames) != len(masks):
        raise LengthMismatch(f"{len(frames)} frames but {len(masks)} masks")
    bg = np.asarray(background)
    backgrounds = [bg] if bg.ndim == 3 else list(bg)
    if not backgrounds:
        raise LengthMismatch("background clip is empty")
    return [
        composite_frame(frame, mask, backgrounds[i % len(backgrounds)], spec)
        for i, (frame, mask) in enumerate(zip(frames, masks))
    ]
