"""Crop a volume with each cluster's best box and resize to the tube shape.

Resampling is bilinear with half-pixel centers: output pixel ``d`` samples
source coordinate ``(d + 0.5) * in / out - 0.5`` on each axis, clamped to
the edge. Channels are interpolated in float64 and rounded half away from
zero. Tube bytes are frame-major, row-major, interleaved RGB.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cluster import Cluster
from .errors import DegenerateBox
from .geometry import BoundingBox, clamp_box
from .volumes import VideoVolume, VolumeLabel

log = logging.getLogger(__name__)

TUBE_SIZE = 224
# frames resampled per vectorized batch; bounds float64 temporaries
_BATCH = 16


@dataclass(frozen=True)
class ResizeSpec:
    out_width: int = TUBE_SIZE
    out_height: int = TUBE_SIZE

    def __post_init__(self):
        if self.out_width < 1 or self.out_height < 1:
            raise ValueError(f"output size must be positive, got {self.out_width}x{self.out_height}")


@dataclass
class Tube:
    data: np.ndarray
    label: VolumeLabel
    provenance: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


def crop_frame(frame: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Sub-image over ``[x1, x2) x [y1, y2)`` after clamping to the frame."""
    height, width = frame.shape[:2]
    b = clamp_box(box, width, height)
    return frame[b.y1:b.y2, b.x1:b.x2]


def _axis_weights(n_in: int, n_out: int):
    d = np.arange(n_out, dtype=np.float64)
    s = (d + 0.5) * (n_in / n_out) - 0.5
    s = np.clip(s, 0.0, n_in - 1)
    i0 = np.floor(s).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, s - i0


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero, then clamp to bytes."""
    out = np.trunc(values + np.copysign(0.5, values))
    return np.clip(out, 0, 255).astype(np.uint8)


def resize_bilinear(images: np.ndarray, spec: ResizeSpec = ResizeSpec()) -> np.ndarray:
    """Resize ``(h, w, c)`` or a batch ``(n, h, w, c)`` of byte images."""
    images = np.asarray(images)
    single = images.ndim == 3
    if single:
        images = images[None]
    n, h, w = images.shape[:3]
    if h < 1 or w < 1:
        raise ValueError(f"cannot resize an empty {h}x{w} image")
    if (h, w) == (spec.out_height, spec.out_width):
        out = images.astype(np.uint8, copy=True)
        return out[0] if single else out

    x0, x1, wx = _axis_weights(w, spec.out_width)
    y0, y1, wy = _axis_weights(h, spec.out_height)
    wx = wx[None, None, :, None]
    wy = wy[None, :, None, None]
    out = np.empty((n, spec.out_height, spec.out_width) + images.shape[3:], dtype=np.uint8)
    for start in range(0, n, _BATCH):
        batch = images[start:start + _BATCH].astype(np.float64)
        if batch.ndim == 3:
            batch = batch[..., None]
        left, right = batch[:, :, x0], batch[:, :, x1]
        rows = left + wx * (right - left)
        top, bottom = rows[:, y0], rows[:, y1]
        vals = top + wy * (bottom - top)
        out[start:start + _BATCH] = round_half_away(vals).reshape(out[start:start + _BATCH].shape)
    return out[0] if single else out


def extract_tubes(volume: VideoVolume, clusters: Sequence[Cluster], frames: np.ndarray,
                  label: VolumeLabel, spec: ResizeSpec = ResizeSpec(),
                  source_id: str = "") -> list[Tube]:
    """One tube per cluster; the cluster's best box crops every frame.

    ``frames`` is the volume's ``(N, H, W, 3)`` window. Clusters whose box
    falls outside the frame are skipped with a warning.
    """
    if len(frames) != volume.frame_span:
        raise ValueError(f"frame window has {len(frames)} frames, volume spans {volume.frame_span}")
    height, width = frames.shape[1:3]
    tubes = []
    for cluster in clusters:
        try:
            crop = clamp_box(cluster.best_box, width, height)
        except DegenerateBox as exc:
            log.warning("volume %d cluster %d skipped: %s", volume.volume_index, cluster.cluster_id, exc)
            continue
        window = frames[:, crop.y1:crop.y2, crop.x1:crop.x2]
        provenance = {
            "source_id": source_id,
            "volume_index": volume.volume_index,
            "start_frame": volume.start_frame,
            "cluster_id": cluster.cluster_id,
            "best_box": list(cluster.best_box.as_tuple()),
            "crop_box": list(crop.as_tuple()),
            "frame_size": [width, height],
            "members": len(cluster),
        }
        tubes.append(Tube(resize_bilinear(window, spec), label, provenance))
    return tubes
