"""Cut a video into fixed-length non-overlapping volumes and label each one."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .geometry import Detection
from .ingest import LabelVector
from .labels import Label

DEFAULT_VOLUME_LENGTH = 128
DEFAULT_FIGHT_FRACTION = Fraction(7, 10)


@dataclass(frozen=True)
class VolumeLabel:
    value: Label
    fight_frame_fraction: float
    fight_frames: int
    frames: int


@dataclass
class VideoVolume:
    volume_index: int
    start_frame: int
    frame_span: int
    labels: LabelVector
    # keyed by absolute frame index; only frames with detections present
    detections: dict[int, list[Detection]] = field(default_factory=dict)
    # number of trailing frames that repeat the last real frame
    padded_frames: int = 0

    @property
    def stop_frame(self) -> int:
        return self.start_frame + self.frame_span


def segment_volumes(frame_count: int, volume_length: int = DEFAULT_VOLUME_LENGTH,
                    pad: bool = False) -> list[tuple[int, int]]:
    """``(start_frame, span)`` for each volume.

    The trailing ``frame_count % volume_length`` frames are dropped, or with
    ``pad`` become one more volume completed by repeating the final frame.
    """
    if volume_length < 1:
        raise ValueError(f"volume length must be >= 1, got {volume_length}")
    full = frame_count // volume_length
    spans = [(i * volume_length, volume_length) for i in range(full)]
    if pad and frame_count % volume_length:
        spans.append((full * volume_length, volume_length))
    return spans


def _as_fraction(threshold) -> Fraction:
    if isinstance(threshold, Fraction):
        return threshold
    # str() so 0.7 means 7/10, not the nearest binary double
    return Fraction(str(threshold))


def label_volume(labels: LabelVector | Sequence, threshold=DEFAULT_FIGHT_FRACTION) -> VolumeLabel:
    """Fight iff strictly more than ``threshold`` of the frames are Fight.

    Compared as exact rationals: 90/128 is Fight and 70/100 is not.
    """
    if not isinstance(labels, LabelVector):
        labels = LabelVector.from_labels(labels)
    n = len(labels)
    if n == 0:
        raise ValueError("cannot label an empty volume")
    fight = labels.count(Label.FIGHT)
    value = Label.FIGHT if Fraction(fight, n) > _as_fraction(threshold) else Label.NONFIGHT
    return VolumeLabel(value, fight / n, fight, n)


def build_volumes(frame_count: int, labels: LabelVector,
                  detections: Mapping[int, Sequence[Detection]],
                  volume_length: int = DEFAULT_VOLUME_LENGTH, pad: bool = False) -> list[VideoVolume]:
    """Slice labels and detections per volume.

    Padded frames copy the final real frame's label; detections are not
    replicated onto them.
    """
    if len(labels) != frame_count:
        raise ValueError(f"label vector has {len(labels)} entries for {frame_count} frames")
    volumes = []
    for index, (start, span) in enumerate(segment_volumes(frame_count, volume_length, pad)):
        stop = min(start + span, frame_count)
        fight = labels.fight[start:stop]
        padded = start + span - stop
        if padded:
            fight = np.concatenate([fight, np.repeat(fight[-1:], padded)])
        dets = {f: list(detections[f]) for f in range(start, stop) if detections.get(f)}
        volumes.append(VideoVolume(index, start, span, LabelVector(fight), dets, padded))
    return volumes
