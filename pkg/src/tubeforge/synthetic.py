"""Seeded synthetic videos (frames, detections, labels) for tests and scripts."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BoundingBox, Detection
from .ingest import LabelVector, write_detections, write_labels, write_raw_frames


@dataclass
class SyntheticVideo:
    frame_count: int
    width: int
    height: int
    labels: LabelVector
    # person detections only, keyed by frame
    detections: dict[int, list[Detection]]
    # everything the "detector" emitted, including other classes
    all_detections: dict[int, list[Detection]] = field(default_factory=dict)
    seed: int = 0

    def frames(self) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 7])
        return rng.integers(0, 256, size=(self.frame_count, self.height, self.width, 3), dtype=np.uint8)

    def write(self, directory, name: str = "video") -> dict[str, Path]:
        """Raw RGB24 frames, detections JSONL and labels CSV under ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "frames": directory / f"{name}.rgb",
            "detections": directory / f"{name}.jsonl",
            "labels": directory / f"{name}.csv",
        }
        write_raw_frames(paths["frames"], self.frames())
        write_detections(paths["detections"], self.all_detections or self.detections)
        write_labels(paths["labels"], self.labels)
        return paths


def random_labels(rng: np.random.Generator, frame_count: int) -> LabelVector:
    """Alternating runs of random length, mostly long enough to straddle 70%."""
    fight = np.zeros(frame_count, dtype=bool)
    pos, state = 0, bool(rng.integers(2))
    while pos < frame_count:
        run = int(rng.integers(1, 200))
        fight[pos:pos + run] = state
        pos += run
        state = not state
    return LabelVector(fight)


def random_video(seed: int, max_frames: int = 512, max_per_frame: int = 20, coord_limit: int = 64,
                 max_box: int = 16, other_class_rate: float = 0.1) -> SyntheticVideo:
    rng = np.random.default_rng(seed)
    frame_count = int(rng.integers(0, max_frames + 1))
    per_frame = int(rng.integers(0, max_per_frame + 1))
    persons: dict[int, list[Detection]] = {}
    emitted: dict[int, list[Detection]] = {}
    for f in range(frame_count):
        for _ in range(int(rng.integers(0, per_frame + 1))):
            x1 = int(rng.integers(0, coord_limit - 1))
            y1 = int(rng.integers(0, coord_limit - 1))
            x2 = int(rng.integers(x1 + 1, min(x1 + max_box, coord_limit - 1) + 1))
            y2 = int(rng.integers(y1 + 1, min(y1 + max_box, coord_limit - 1) + 1))
            class_id = 1 if rng.random() < other_class_rate else 0
            det = Detection(BoundingBox(x1, y1, x2, y2), round(float(rng.random()), 4), class_id, f)
            emitted.setdefault(f, []).append(det)
            if class_id == 0:
                persons.setdefault(f, []).append(det)
    return SyntheticVideo(frame_count, coord_limit, coord_limit, random_labels(rng, frame_count),
                          persons, emitted, seed)


def two_person_clip(frame_count: int = 256, size: int = 64, fight: bool = True, seed: int = 0) -> SyntheticVideo:
    """Two overlapping people present in every frame, drifting slightly."""
    dets = {}
    for f in range(frame_count):
        dx = (f // 32) % 4
        dets[f] = [
            Detection(BoundingBox(10 + dx, 12, 30 + dx, 50), 0.9, 0, f),
            Detection(BoundingBox(22 + dx, 10, 44 + dx, 52), 0.8, 0, f),
        ]
    labels = LabelVector(np.full(frame_count, fight, dtype=bool))
    return SyntheticVideo(frame_count, size, size, labels, dets, dets, seed)
