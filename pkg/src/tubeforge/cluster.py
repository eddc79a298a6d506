"""IoU-connectivity clustering of the detections inside one volume.

Nodes are all detections of the volume; an edge joins two detections whose
IoU reaches the threshold and whose frames are eligible under the linking
rule. Clusters are the connected components.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundingBox, best_box_of
from .volumes import VideoVolume

__all__ = [
    "Linking", "ClusterConfig", "Cluster", "UnionFind",
    "cluster_volume", "cluster_boxes", "best_box_of", "clusters_to_json",
]


class Linking(str, enum.Enum):
    ANY_FRAME = "any-frame"
    ADJACENT_FRAME = "adjacent-frame"
    SAME_FRAME_ONLY = "same-frame-only"


@dataclass(frozen=True)
class ClusterConfig:
    iou_threshold: float = 0.10
    temporal_linking: Linking = Linking.ANY_FRAME
    min_cluster_boxes: int = 1

    def __post_init__(self):
        if not 0.0 <= self.iou_threshold <= 1.0:
            raise ValueError(f"iou_threshold must be in [0, 1], got {self.iou_threshold}")
        if self.min_cluster_boxes < 1:
            raise ValueError(f"min_cluster_boxes must be >= 1, got {self.min_cluster_boxes}")
        object.__setattr__(self, "temporal_linking", Linking(self.temporal_linking))


@dataclass
class Cluster:
    cluster_id: int
    # (absolute frame index, ordinal of the detection within that frame)
    member_detections: list[tuple[int, int]]
    best_box: BoundingBox
    member_boxes: list[BoundingBox] = field(repr=False, default_factory=list)

    @property
    def frame_coverage(self) -> int:
        return len({f for f, _ in self.member_detections})

    @property
    def first_frame(self) -> int:
        return self.member_detections[0][0]

    def __len__(self):
        return len(self.member_detections)


class UnionFind:
    """Disjoint sets over ``0..n-1`` with fully compressed paths.

    Every node points straight at its root, so ``find`` is a lookup and a
    union relabels the absorbed set in one vectorized pass. A component
    never gets absorbed more than n-1 times in total, which keeps the
    whole build at O(n^2) elementwise work with only O(n) Python steps.
    """

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, i: int) -> int:
        return int(self.parent[i])

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.parent[a], self.parent[b]
        if ra == rb:
            return False
        keep, drop = (ra, rb) if ra < rb else (rb, ra)
        self.parent[self.parent == drop] = keep
        return True

    def union_many(self, a: int, others: np.ndarray) -> None:
        for root in np.unique(self.parent[others]):
            if root != self.parent[a]:
                self.union(a, int(root))

    def groups(self) -> list[np.ndarray]:
        order = np.argsort(self.parent, kind="stable")
        roots = self.parent[order]
        splits = np.flatnonzero(np.diff(roots)) + 1
        return np.split(order, splits) if len(order) else []


def _row_iou(boxes: np.ndarray, areas: np.ndarray, i: int, lo: int, hi: int) -> np.ndarray:
    b = boxes[lo:hi]
    w = np.minimum(boxes[i, 2], b[:, 2]) - np.maximum(boxes[i, 0], b[:, 0])
    h = np.minimum(boxes[i, 3], b[:, 3]) - np.maximum(boxes[i, 1], b[:, 1])
    inter = np.where((w > 0) & (h > 0), w * h, 0)
    union = areas[i] + areas[lo:hi] - inter
    # integer areas, exactly representable; a single float division per pair
    return inter.astype(np.float64) / union.astype(np.float64)


def cluster_boxes(frames: np.ndarray, boxes: np.ndarray, config: ClusterConfig) -> UnionFind:
    """Union-find over detections given as parallel arrays.

    ``frames`` must be sorted ascending; ``boxes`` is ``(n, 4)`` integer
    ``x1, y1, x2, y2``.
    """
    n = len(frames)
    uf = UnionFind(n)
    if n < 2:
        return uf
    boxes = np.asarray(boxes, dtype=np.int64)
    areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
    linking = config.temporal_linking
    reach = {Linking.ANY_FRAME: None, Linking.ADJACENT_FRAME: 1, Linking.SAME_FRAME_ONLY: 0}[linking]
    for i in range(n - 1):
        lo = i + 1
        hi = n if reach is None else int(np.searchsorted(frames, frames[i] + reach, side="right"))
        if hi <= lo:
            continue
        linked = np.flatnonzero(_row_iou(boxes, areas, i, lo, hi) >= config.iou_threshold) + lo
        if len(linked):
            uf.union_many(i, linked)
    return uf


def _flatten(volume: VideoVolume):
    keys, boxes = [], []
    for frame in sorted(volume.detections):
        for ordinal, det in enumerate(volume.detections[frame]):
            keys.append((frame, ordinal))
            boxes.append(det.box)
    return keys, boxes


def cluster_volume(volume: VideoVolume, config: ClusterConfig = ClusterConfig()) -> list[Cluster]:
    """Connected components of the volume's IoU graph, in deterministic order.

    Clusters are sorted by first member frame, then by the best box
    (left edge first), then by first member; ``cluster_id`` is the rank in
    that order. Components smaller than ``min_cluster_boxes`` are dropped.
    """
    for frame in volume.detections:
        if not volume.start_frame <= frame < volume.stop_frame:
            raise ValueError(f"detection frame {frame} outside volume "
                             f"[{volume.start_frame}, {volume.stop_frame})")
    keys, boxes = _flatten(volume)
    if not keys:
        return []
    frames = np.array([k[0] for k in keys], dtype=np.int64)
    coords = np.array([b.as_tuple() for b in boxes], dtype=np.int64)
    uf = cluster_boxes(frames, coords, config)

    found = []
    for members in uf.groups():
        if len(members) < config.min_cluster_boxes:
            continue
        members = np.sort(members)
        member_boxes = [boxes[m] for m in members]
        best = best_box_of(member_boxes)
        found.append(([keys[m] for m in members], best, member_boxes))

    found.sort(key=lambda c: (c[0][0][0], best_key(c[1]), c[0][0]))
    return [Cluster(cid, members, best, mboxes) for cid, (members, best, mboxes) in enumerate(found)]


def best_key(box: BoundingBox) -> tuple[int, int, int, int]:
    return (box.x1, box.y1, box.x2, box.y2)


def clusters_to_json(volume: VideoVolume, clusters: list[Cluster]) -> dict:
    """Debug dump for one volume (see docs/formats.md)."""
    return {
        "volume_index": volume.volume_index,
        "start_frame": volume.start_frame,
        "frame_span": volume.frame_span,
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "best_box": list(c.best_box.as_tuple()),
                "frame_coverage": c.frame_coverage,
                "members": [[f, o] for f, o in c.member_detections],
            }
            for c in clusters
        ],
    }


def dump_clusters(path, entries: list[dict]) -> None:
    with open(path, "w") as fh:
        json.dump({"volumes": entries}, fh, indent=1)
