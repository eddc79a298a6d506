"""End-to-end tube extraction for one video.

Volumes are read sequentially from the frame source and fanned out to a
bounded thread pool. Each worker clusters, crops, resizes and writes its
own tube files; the manifest is assembled afterwards in
(volume_index, cluster_id) order, so output does not depend on the
worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cluster import Cluster, ClusterConfig, Linking, cluster_volume, clusters_to_json, dump_clusters
from .containers import FORMATS, SUFFIX, ManifestEntry, checksum_hex, write_manifest, write_tensor
from .errors import ConfigError
from .geometry import Detection
from .ingest import FrameSource, LabelVector
from .labels import Label
from .tubes import TUBE_SIZE, ResizeSpec, extract_tubes
from .volumes import VideoVolume, VolumeLabel, build_volumes, label_volume

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    volume_length: int = 128
    fight_fraction: float = 0.7
    iou_threshold: float = 0.10
    linking: str = Linking.ANY_FRAME.value
    min_cluster_boxes: int = 1
    out_width: int = TUBE_SIZE
    out_height: int = TUBE_SIZE
    format: str = "npy"
    chunk_frames: int = 16
    out_dir: str = "tubes"
    workers: int = 1
    pad_remainder: bool = False
    person_class: int = 0
    split: str = "train"

    def validate(self) -> PipelineConfig:
        problems = []
        if self.volume_length < 1:
            problems.append(f"volume_length must be >= 1 (got {self.volume_length})")
        if not 0 <= self.fight_fraction < 1:
            problems.append(f"fight_fraction must be in [0, 1) (got {self.fight_fraction})")
        if not 0 <= self.iou_threshold <= 1:
            problems.append(f"iou_threshold must be in [0, 1] (got {self.iou_threshold})")
        if self.linking not in {m.value for m in Linking}:
            problems.append(f"linking must be one of {[m.value for m in Linking]} (got {self.linking!r})")
        if self.min_cluster_boxes < 1:
            problems.append(f"min_cluster_boxes must be >= 1 (got {self.min_cluster_boxes})")
        if self.out_width < 1 or self.out_height < 1:
            problems.append("output size must be positive")
        if self.format not in FORMATS:
            problems.append(f"format must be one of {FORMATS} (got {self.format!r})")
        if self.chunk_frames < 1:
            problems.append(f"chunk_frames must be >= 1 (got {self.chunk_frames})")
        if self.workers < 1:
            problems.append(f"workers must be >= 1 (got {self.workers})")
        if self.split not in ("train", "test", "val"):
            problems.append(f"split must be train, test or val (got {self.split!r})")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    @property
    def cluster_config(self) -> ClusterConfig:
        return ClusterConfig(self.iou_threshold, Linking(self.linking), self.min_cluster_boxes)

    @property
    def resize_spec(self) -> ResizeSpec:
        return ResizeSpec(self.out_width, self.out_height)

    def updated(self, **overrides) -> PipelineConfig:
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class VolumePlan:
    volume: VideoVolume
    label: VolumeLabel
    clusters: list[Cluster]


@dataclass
class ExtractSummary:
    volumes: int = 0
    clusters: int = 0
    tubes: int = 0
    skipped: int = 0
    labels: dict[str, int] = field(default_factory=lambda: {l.value: 0 for l in Label})

    def line(self) -> str:
        return (f"volumes={self.volumes} clusters={self.clusters} tubes={self.tubes} "
                f"fight={self.labels['fight']} nonfight={self.labels['nonfight']} skipped={self.skipped}")


def check_inputs(frame_count: int, labels: LabelVector,
                 detections: Mapping[int, Sequence[Detection]]) -> None:
    if len(labels) != frame_count:
        raise ConfigError(f"label vector covers {len(labels)} frames but the video has {frame_count}")
    late = [f for f, dets in detections.items() if dets and f >= frame_count]
    if late:
        raise ConfigError(f"detections reference frame {max(late)} beyond the last frame {frame_count - 1}")


def plan_video(frame_count: int, labels: LabelVector, detections: Mapping[int, Sequence[Detection]],
               config: PipelineConfig = PipelineConfig()) -> list[VolumePlan]:
    """Segmentation, labeling and clustering only; no pixels involved."""
    config.validate()
    check_inputs(frame_count, labels, detections)
    threshold = Fraction(str(config.fight_fraction))
    plans = []
    for volume in build_volumes(frame_count, labels, detections, config.volume_length, config.pad_remainder):
        plans.append(VolumePlan(volume, label_volume(volume.labels, threshold),
                                cluster_volume(volume, config.cluster_config)))
    return plans


def tube_name(source_id: str, volume_index: int, cluster_id: int, fmt: str) -> str:
    return f"{source_id}_v{volume_index:05d}_c{cluster_id:03d}{SUFFIX[fmt]}"


def _process_volume(plan: VolumePlan, frames: np.ndarray, config: PipelineConfig,
                    source_id: str, out_dir: Path) -> tuple[list[ManifestEntry], int]:
    tubes = extract_tubes(plan.volume, plan.clusters, frames, plan.label, config.resize_spec, source_id)
    entries = []
    for tube in tubes:
        name = tube_name(source_id, plan.volume.volume_index, tube.provenance["cluster_id"], config.format)
        container = write_tensor(config.format, tube.data, tube.shape, out_dir / name, config.chunk_frames)
        provenance = dict(tube.provenance, fight_frame_fraction=tube.label.fight_frame_fraction)
        entries.append(ManifestEntry(name, config.format, container.shape, tube.label.value,
                                     checksum_hex(container.checksum), provenance))
    return entries, len(plan.clusters) - len(tubes)


def _read_window(frames: FrameSource, volume: VideoVolume) -> np.ndarray:
    real = volume.frame_span - volume.padded_frames
    window = frames.read(real)
    if len(window) != real:
        raise ConfigError(f"frame source ended at frame {frames.position}, "
                          f"volume {volume.volume_index} needs frames up to {volume.start_frame + real - 1}")
    if volume.padded_frames:
        window = np.concatenate([window, np.repeat(window[-1:], volume.padded_frames, axis=0)])
    return window


def run_extract(frames: FrameSource, labels: LabelVector, detections: Mapping[int, Sequence[Detection]],
                config: PipelineConfig, source_id: str = "video",
                debug_clusters: str | None = None) -> tuple[list[ManifestEntry], ExtractSummary]:
    """Extract and write every tube of one video; returns manifest entries and counts.

    The manifest file itself is ``<out_dir>/manifest.json``.
    """
    config.validate()
    frame_count = frames.frame_count
    if frame_count is None:
        raise ConfigError("frame count must be known before extraction")
    plans = plan_video(frame_count, labels, detections, config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = ExtractSummary(volumes=len(plans), clusters=sum(len(p.clusters) for p in plans))
    if summary.clusters == 0:
        log.warning("no clusters: no detections survived clustering in %d volume(s)", len(plans))

    results = []
    # at most 2 * workers volumes of pixels held in memory at once
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        pending = []
        for plan in plans:
            window = _read_window(frames, plan.volume)
            if not plan.clusters:
                continue
            pending.append(pool.submit(_process_volume, plan, window, config, source_id, out_dir))
            if len(pending) >= 2 * config.workers:
                results.append(pending.pop(0).result())
        results.extend(f.result() for f in pending)

    entries = []
    for volume_entries, skipped in results:
        entries.extend(volume_entries)
        summary.skipped += skipped
    entries.sort(key=lambda e: (e.provenance["volume_index"], e.provenance["cluster_id"]))
    for e in entries:
        summary.labels[e.label.value] += 1
    summary.tubes = len(entries)

    write_manifest(entries, config.split, out_dir / "manifest.json")
    if debug_clusters:
        dump_clusters(debug_clusters, [clusters_to_json(p.volume, p.clusters) for p in plans])
    return entries, summary
