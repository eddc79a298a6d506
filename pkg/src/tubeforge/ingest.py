"""Reading frames, person detections and per-frame annotations.

Frame interchange is raw interleaved RGB24 (what ``ffmpeg -f rawvideo
-pix_fmt rgb24 -`` emits) or a directory of ``frame_%06d.png`` images.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator, Mapping, Sequence

import numpy as np
from PIL import Image

from .errors import (
    IngestError,
    IntervalOutOfRange,
    NegativeArea,
    OverlappingIntervals,
    ParseError,
    TruncatedFrame,
)
from .geometry import BoundingBox, Detection
from .labels import Label

log = logging.getLogger(__name__)

FRAME_NAME = "frame_{:06d}.png"
_FRAME_RE = re.compile(r"^frame_(\d{6})\.png$")


class FrameSource:
    """Sequential single-consumer iterator over fixed-size frames.

    ``frame_count`` is None when the source is an open-ended stream.
    """

    def __init__(self, mode, width, height, channels=3, frame_count=None, *, _reader=None):
        if width < 1 or height < 1:
            raise ValueError(f"frame size must be positive, got {width}x{height}")
        self.mode = mode
        self.width = width
        self.height = height
        self.channels = channels
        self.frame_count = frame_count
        self._reader = _reader
        self._next_index = 0

    @property
    def frame_shape(self) -> tuple[int, ...]:
        if self.channels == 1:
            return (self.height, self.width)
        return (self.height, self.width, self.channels)

    @property
    def frame_bytes(self) -> int:
        return self.width * self.height * self.channels

    @property
    def position(self) -> int:
        return self._next_index

    def __iter__(self) -> Iterator[np.ndarray]:
        while True:
            frame = self.next_frame()
            if frame is None:
                return
            yield frame

    def next_frame(self) -> np.ndarray | None:
        frame = self._reader(self._next_index)
        if frame is not None:
            self._next_index += 1
        return frame

    def read(self, n: int) -> np.ndarray:
        """Next ``n`` frames stacked into one array (fewer at end of source)."""
        frames = []
        for _ in range(n):
            frame = self.next_frame()
            if frame is None:
                break
            frames.append(frame)
        if not frames:
            return np.empty((0, *self.frame_shape), dtype=np.uint8)
        return np.stack(frames)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def open_raw_stream(byte_source, width: int, height: int, channels: int = 3,
                    frame_count: int | None = None) -> FrameSource:
    """Wrap a byte stream (file object or bytes) of raw interleaved frames."""
    if isinstance(byte_source, (bytes, bytearray, memoryview)):
        byte_source = io.BytesIO(bytes(byte_source))
    source = FrameSource("raw-stream", width, height, channels, frame_count)
    frame_bytes = source.frame_bytes

    def reader(index):
        buf = _read_exact(byte_source, frame_bytes)
        if not buf:
            return None
        if len(buf) < frame_bytes:
            raise TruncatedFrame(
                f"stream ended {len(buf)} bytes into frame {index} "
                f"(expected {frame_bytes} bytes per frame)"
            )
        return np.frombuffer(buf, dtype=np.uint8).reshape(source.frame_shape)

    source._reader = reader
    return source


def open_raw_file(path, width: int, height: int, channels: int = 3) -> FrameSource:
    """Raw frame file with a known frame count; size must be a whole number of frames."""
    size = os.path.getsize(path)
    frame_bytes = width * height * channels
    if size % frame_bytes:
        raise TruncatedFrame(
            f"{path}: {size} bytes is not a multiple of the {frame_bytes}-byte frame "
            f"({width}x{height}x{channels})"
        )
    fh = open(path, "rb")
    return open_raw_stream(fh, width, height, channels, frame_count=size // frame_bytes)


def write_raw_frames(path, frames) -> int:
    n = 0
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(np.ascontiguousarray(frame, dtype=np.uint8).tobytes())
            n += 1
    return n


def list_frame_files(directory) -> list[Path]:
    directory = Path(directory)
    names = sorted(p.name for p in directory.iterdir() if _FRAME_RE.match(p.name))
    for expected, name in enumerate(names):
        if int(_FRAME_RE.match(name).group(1)) != expected:
            raise IngestError(f"{directory}: frame sequence has a gap before {name}")
    return [directory / name for name in names]


def open_image_directory(directory, channels: int = 3) -> FrameSource:
    files = list_frame_files(directory)
    mode = "L" if channels == 1 else "RGB"
    if files:
        with Image.open(files[0]) as im:
            width, height = im.size
    else:
        width = height = 1
    source = FrameSource("image-directory", width, height, channels, frame_count=len(files))

    def reader(index):
        if index >= len(files):
            return None
        with Image.open(files[index]) as im:
            arr = np.asarray(im.convert(mode), dtype=np.uint8)
        if arr.shape != source.frame_shape:
            raise IngestError(f"{files[index]}: size {arr.shape} differs from {source.frame_shape}")
        return arr

    source._reader = reader
    return source


def write_image_directory(directory, frames) -> int:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = 0
    for n, frame in enumerate(frames, start=1):
        Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(directory / FRAME_NAME.format(n - 1))
    return n


def open_frames(path, width: int | None = None, height: int | None = None,
                channels: int = 3) -> FrameSource:
    """Directory -> image mode, anything else -> raw file (needs width/height)."""
    if os.path.isdir(path):
        return open_image_directory(path, channels)
    if width is None or height is None:
        raise IngestError(f"{path}: raw frame streams need --width and --height")
    return open_raw_file(path, width, height, channels)


# detections ----------------------------------------------------------------

def _parse_detection(record, line_no: int) -> tuple[int, Detection]:
    try:
        frame = record["frame"]
        box = record["box"]
        score = record.get("score", 1.0)
        class_id = record.get("class", 0)
    except (TypeError, KeyError) as exc:
        raise ParseError(f"missing field {exc}", line_no) from None
    if not isinstance(frame, int) or isinstance(frame, bool) or frame < 0:
        raise ParseError(f"frame must be a non-negative integer, got {frame!r}", line_no)
    if (not isinstance(box, list) or len(box) != 4
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in box)):
        raise ParseError(f"box must be four integers, got {box!r}", line_no)
    if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
        raise ParseError(f"score must be in [0, 1], got {score!r}", line_no)
    if not isinstance(class_id, int):
        raise ParseError(f"class must be an integer, got {class_id!r}", line_no)
    x1, y1, x2, y2 = box
    if x2 <= x1 or y2 <= y1:
        raise NegativeArea(f"box {box} has non-positive area", line_no)
    det = Detection(BoundingBox(x1, y1, x2, y2), float(score), class_id, frame)
    return frame, det


def read_detections(path, person_class: int = 0) -> defaultdict[int, list[Detection]]:
    """Group detector output by frame, keeping only ``person_class`` records.

    Returns a defaultdict so frames without detections map to an empty list.
    Order within a frame follows the file.
    """
    grouped: defaultdict[int, list[Detection]] = defaultdict(list)
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no) from None
            frame, det = _parse_detection(record, line_no)
            if det.class_id == person_class:
                grouped[frame].append(det)
    return grouped


def write_detections(path, detections: Mapping[int, Sequence[Detection]]) -> None:
    with open(path, "w") as fh:
        for frame in sorted(detections):
            for det in detections[frame]:
                rec = {"frame": frame, "box": list(det.box.as_tuple()),
                       "score": det.score, "class": det.class_id}
                fh.write(json.dumps(rec) + "\n")


# labels --------------------------------------------------------------------

@dataclass
class LabelVector:
    """Per-frame labels stored as a boolean "is fight" array."""

    fight: np.ndarray

    @classmethod
    def from_labels(cls, labels) -> LabelVector:
        return cls(np.array([Label.parse(x) is Label.FIGHT for x in labels], dtype=bool))

    def __len__(self) -> int:
        return len(self.fight)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return LabelVector(self.fight[index])
        return Label.FIGHT if self.fight[index] else Label.NONFIGHT

    def count(self, label: Label) -> int:
        n = int(np.count_nonzero(self.fight))
        return n if label is Label.FIGHT else len(self) - n

    @property
    def labels(self) -> list[Label]:
        return [self[i] for i in range(len(self))]


def read_labels(path, frame_count: int) -> LabelVector:
    """Expand inclusive ``start,end,label`` intervals to per-frame labels.

    Frames outside every interval are NonFight.
    """
    intervals = []
    with open(path, newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise ParseError(f"expected start,end,label, got {row!r}", line_no)
            try:
                start, end = int(row[0]), int(row[1])
                label = Label.parse(row[2])
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
            if start < 0 or end < start:
                raise ParseError(f"bad interval {start},{end}", line_no)
            if end >= frame_count:
                raise IntervalOutOfRange(
                    f"line {line_no}: interval {start}-{end} exceeds frame count {frame_count}"
                )
            intervals.append((start, end, label, line_no))

    fight = np.zeros(frame_count, dtype=bool)
    intervals.sort()
    for prev, cur in zip(intervals, intervals[1:]):
        if cur[0] <= prev[1]:
            raise OverlappingIntervals(
                f"line {cur[3]}: interval {cur[0]}-{cur[1]} overlaps {prev[0]}-{prev[1]} (line {prev[3]})"
            )
    for start, end, label, _ in intervals:
        fight[start:end + 1] = label is Label.FIGHT
    return LabelVector(fight)


def write_labels(path, labels: LabelVector) -> None:
    """Inverse of read_labels: one interval per run of equal labels."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        fight = labels.fight
        start = 0
        for i in range(1, len(fight) + 1):
            if i == len(fight) or fight[i] != fight[start]:
                writer.writerow([start, i - 1, Label.FIGHT if fight[start] else Label.NONFIGHT])
                start = i
