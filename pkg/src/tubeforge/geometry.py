"""Box geometry shared by clustering and cropping.

Boxes are half-open pixel rectangles ``[x1, x2) x [y1, y2)`` with integer
coordinates. Coordinates may be negative or exceed the frame: detectors emit
such boxes and clamping only happens at crop time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable

from .errors import DegenerateBox, EmptyCluster


@dataclass(frozen=True, order=True)
class BoundingBox:
    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise DegenerateBox(f"box {self.as_tuple()} has no area")

    @property
    def width(self) -> int:
        return self.x2 - self.x1

    @property
    def height(self) -> int:
        return self.y2 - self.y1

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    def contains(self, other: BoundingBox) -> bool:
        return (
            self.x1 <= other.x1
            and self.y1 <= other.y1
            and self.x2 >= other.x2
            and self.y2 >= other.y2
        )


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    score: float
    class_id: int
    frame_index: int

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.frame_index < 0:
            raise ValueError(f"negative frame index {self.frame_index}")


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    w = min(a.x2, b.x2) - max(a.x1, b.x1)
    h = min(a.y2, b.y2) - max(a.y1, b.y1)
    if w <= 0 or h <= 0:
        return 0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; integer areas, one float division."""
    inter = intersection_area(a, b)
    if inter == 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def union_box(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    return BoundingBox(min(a.x1, b.x1), min(a.y1, b.y1), max(a.x2, b.x2), max(a.y2, b.y2))


def best_box_of(members: Iterable[BoundingBox]) -> BoundingBox:
    """Smallest box enclosing every member box."""
    members = list(members)
    if not members:
        raise EmptyCluster("cannot take the enclosing box of an empty cluster")
    return reduce(union_box, members)


def clamp_box(b: BoundingBox, width: int, height: int) -> BoundingBox:
    if width < 1 or height < 1:
        raise ValueError(f"frame size must be positive, got {width}x{height}")
    x1, y1 = max(b.x1, 0), max(b.y1, 0)
    x2, y2 = min(b.x2, width), min(b.y2, height)
    if x2 <= x1 or y2 <= y1:
        raise DegenerateBox(f"box {b.as_tuple()} lies outside the {width}x{height} frame")
    return BoundingBox(x1, y1, x2, y2)
