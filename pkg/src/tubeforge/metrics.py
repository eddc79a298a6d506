"""Binary classification metrics (Fight is the positive class) and split checks."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .containers import DatasetManifest
from .errors import EmptyInput, ParseError
from .labels import Label

log = logging.getLogger(__name__)

METRIC_NAMES = ("accuracy", "precision", "sensitivity", "specificity")
DEFAULT_SPLIT_TARGET = (0.70, 0.10, 0.20)
DEFAULT_SPLIT_TOLERANCE = 0.02


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError(f"negative count in {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(pairs: Iterable[tuple]) -> ConfusionMatrix:
    """Tally ``(predicted, true)`` label pairs."""
    tp = fp = tn = fn = 0
    n = 0
    for predicted, true in pairs:
        pred_fight = Label.parse(predicted) is Label.FIGHT
        true_fight = Label.parse(true) is Label.FIGHT
        n += 1
        if pred_fight and true_fight:
            tp += 1
        elif pred_fight:
            fp += 1
        elif true_fight:
            fn += 1
        else:
            tn += 1
    if n == 0:
        raise EmptyInput("no prediction pairs")
    return ConfusionMatrix(tp, fp, tn, fn)


def metrics_of(cm: ConfusionMatrix) -> dict[str, float]:
    """Accuracy, precision, sensitivity (recall), specificity.

    A metric whose denominator is zero is left out of the result rather
    than reported as 0.
    """
    ratios = {
        "accuracy": (cm.tp + cm.tn, cm.total),
        "precision": (cm.tp, cm.tp + cm.fp),
        "sensitivity": (cm.tp, cm.tp + cm.fn),
        "specificity": (cm.tn, cm.tn + cm.fp),
    }
    return {name: num / den for name, (num, den) in ratios.items() if den}


def read_predictions(path) -> list[tuple[str, Label, Label]]:
    """Rows of a ``tube_id,predicted,true`` CSV."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"tube_id", "predicted", "true"} - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"{path}: missing columns {sorted(missing)}", 1)
        for line_no, row in enumerate(reader, start=2):
            try:
                rows.append((row["tube_id"], Label.parse(row["predicted"]), Label.parse(row["true"])))
            except (ValueError, AttributeError) as exc:
                raise ParseError(str(exc), line_no) from None
    return rows


def metrics_report(cm: ConfusionMatrix) -> dict:
    return {
        "confusion": {"tp": cm.tp, "fp": cm.fp, "tn": cm.tn, "fn": cm.fn, "total": cm.total},
        "metrics": metrics_of(cm),
    }


def format_metrics_table(report: dict) -> str:
    c = report["confusion"]
    lines = [f"tp={c['tp']} fp={c['fp']} tn={c['tn']} fn={c['fn']} total={c['total']}"]
    for name in METRIC_NAMES:
        value = report["metrics"].get(name)
        lines.append(f"{name:<12} {'n/a' if value is None else f'{value:.4f}':>8}")
    return "\n".join(lines)


# splits --------------------------------------------------------------------

@dataclass
class SplitReport:
    train_frac: float
    test_frac: float
    val_frac: float
    counts: dict[str, dict[str, int]]
    target: tuple[float, float, float] = DEFAULT_SPLIT_TARGET
    tolerance: float = DEFAULT_SPLIT_TOLERANCE
    warnings: list[str] = field(default_factory=list)

    @property
    def fractions(self) -> tuple[float, float, float]:
        return (self.train_frac, self.test_frac, self.val_frac)

    @property
    def consistent(self) -> bool:
        return not self.warnings


def split_report(counts: dict[str, dict[str, int]], target: Sequence[float] = DEFAULT_SPLIT_TARGET,
                 tolerance: float = DEFAULT_SPLIT_TOLERANCE) -> SplitReport:
    """Fractions of the combined total held by train/test/val, checked against ``target``."""
    sizes = [sum(counts[s].values()) for s in ("train", "test", "val")]
    total = sum(sizes)
    if total == 0:
        raise EmptyInput("all three splits are empty")
    fractions = [size / total for size in sizes]
    warnings = []
    for name, frac, want in zip(("train", "test", "val"), fractions, target):
        if abs(frac - want) > tolerance:
            msg = f"{name} fraction {frac:.4f} deviates from target {want:.2f} by more than {tolerance}"
            log.warning(msg)
            warnings.append(msg)
    return SplitReport(*fractions, counts=counts, target=tuple(target), tolerance=tolerance, warnings=warnings)


def validate_split(train: DatasetManifest, test: DatasetManifest, val: DatasetManifest,
                   target: Sequence[float] = DEFAULT_SPLIT_TARGET,
                   tolerance: float = DEFAULT_SPLIT_TOLERANCE) -> SplitReport:
    counts = {"train": train.counts, "test": test.counts, "val": val.counts}
    return split_report(counts, target, tolerance)
