"""Load-time comparison of the three container formats.

The harness writes one seeded corpus in every format, then times loading
it back. Absolute numbers and the ratios between formats depend on the
machine, disk and page cache; they are measurements, not targets.
"""

from __future__ import annotations

import json
import math
import os
import platform
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import containers
from .containers import FORMATS, SUFFIX, ReadStats, checksum_hex, fnv1a64, write_tensor
from .errors import CorpusMissing

ACCESS_PATTERNS = ("full-read", "random-frame")
MIN_REPETITIONS = 3
DISCLAIMER = (
    "Timings and format ratios are specific to this machine, storage and cache "
    "state; compare formats within one report, not across machines."
)
CORPUS_FILE = "corpus.json"


@dataclass
class CorpusItem:
    index: int
    checksum: str
    files: dict[str, str]


@dataclass
class Corpus:
    root: str
    shape: tuple[int, ...]
    seed: int
    chunk_frames: int
    items: list[CorpusItem]

    def paths(self, fmt: str) -> list[Path]:
        return [Path(self.root) / item.files[fmt] for item in self.items]

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("root")
        d["shape"] = list(self.shape)
        return d

    @classmethod
    def load(cls, root) -> Corpus:
        path = Path(root) / CORPUS_FILE
        if not path.exists():
            raise CorpusMissing(f"{path} not found; run gen-corpus first")
        raw = json.loads(path.read_text())
        items = [CorpusItem(**item) for item in raw["items"]]
        corpus = cls(str(root), tuple(raw["shape"]), raw["seed"], raw["chunk_frames"], items)
        for fmt in FORMATS:
            for p in corpus.paths(fmt):
                if not p.exists():
                    raise CorpusMissing(f"corpus file {p} is missing")
        return corpus


def tube_payload(shape, seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng([seed, index])
    return rng.integers(0, 256, size=shape, dtype=np.uint8)


def generate_corpus(count: int, shape=(128, 224, 224, 3), seed: int = 0, out_dir="corpus",
                    chunk_frames: int = 16) -> Corpus:
    """Write ``count`` seeded random tubes in every format (same payload per index)."""
    if count < 1:
        raise ValueError(f"corpus needs at least one tube, got count={count}")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    shape = tuple(shape)
    items = []
    for i in range(count):
        data = tube_payload(shape, seed, i)
        files = {}
        for fmt in FORMATS:
            name = f"tube_{i:05d}{SUFFIX[fmt]}"
            write_tensor(fmt, data, shape, root / name, chunk_frames)
            files[fmt] = name
        items.append(CorpusItem(i, checksum_hex(fnv1a64(data)), files))
    corpus = Corpus(str(root), shape, seed, chunk_frames, items)
    (root / CORPUS_FILE).write_text(json.dumps(corpus.to_json(), indent=1) + "\n")
    return corpus


@dataclass
class FormatTiming:
    format: str
    files: int
    total_bytes: int
    bytes_read: int
    cold_load_ms: float
    warm_load_ms: float
    p50_ms: float
    p95_ms: float
    runs_ms: list[float] = field(default_factory=list)
    payload_sum: int = 0


@dataclass
class BenchReport:
    formats: list[FormatTiming]
    environment: str
    repetitions: int
    access_pattern: str
    timer_overhead_ms: float
    cache_evasion_bytes: int = 0
    disclaimer: str = DISCLAIMER

    def entry(self, fmt: str) -> FormatTiming:
        return next(f for f in self.formats if f.format == fmt)

    @property
    def ratios(self) -> dict[str, float]:
        """Warm load time of each format relative to npy."""
        base = self.entry("npy").warm_load_ms if any(f.format == "npy" for f in self.formats) else None
        if not base:
            return {}
        return {f.format: f.warm_load_ms / base for f in self.formats}

    def to_json(self) -> dict:
        d = asdict(self)
        d["ratios_vs_npy"] = self.ratios
        return d

    @classmethod
    def from_json(cls, d: dict) -> BenchReport:
        d = dict(d)
        d.pop("ratios_vs_npy", None)
        d["formats"] = [FormatTiming(**f) for f in d["formats"]]
        return cls(**d)


def machine_descriptor() -> str:
    return (f"{platform.platform()}; {platform.machine()}; cpus={os.cpu_count()}; "
            f"python {platform.python_version()}; numpy {np.__version__}")


def _drop_cache(paths) -> None:
    # best effort: DONTNEED only evicts clean pages and needs no privileges
    if not hasattr(os, "posix_fadvise"):
        return
    for p in paths:
        fd = os.open(p, os.O_RDONLY)
        try:
            os.fsync(fd)
            os.posix_fadvise(fd, 0, 0, os.POSIX_FADV_DONTNEED)
        except OSError:
            pass
        finally:
            os.close(fd)


def _evade_cache(nbytes: int, scratch_dir: Path) -> None:
    """Read ``nbytes`` of unrelated data to push the corpus out of cache."""
    if nbytes <= 0:
        return
    scratch = scratch_dir / ".cache_evasion.bin"
    if not scratch.exists() or scratch.stat().st_size < nbytes:
        with open(scratch, "wb") as fh:
            block = np.random.default_rng(1).integers(0, 256, 1 << 20, dtype=np.uint8).tobytes()
            for _ in range(math.ceil(nbytes / len(block))):
                fh.write(block)
    with open(scratch, "rb") as fh:
        while fh.read(1 << 22):
            pass


def _load_full(fmt, path, stats):
    _, data = containers.read_tensor(fmt, path, stats)
    # summing touches every byte, so nothing is left lazily unread
    return int(data.sum(dtype=np.uint64))


def _load_frame(fmt, path, stats, frame):
    return int(containers.read_frame(fmt, path, frame, stats).sum(dtype=np.uint64))


def _timed_pass(fmt, paths, access_pattern, frames, stats):
    per_file = []
    total = 0
    start = time.perf_counter()
    for path, frame in zip(paths, frames):
        t0 = time.perf_counter()
        if access_pattern == "full-read":
            total += _load_full(fmt, path, stats)
        else:
            total += _load_frame(fmt, path, stats, frame)
        per_file.append((time.perf_counter() - t0) * 1e3)
    return (time.perf_counter() - start) * 1e3, per_file, total


def timer_overhead_ms(samples: int = 1000) -> float:
    """Median cost of one timed no-op load, i.e. the measurement floor."""
    noop = lambda: 0  # noqa: E731
    costs = []
    for _ in range(samples):
        t0 = time.perf_counter()
        noop()
        costs.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(costs)


def run_bench(corpus: Corpus | str | os.PathLike, repetitions: int = 5, access_pattern: str = "full-read",
              cache_evasion_bytes: int = 0, seed: int = 0, formats=FORMATS) -> BenchReport:
    """Time every format on the corpus, strictly sequentially.

    Each format gets one cold pass (page cache dropped where the OS allows,
    optionally followed by reading ``cache_evasion_bytes`` of scratch data)
    and ``repetitions`` warm passes, whose median is reported.
    """
    if not isinstance(corpus, Corpus):
        corpus = Corpus.load(corpus)
    if repetitions < MIN_REPETITIONS:
        raise ValueError(f"repetitions must be >= {MIN_REPETITIONS}, got {repetitions}")
    if access_pattern not in ACCESS_PATTERNS:
        raise ValueError(f"access_pattern must be one of {ACCESS_PATTERNS}, got {access_pattern!r}")
    rng = np.random.default_rng(seed)
    frames = rng.integers(0, corpus.shape[0], size=len(corpus.items)).tolist()
    overhead = timer_overhead_ms()

    timings = []
    for fmt in formats:
        paths = corpus.paths(fmt)
        size = sum(p.stat().st_size for p in paths)
        _drop_cache(paths)
        _evade_cache(cache_evasion_bytes, Path(corpus.root))
        stats = ReadStats()
        cold_ms, _, payload_sum = _timed_pass(fmt, paths, access_pattern, frames, stats)
        runs, per_file = [], []
        for _ in range(repetitions):
            elapsed, files_ms, _ = _timed_pass(fmt, paths, access_pattern, frames, None)
            runs.append(elapsed)
            per_file.extend(files_ms)
        timings.append(FormatTiming(
            format=fmt, files=len(paths), total_bytes=size, bytes_read=stats.bytes_read,
            cold_load_ms=cold_ms, warm_load_ms=statistics.median(runs),
            p50_ms=float(np.percentile(per_file, 50)), p95_ms=float(np.percentile(per_file, 95)),
            runs_ms=runs, payload_sum=payload_sum,
        ))
    return BenchReport(timings, machine_descriptor(), repetitions, access_pattern, overhead, cache_evasion_bytes)


def format_table(report: BenchReport) -> str:
    header = f"{'format':<8} {'files':>5} {'MB':>9} {'cold ms':>10} {'warm ms':>10} {'p50 ms':>9} {'p95 ms':>9} {'x npy':>7}"
    lines = [f"access={report.access_pattern} repetitions={report.repetitions}", header]
    ratios = report.ratios
    for f in report.formats:
        ratio = ratios.get(f.format)
        lines.append(
            f"{f.format:<8} {f.files:>5} {f.total_bytes / 1e6:>9.1f} {f.cold_load_ms:>10.2f} "
            f"{f.warm_load_ms:>10.2f} {f.p50_ms:>9.3f} {f.p95_ms:>9.3f} "
            f"{'' if ratio is None else f'{ratio:.2f}':>7}"
        )
    lines.append(f"timer overhead {report.timer_overhead_ms * 1e3:.2f} us; {report.environment}")
    lines.append(report.disclaimer)
    return "\n".join(lines)
