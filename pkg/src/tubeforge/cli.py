"""``tubeforge`` command line.

Subcommands: extract, augment, metrics, split, gen-corpus, bench.
Errors print ``error[<category>:<Name>] <message>`` as a single line on
stderr and exit nonzero (2 config, 3 ingest, 4 io, 1 anything else).
Log level comes from the TUBEFORGE_LOG environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentSpec, augment_clip
from .bench import ACCESS_PATTERNS, format_table, generate_corpus, run_bench
from .cluster import Linking
from .containers import FORMATS, read_manifest
from .errors import ConfigError, IngestError, IoFailure, TubeforgeError
from .ingest import (
    open_frames,
    read_detections,
    read_labels,
    write_image_directory,
    write_raw_frames,
)
from .metrics import (
    confusion,
    format_metrics_table,
    metrics_report,
    read_predictions,
    validate_split,
)
from .pipeline import PipelineConfig, run_extract

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

log = logging.getLogger("tubeforge")

EXIT_CODES = {"config": 2, "ingest": 3, "io": 4}


def load_config_file(path) -> dict:
    """Pipeline settings from a TOML file; keys may use dashes or underscores.

    Settings may sit at top level or under an ``[extract]`` table.
    """
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw = {**{k: v for k, v in raw.items() if not isinstance(v, dict)}, **raw.get("extract", {})}
    known = {f.name for f in fields(PipelineConfig)}
    out = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"{path}: unknown setting {key!r}")
        out[name] = value
    return out


def _add_extract(sub):
    p = sub.add_parser("extract", help="cut a video into labeled action tubes")
    p.add_argument("--frames", required=True, help="raw RGB24 file or frame_%%06d.png directory")
    p.add_argument("--width", type=int, help="frame width (raw streams)")
    p.add_argument("--height", type=int, help="frame height (raw streams)")
    p.add_argument("--detections", required=True, help="detections JSONL")
    p.add_argument("--labels", required=True, help="annotation CSV (start,end,label)")
    p.add_argument("--out", dest="out_dir", help="output directory for tubes and manifest.json")
    p.add_argument("--source-id", help="prefix for tube file names (default: frames file stem)")
    p.add_argument("--config", help="TOML file with pipeline settings; flags override it")
    p.add_argument("--volume-length", type=int)
    p.add_argument("--fight-fraction", type=float, help="volume is Fight above this fraction (strict)")
    p.add_argument("--iou-threshold", type=float)
    p.add_argument("--linking", choices=[m.value for m in Linking])
    p.add_argument("--min-cluster-boxes", type=int)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--chunk-frames", type=int)
    p.add_argument("--out-size", type=int, help="tube frame side in pixels (default 224)")
    p.add_argument("--workers", type=int)
    p.add_argument("--pad-remainder", action="store_true", default=None,
                   help="pad the trailing partial volume by repeating the last frame")
    p.add_argument("--person-class", type=int)
    p.add_argument("--split", choices=["train", "test", "val"])
    p.add_argument("--debug-clusters", help="write a per-volume cluster dump (JSON) here")
    p.set_defaults(func=cmd_extract)


def cmd_extract(args) -> int:
    config = PipelineConfig(**load_config_file(args.config)) if args.config else PipelineConfig()
    size = args.out_size
    config = config.updated(
        volume_length=args.volume_length, fight_fraction=args.fight_fraction,
        iou_threshold=args.iou_threshold, linking=args.linking,
        min_cluster_boxes=args.min_cluster_boxes, format=args.format,
        chunk_frames=args.chunk_frames, workers=args.workers, out_dir=args.out_dir,
        pad_remainder=args.pad_remainder, person_class=args.person_class, split=args.split,
        out_width=size, out_height=size,
    ).validate()

    frames = open_frames(args.frames, args.width, args.height)
    labels = read_labels(args.labels, frames.frame_count)
    detections = read_detections(args.detections, config.person_class)
    source_id = args.source_id or Path(args.frames).stem
    _, summary = run_extract(frames, labels, detections, config, source_id, args.debug_clusters)
    print(summary.line())
    return 0


def _add_augment(sub):
    p = sub.add_parser("augment", help="composite masked foreground onto a new background")
    p.add_argument("--frames", required=True)
    p.add_argument("--masks", required=True, help="single-channel raw stream or frame_%%06d.png directory")
    p.add_argument("--background", required=True, help="image file, raw RGB24 file or frame directory")
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--threshold", type=int, default=128, help="mask binarization threshold")
    p.add_argument("--feather", type=int, default=0, help="box-blur radius for the mask edge")
    p.set_defaults(func=cmd_augment)


def _load_background(path, width, height) -> np.ndarray:
    if os.path.isfile(path) and not path.endswith((".rgb", ".raw", ".bin")):
        from PIL import Image
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    return open_frames(path, width, height).read(1 << 30)


def cmd_augment(args) -> int:
    frames = open_frames(args.frames, args.width, args.height)
    masks = open_frames(args.masks, frames.width, frames.height, channels=1)
    background = _load_background(args.background, frames.width, frames.height)
    spec = AugmentSpec(args.threshold, args.feather)
    out = augment_clip(list(frames), list(masks), background, spec)
    if frames.mode == "image-directory":
        write_image_directory(args.out, out)
    else:
        write_raw_frames(args.out, out)
    print(f"frames={len(out)} out={args.out}")
    return 0


def _emit(report: dict, table: str, output: str | None, quiet: bool) -> None:
    text = json.dumps(report, indent=1, sort_keys=True)
    if output:
        Path(output).write_text(text + "\n")
    else:
        print(text)
    if not quiet:
        print(table, file=sys.stderr)


def _add_metrics(sub):
    p = sub.add_parser("metrics", help="confusion matrix and metrics from a predictions CSV")
    p.add_argument("predictions", help="CSV with columns tube_id,predicted,true")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--quiet", action="store_true", help="skip the text table on stderr")
    p.set_defaults(func=cmd_metrics)


def cmd_metrics(args) -> int:
    rows = read_predictions(args.predictions)
    report = metrics_report(confusion((pred, true) for _, pred, true in rows))
    _emit(report, format_metrics_table(report), args.output, args.quiet)
    return 0


def _add_split(sub):
    p = sub.add_parser("split", help="check train/test/val proportions of three manifests")
    p.add_argument("train")
    p.add_argument("test")
    p.add_argument("val")
    p.add_argument("--target", default="0.70,0.10,0.20")
    p.add_argument("--tolerance", type=float, default=0.02)
    p.set_defaults(func=cmd_split)


def cmd_split(args) -> int:
    target = tuple(float(x) for x in args.target.split(","))
    if len(target) != 3:
        raise ConfigError(f"--target needs three fractions, got {args.target!r}")
    report = validate_split(read_manifest(args.train), read_manifest(args.test), read_manifest(args.val),
                            target, args.tolerance)
    print(json.dumps({"fractions": dict(zip(("train", "test", "val"), report.fractions)),
                      "counts": report.counts, "consistent": report.consistent,
                      "warnings": report.warnings}, indent=1))
    return 0


def _parse_shape(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"shape must be comma-separated integers, got {text!r}") from None


def _add_corpus(sub):
    p = sub.add_parser("gen-corpus", help="write a seeded random tube corpus in every format")
    p.add_argument("--count", type=int, default=32)
    p.add_argument("--shape", type=_parse_shape, default=(128, 224, 224, 3))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunk-frames", type=int, default=16)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_corpus)


def cmd_gen_corpus(args) -> int:
    corpus = generate_corpus(args.count, args.shape, args.seed, args.out, args.chunk_frames)
    print(f"tubes={len(corpus.items)} formats={len(FORMATS)} out={args.out}")
    return 0


def _add_bench(sub):
    p = sub.add_parser("bench", help="time loading a corpus in each format")
    p.add_argument("--corpus", required=True)
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--access", choices=ACCESS_PATTERNS, default="full-read")
    p.add_argument("--cache-evasion-mb", type=int, default=0,
                   help="read this much scratch data before each cold pass")
    p.add_argument("--seed", type=int, default=0, help="seed for random-frame indices")
    p.add_argument("--output", help="write the JSON report here instead of stdout")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)


def cmd_bench(args) -> int:
    report = run_bench(args.corpus, args.repetitions, args.access, args.cache_evasion_mb << 20, args.seed)
    _emit(report.to_json(), format_table(report), args.output, args.quiet)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tubeforge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_extract, _add_augment, _add_metrics, _add_split, _add_corpus, _add_bench):
        add(sub)
    return parser


def setup_logging() -> None:
    level = os.environ.get("TUBEFORGE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fail(code: str, message: str, exit_code: int) -> int:
    print(f"error[{code}] {message}".replace("\n", " "), file=sys.stderr)
    return exit_code


def main(argv=None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TubeforgeError as exc:
        return _fail(exc.code, str(exc), EXIT_CODES.get(exc.category, 1))
    except ValueError as exc:
        return _fail(f"config:{type(exc).__name__}", str(exc), EXIT_CODES["config"])
    except OSError as exc:
        return _fail(f"io:{type(exc).__name__}", str(exc), EXIT_CODES["io"])


if __name__ == "__main__":
    sys.exit(main())
