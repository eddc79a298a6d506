"""On-disk tensor containers for unsigned-byte tubes, plus dataset manifests.

Three encodings of the same payload:

``npy``      NPY 1.0, ``|u1``, C order, header padded to a 64-byte boundary.
``flatbin``  raw payload; shape/dtype/checksum in a ``<path>.json`` sidecar.
``chunked``  small header, (offset, length) chunk index, frame-aligned chunks.
             Byte layout in docs/formats.md.

All readers accept an optional :class:`ReadStats` that counts bytes pulled
from disk, which the benchmark uses to check access patterns.
"""

from __future__ import annotations

import ast
import io
import json
import math
import os
import struct
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .errors import (
    BadMagic,
    ChecksumMismatch,
    CorruptIndex,
    CountMismatch,
    HeaderParseError,
    IoFailure,
    PayloadTruncated,
    ShapeMismatch,
    SidecarMissing,
    UnsupportedDescr,
)
from .labels import Label

FORMATS = ("npy", "flatbin", "chunked")
SUFFIX = {"npy": ".npy", "flatbin": ".bin", "chunked": ".tch"}

NPY_MAGIC = b"\x93NUMPY"
NPY_ALIGN = 64
CHUNK_MAGIC = b"TUBECHNK"
CHUNK_VERSION = 1

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


@njit(cache=True)
def _fnv1a64(buf):
    h = np.uint64(FNV_OFFSET)
    prime = np.uint64(FNV_PRIME)
    for b in buf:
        h ^= np.uint64(b)
        h *= prime
    return h


def fnv1a64(data) -> int:
    """64-bit FNV-1a over the raw bytes of ``data``."""
    if isinstance(data, (bytes, bytearray, memoryview)):
        buf = np.frombuffer(data, dtype=np.uint8)
    else:
        buf = np.ascontiguousarray(data).reshape(-1).view(np.uint8)
    return int(_fnv1a64(buf))


def checksum_hex(value: int) -> str:
    return f"{value:016x}"


class ReadStats:
    def __init__(self):
        self.bytes_read = 0
        self.reads = 0


class _CountingFile(io.RawIOBase):
    def __init__(self, path, stats: ReadStats | None):
        self._fh = open(path, "rb", buffering=0)
        self._stats = stats

    def readinto(self, b):
        n = self._fh.readinto(b)
        if self._stats is not None and n:
            self._stats.bytes_read += n
            self._stats.reads += 1
        return n

    def readable(self):
        return True

    def seekable(self):
        return True

    def seek(self, offset, whence=os.SEEK_SET):
        return self._fh.seek(offset, whence)

    def tell(self):
        return self._fh.tell()

    def close(self):
        self._fh.close()
        super().close()


def _open(path, stats):
    try:
        return _CountingFile(path, stats)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror}") from exc


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = bytearray(n)
    view = memoryview(buf)
    got = 0
    while got < n:
        k = fh.readinto(view[got:])
        if not k:
            raise PayloadTruncated(f"{what}: expected {n} bytes, file ended after {got}")
        got += k
    return bytes(buf)


def _read_array(fh, n: int, what: str) -> np.ndarray:
    arr = np.empty(n, dtype=np.uint8)
    view = memoryview(arr)
    got = 0
    while got < n:
        k = fh.readinto(view[got:])
        if not k:
            raise PayloadTruncated(f"{what}: expected {n} payload bytes, file ended after {got}")
        got += k
    return arr


@dataclass
class TensorContainer:
    format: str
    shape: tuple[int, ...]
    path: str
    checksum: int
    element_type: str = "u1"

    @property
    def nbytes(self) -> int:
        return math.prod(self.shape)


def _payload(data, shape) -> tuple[np.ndarray, tuple[int, ...]]:
    shape = tuple(int(d) for d in shape)
    if len(shape) == 0:
        raise ShapeMismatch("scalar tensors are not supported; shape must have at least one dimension")
    if any(d < 0 for d in shape):
        raise ShapeMismatch(f"negative dimension in {shape}")
    arr = np.asarray(data)
    if arr.dtype != np.uint8:
        if isinstance(data, (bytes, bytearray, memoryview)):
            arr = np.frombuffer(data, dtype=np.uint8)
        else:
            raise ShapeMismatch(f"only unsigned bytes are supported, got {arr.dtype}")
    flat = np.ascontiguousarray(arr).reshape(-1)
    if flat.size != math.prod(shape):
        raise ShapeMismatch(f"{flat.size} bytes of data do not fill shape {shape}")
    return flat, shape


def _write_bytes(path, parts: Sequence) -> None:
    try:
        with open(path, "wb") as fh:
            for part in parts:
                fh.write(part)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc.strerror}") from exc


# npy -----------------------------------------------------------------------

def npy_header(shape: tuple[int, ...]) -> bytes:
    """Magic, version, length and padded dict; a multiple of 64 bytes long."""
    dims = ", ".join(str(d) for d in shape)
    if len(shape) == 1:
        dims += ","
    text = "{'descr': '|u1', 'fortran_order': False, 'shape': (%s), }" % dims
    prefix = len(NPY_MAGIC) + 2 + 2
    total = prefix + len(text) + 1
    text += " " * (-total % NPY_ALIGN) + "\n"
    if len(text) > 0xFFFF:
        raise ShapeMismatch(f"shape {shape} needs a header longer than NPY 1.0 allows")
    return NPY_MAGIC + b"\x01\x00" + struct.pack("<H", len(text)) + text.encode("latin1")


def write_npy(data, shape, path) -> TensorContainer:
    flat, shape = _payload(data, shape)
    _write_bytes(path, [npy_header(shape), memoryview(flat)])
    return TensorContainer("npy", shape, str(path), fnv1a64(flat))


def _parse_npy_header(fh, path) -> tuple[tuple[int, ...], int]:
    magic = fh.read(len(NPY_MAGIC))
    if magic != NPY_MAGIC:
        raise BadMagic(f"{path}: not an NPY file")
    head = _read_exact(fh, 4, f"{path} header")
    major, minor = head[0], head[1]
    if (major, minor) != (1, 0):
        raise HeaderParseError(f"{path}: NPY version {major}.{minor} unsupported (1.0 only)")
    (hlen,) = struct.unpack("<H", head[2:])
    raw = _read_exact(fh, hlen, f"{path} header")
    try:
        header = ast.literal_eval(raw.decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise HeaderParseError(f"{path}: malformed header dict") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise HeaderParseError(f"{path}: header must hold exactly descr, fortran_order, shape")
    if header["descr"] not in ("|u1", "<u1"):
        raise UnsupportedDescr(f"{path}: dtype {header['descr']!r} unsupported (unsigned bytes only)")
    if header["fortran_order"] is not False:
        raise UnsupportedDescr(f"{path}: fortran_order arrays unsupported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise HeaderParseError(f"{path}: bad shape {shape!r}")
    return shape, len(NPY_MAGIC) + 4 + hlen


def read_npy(path, stats: ReadStats | None = None) -> tuple[tuple[int, ...], np.ndarray]:
    with _open(path, stats) as fh:
        shape, _ = _parse_npy_header(fh, path)
        data = _read_array(fh, math.prod(shape), str(path))
    return shape, data.reshape(shape)


def read_npy_frame(path, index: int, stats: ReadStats | None = None) -> np.ndarray:
    """One slice along the first axis, reading only the header and that slice."""
    with _open(path, stats) as fh:
        shape, offset = _parse_npy_header(fh, path)
        frame = _check_frame(shape, index, path)
        fh.seek(offset + index * frame)
        return _read_array(fh, frame, str(path)).reshape(shape[1:])


def _check_frame(shape, index, path) -> int:
    if not 0 <= index < shape[0]:
        raise IndexError(f"{path}: frame {index} out of range for shape {shape}")
    return math.prod(shape[1:])


# flatbin -------------------------------------------------------------------

def sidecar_path(path) -> str:
    return str(path) + ".json"


def write_flatbin(data, shape, path) -> TensorContainer:
    flat, shape = _payload(data, shape)
    checksum = fnv1a64(flat)
    _write_bytes(path, [memoryview(flat)])
    meta = {"format": "flatbin", "shape": list(shape), "dtype": "u1", "checksum": checksum_hex(checksum)}
    _write_bytes(sidecar_path(path), [json.dumps(meta, indent=1).encode()])
    return TensorContainer("flatbin", shape, str(path), checksum)


def read_sidecar(path) -> dict:
    try:
        with open(sidecar_path(path)) as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        raise SidecarMissing(f"{path}: sidecar {sidecar_path(path)} not found") from None
    except json.JSONDecodeError as exc:
        raise HeaderParseError(f"{sidecar_path(path)}: {exc.msg}") from None
    if meta.get("dtype") not in ("u1", "|u1", "<u1"):
        raise UnsupportedDescr(f"{path}: dtype {meta.get('dtype')!r} unsupported")
    meta["shape"] = tuple(meta["shape"])
    return meta


def read_flatbin(path, stats: ReadStats | None = None, verify: bool = False):
    meta = read_sidecar(path)
    shape = meta["shape"]
    with _open(path, stats) as fh:
        data = _read_array(fh, math.prod(shape), str(path))
        if fh.read(1):
            raise ShapeMismatch(f"{path}: file is longer than shape {shape}")
    if verify and checksum_hex(fnv1a64(data)) != meta["checksum"]:
        raise ChecksumMismatch(f"{path}: payload checksum differs from sidecar")
    return shape, data.reshape(shape)


def read_flatbin_frame(path, index: int, stats: ReadStats | None = None) -> np.ndarray:
    shape = read_sidecar(path)["shape"]
    frame = _check_frame(shape, index, path)
    with _open(path, stats) as fh:
        fh.seek(index * frame)
        return _read_array(fh, frame, str(path)).reshape(shape[1:])


def open_flatbin_memmap(path) -> np.memmap:
    shape = read_sidecar(path)["shape"]
    return np.memmap(path, dtype=np.uint8, mode="r", shape=shape)


# chunked -------------------------------------------------------------------

_CHUNK_HEAD = struct.Struct("<8sHHI")  # magic, version, ndim, chunk_frames


@dataclass
class ChunkIndex:
    shape: tuple[int, ...]
    chunk_frames: int
    entries: list[tuple[int, int]]

    @property
    def frame_bytes(self) -> int:
        return math.prod(self.shape[1:])


def write_chunked(data, shape, path, chunk_frames: int = 16) -> TensorContainer:
    if chunk_frames < 1:
        raise ValueError(f"chunk_frames must be >= 1, got {chunk_frames}")
    flat, shape = _payload(data, shape)
    frames = shape[0]
    frame_bytes = math.prod(shape[1:])
    n_chunks = math.ceil(frames / chunk_frames)
    head = _CHUNK_HEAD.pack(CHUNK_MAGIC, CHUNK_VERSION, len(shape), chunk_frames)
    head += struct.pack(f"<{len(shape)}Q", *shape) + struct.pack("<Q", n_chunks)
    offset = len(head) + 16 * n_chunks
    index = []
    for c in range(n_chunks):
        length = (min(frames, (c + 1) * chunk_frames) - c * chunk_frames) * frame_bytes
        index.append((offset, length))
        offset += length
    table = b"".join(struct.pack("<QQ", o, n) for o, n in index)
    _write_bytes(path, [head, table, memoryview(flat)])
    return TensorContainer("chunked", shape, str(path), fnv1a64(flat))


def read_chunk_index(fh, path, file_size: int) -> ChunkIndex:
    raw = _read_exact(fh, _CHUNK_HEAD.size, f"{path} header")
    magic, version, ndim, chunk_frames = _CHUNK_HEAD.unpack(raw)
    if magic != CHUNK_MAGIC:
        raise BadMagic(f"{path}: not a chunked tube file")
    if version != CHUNK_VERSION:
        raise HeaderParseError(f"{path}: chunked version {version} unsupported")
    if ndim < 1 or chunk_frames < 1:
        raise HeaderParseError(f"{path}: bad ndim {ndim} or chunk_frames {chunk_frames}")
    shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim, f"{path} shape"))
    (count,) = struct.unpack("<Q", _read_exact(fh, 8, f"{path} chunk count"))
    if count != math.ceil(shape[0] / chunk_frames):
        raise CorruptIndex(f"{path}: {count} chunks cannot hold {shape[0]} frames of {chunk_frames}")
    table = _read_exact(fh, 16 * count, f"{path} chunk index")
    entries = [struct.unpack_from("<QQ", table, 16 * i) for i in range(count)]
    index = ChunkIndex(tuple(shape), chunk_frames, entries)

    data_start = _CHUNK_HEAD.size + 8 * ndim + 8 + 16 * count
    prev_end = data_start
    for offset, length in sorted(entries):
        if offset < prev_end:
            raise CorruptIndex(f"{path}: chunk at offset {offset} overlaps header or previous chunk")
        if offset + length > file_size:
            raise CorruptIndex(f"{path}: chunk at offset {offset} runs past end of file ({file_size})")
        prev_end = offset + length
    for c, (_, length) in enumerate(entries):
        frames = min(shape[0], (c + 1) * chunk_frames) - c * chunk_frames
        if length != frames * index.frame_bytes:
            raise CorruptIndex(f"{path}: chunk {c} length {length} is not {frames} whole frames")
    return index


def read_chunked(path, stats: ReadStats | None = None) -> tuple[tuple[int, ...], np.ndarray]:
    size = os.path.getsize(path)
    with _open(path, stats) as fh:
        index = read_chunk_index(fh, path, size)
        out = np.empty(math.prod(index.shape), dtype=np.uint8)
        pos = 0
        for offset, length in index.entries:
            fh.seek(offset)
            out[pos:pos + length] = _read_array(fh, length, str(path))
            pos += length
    return index.shape, out.reshape(index.shape)


def read_chunk(path, chunk: int, stats: ReadStats | None = None) -> np.ndarray:
    """Frames of a single chunk, ``(frames_in_chunk, *shape[1:])``."""
    size = os.path.getsize(path)
    with _open(path, stats) as fh:
        index = read_chunk_index(fh, path, size)
        if not 0 <= chunk < len(index.entries):
            raise IndexError(f"{path}: chunk {chunk} out of range ({len(index.entries)} chunks)")
        offset, length = index.entries[chunk]
        fh.seek(offset)
        data = _read_array(fh, length, str(path))
    return data.reshape((-1,) + index.shape[1:])


def read_chunked_frame(path, index: int, stats: ReadStats | None = None) -> np.ndarray:
    size = os.path.getsize(path)
    with _open(path, stats) as fh:
        idx = read_chunk_index(fh, path, size)
        _check_frame(idx.shape, index, path)
        chunk, within = divmod(index, idx.chunk_frames)
        offset, length = idx.entries[chunk]
        fh.seek(offset)
        data = _read_array(fh, length, str(path))
    return data.reshape((-1,) + idx.shape[1:])[within]


# dispatch ------------------------------------------------------------------

def write_tensor(fmt: str, data, shape, path, chunk_frames: int = 16) -> TensorContainer:
    if fmt == "npy":
        return write_npy(data, shape, path)
    if fmt == "flatbin":
        return write_flatbin(data, shape, path)
    if fmt == "chunked":
        return write_chunked(data, shape, path, chunk_frames)
    raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


_READERS = {"npy": read_npy, "flatbin": read_flatbin, "chunked": read_chunked}
_FRAME_READERS = {"npy": read_npy_frame, "flatbin": read_flatbin_frame, "chunked": read_chunked_frame}


def read_tensor(fmt: str, path, stats: ReadStats | None = None):
    return _READERS[fmt](path, stats)


def read_frame(fmt: str, path, index: int, stats: ReadStats | None = None) -> np.ndarray:
    return _FRAME_READERS[fmt](path, index, stats)


def format_of(path) -> str:
    for fmt, suffix in SUFFIX.items():
        if str(path).endswith(suffix):
            return fmt
    raise ValueError(f"cannot infer container format from {path}")


# manifest ------------------------------------------------------------------

@dataclass
class ManifestEntry:
    path: str
    format: str
    shape: tuple[int, ...]
    label: Label
    checksum: str
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        d["label"] = self.label.value
        return d

    @classmethod
    def from_json(cls, d: dict) -> ManifestEntry:
        return cls(d["path"], d["format"], tuple(d["shape"]), Label.parse(d["label"]),
                   d["checksum"], d.get("provenance", {}))


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    split: str = "train"

    @property
    def counts(self) -> dict[str, int]:
        counts = {label.value: 0 for label in Label}
        for e in self.entries:
            counts[e.label.value] += 1
        return counts

    def __len__(self):
        return len(self.entries)

    def to_json(self) -> dict:
        return {"split": self.split, "counts": self.counts,
                "entries": [e.to_json() for e in self.entries]}


SPLITS = ("train", "test", "val")


def write_manifest(entries: Sequence[ManifestEntry], split: str, path) -> DatasetManifest:
    """Atomic JSON write (temp file in the same directory, then rename)."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    manifest = DatasetManifest(list(entries), split)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return manifest


def read_manifest(path) -> DatasetManifest:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise IoFailure(f"{path}: manifest not found") from None
    except json.JSONDecodeError as exc:
        raise HeaderParseError(f"{path}: {exc.msg}") from None
    manifest = DatasetManifest([ManifestEntry.from_json(e) for e in raw["entries"]], raw["split"])
    stored = {Label.parse(k).value: v for k, v in raw.get("counts", {}).items()}
    if stored != manifest.counts:
        raise CountMismatch(f"{path}: stored counts {stored} != recomputed {manifest.counts}")
    return manifest
