"""Dataset ingestion and index serialization.

Supported dataset formats: IDX (big-endian magic, ubyte payload scaled to
[0, 1]), fvecs (per-vector little-endian int32 dimension header followed by
float32 values), and CSV (numeric columns, optional header row, optional
trailing label column). Index files use the RSSHIDX1 layout documented in
the README: a fixed 68-byte little-endian header, one record per level, and
a trailing CRC-32 of the body.
"""

import csv as _csv
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    ChecksumError,
    DimensionInconsistencyError,
    EmptyDatasetError,
    IndexFileError,
    InvalidParamsError,
    MalformedFileError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .index import BuildParams, CaptureMode, IndexModel, PartitionLevel, PointSet
from .linalg import SubspaceBasis

INDEX_MAGIC = b"RSSHIDX1"
INDEX_VERSION = 1
_HEADER = struct.Struct("<8sIIIQIdddqI")   # magic, version, d, k, total, levels,
                                           # epsilon, eta, alpha, seed, max_levels
_LEVEL_FIXED = struct.Struct("<IIQdB")     # level_id, k_i, members, threshold, mode

_MODE_CODES = {
    CaptureMode.PAPER_THRESHOLD: 0,
    CaptureMode.MEDIAN_FALLBACK: 1,
    CaptureMode.FINAL_SWEEP: 2,
}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}

DATASET_FORMATS = ("idx", "fvecs", "csv")


@dataclass(frozen=True)
class DatasetDescriptor:
    """Where a dataset lives and how to read it."""

    path: str | Path
    format: str
    limit: int | None = None
    label_path: str | Path | None = None
    csv_has_header: bool = False
    csv_label_column: bool = False

    def __post_init__(self):
        if self.format not in DATASET_FORMATS:
            raise InvalidParamsError(
                f"format must be one of {DATASET_FORMATS}, got {self.format!r}"
            )
        if self.limit is not None and self.limit < 1:
            raise InvalidParamsError(f"limit must be >= 1, got {self.limit}")


def _read_exact(f, count: int, what: str) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise MalformedFileError(
            f"unexpected end of file while reading {what}", offset=f.tell()
        )
    return data


def _load_idx_array(path) -> np.ndarray:
    """Raw IDX payload as a uint8 array shaped per the file's dimension list."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "IDX magic")
        if magic[0] != 0 or magic[1] != 0:
            raise MalformedFileError("bad IDX magic (first two bytes must be zero)", offset=0)
        dtype_code, ndim = magic[2], magic[3]
        if dtype_code != 0x08:
            raise MalformedFileError(
                f"unsupported IDX element type 0x{dtype_code:02x} (only ubyte 0x08)",
                offset=2,
            )
        if not 1 <= ndim <= 3:
            raise MalformedFileError(f"unsupported IDX rank {ndim}", offset=3)
        dims = struct.unpack(f">{ndim}I", _read_exact(f, 4 * ndim, "IDX dimensions"))
        count = int(np.prod(dims))
        payload = _read_exact(f, count, "IDX payload")
        extra = f.read(1)
        if extra:
            raise MalformedFileError("trailing bytes after IDX payload", offset=f.tell() - 1)
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def _load_idx(desc: DatasetDescriptor):
    arr = _load_idx_array(desc.path)
    if arr.ndim == 1:
        raise MalformedFileError(
            "IDX data file is rank 1; rank-1 IDX files hold labels", offset=3
        )
    points = arr.reshape(arr.shape[0], -1).astype(np.float64) / 255.0
    labels = None
    if desc.label_path is not None:
        raw = _load_idx_array(desc.label_path)
        if raw.ndim != 1:
            raise MalformedFileError("IDX label file must be rank 1", offset=3)
        if raw.shape[0] < arr.shape[0]:
            raise DimensionInconsistencyError(
                f"{raw.shape[0]} labels for {arr.shape[0]} points"
            )
        labels = raw
    return points, labels


def _load_fvecs(desc: DatasetDescriptor):
    raw = np.fromfile(desc.path, dtype=np.uint8)
    if raw.size == 0:
        raise EmptyDatasetError(f"{desc.path} is empty")
    if raw.size < 4:
        raise MalformedFileError("file shorter than one dimension header", offset=0)
    if raw.size % 4 != 0:
        raise MalformedFileError(
            "file length is not a multiple of 4", offset=(raw.size // 4) * 4
        )
    words = raw.view(np.int32)
    dim = int(words[0])
    if dim < 1:
        raise MalformedFileError(f"non-positive vector dimension {dim}", offset=0)
    stride = dim + 1
    if words.size % stride != 0:
        raise MalformedFileError(
            "file length does not hold a whole number of vectors",
            offset=(words.size // stride) * stride * 4,
        )
    table = words.reshape(-1, stride)
    dims = table[:, 0]
    bad = np.flatnonzero(dims != dim)
    if bad.size:
        raise DimensionInconsistencyError(
            f"vector {int(bad[0])} declares dimension {int(dims[bad[0]])}, "
            f"expected {dim}"
        )
    points = table[:, 1:].copy().view(np.float32).astype(np.float64)
    return points, None


def _parse_label(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _load_csv(desc: DatasetDescriptor):
    rows, labels = [], []
    width = None
    with open(desc.path, newline="") as f:
        reader = _csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1 and desc.csv_has_header:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DimensionInconsistencyError(
                    f"line {lineno}: {len(row)} columns, expected {width}"
                )
            values = row[:-1] if desc.csv_label_column else row
            try:
                rows.append([float(v) for v in values])
            except ValueError as exc:
                raise MalformedFileError(f"line {lineno}: {exc}") from None
            if desc.csv_label_column:
                labels.append(_parse_label(row[-1]))
    if not rows:
        raise EmptyDatasetError(f"{desc.path} holds no data rows")
    points = np.asarray(rows, dtype=np.float64)
    return points, (np.asarray(labels, dtype=object) if desc.csv_label_column else None)


def load_dataset(desc: DatasetDescriptor):
    """Load a dataset per its descriptor.

    Returns (PointSet, labels) where labels is an id-keyed dict or None.
    Ids are assigned 0..n-1 in (possibly truncated) row order.
    """
    loader = {"idx": _load_idx, "fvecs": _load_fvecs, "csv": _load_csv}[desc.format]
    points, raw_labels = loader(desc)
    if points.shape[0] == 0:
        raise EmptyDatasetError(f"{desc.path} holds no points")
    if desc.limit is not None:
        points = points[: desc.limit]
        if raw_labels is not None:
            raw_labels = raw_labels[: desc.limit]
    labels = None
    if raw_labels is not None:
        labels = {i: raw_labels[i] for i in range(points.shape[0])}
        labels = {
            i: int(v) if isinstance(v, (int, np.integer)) else v
            for i, v in labels.items()
        }
    return PointSet.from_points(points), labels


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a rank-3 ubyte IDX file (n, rows, cols)."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise InvalidParamsError("images must be (n, rows, cols)")
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, 0x08, 3))
        f.write(struct.pack(">3I", *images.shape))
        f.write(images.tobytes())


def write_idx_labels(path, labels) -> None:
    """Write a rank-1 ubyte IDX label file."""
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">BBBB", 0, 0, 0x08, 1))
        f.write(struct.pack(">I", labels.shape[0]))
        f.write(labels.tobytes())


def write_fvecs(path, vectors: np.ndarray) -> None:
    """Write an fvecs file (little-endian dim header per vector)."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise InvalidParamsError("vectors must be 2-D")
    n, d = vectors.shape
    out = np.empty((n, d + 1), dtype=np.int32)
    out[:, 0] = d
    out[:, 1:] = vectors.view(np.int32)
    out.tofile(path)


def write_csv(path, points: np.ndarray, labels=None) -> None:
    """Write points (and an optional trailing label column) as CSV."""
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w", newline="") as f:
        writer = _csv.writer(f)
        for i, row in enumerate(points):
            out = [repr(float(v)) for v in row]
            if labels is not None:
                out.append(labels[i])
            writer.writerow(out)


def _level_bytes(level: PartitionLevel, d: int) -> bytes:
    basis = level.basis
    chunks = [
        _LEVEL_FIXED.pack(
            level.level_id,
            basis.k,
            level.member_ids.shape[0],
            level.threshold_used,
            _MODE_CODES[level.capture_mode],
        ),
        np.ascontiguousarray(basis.singular_values, dtype="<f8").tobytes(),
        np.ascontiguousarray(basis.basis, dtype="<f8").tobytes(),
        np.ascontiguousarray(level.member_ids, dtype="<i8").tobytes(),
    ]
    return b"".join(chunks)


def save_index(model: IndexModel, path) -> None:
    """Serialize an IndexModel to the RSSHIDX1 binary layout."""
    p = model.params
    header = _HEADER.pack(
        INDEX_MAGIC,
        INDEX_VERSION,
        model.d,
        p.k,
        model.total_points,
        len(model.levels),
        p.epsilon,
        p.eta,
        p.alpha,
        p.seed,
        0 if p.max_levels is None else p.max_levels,
    )
    body = b"".join(_level_bytes(level, model.d) for level in model.levels)
    with open(path, "wb") as f:
        f.write(header)
        f.write(body)
        f.write(struct.pack("<I", zlib.crc32(body)))


class _Cursor:
    """Sequential reader over the body bytes with strict bounds checks."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise TruncatedFileError(
                f"file ended inside {what} (needed {count} bytes at body "
                f"offset {self.pos})"
            )
        out = self.data[self.pos : self.pos + count]
        self.pos += count
        return out


def load_index(path) -> IndexModel:
    """Read an RSSHIDX1 file back into an IndexModel.

    The header is validated before the body is parsed; the body must match
    its stored CRC-32 exactly."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < len(INDEX_MAGIC) or not raw.startswith(INDEX_MAGIC):
        raise BadMagicError(f"{path} is not an index file (magic mismatch)")
    if len(raw) < _HEADER.size + 4:
        raise TruncatedFileError(f"{path} is shorter than an index header")
    (
        _magic,
        version,
        d,
        k,
        total_points,
        level_count,
        epsilon,
        eta,
        alpha,
        seed,
        max_levels,
    ) = _HEADER.unpack_from(raw, 0)
    if version != INDEX_VERSION:
        raise UnsupportedVersionError(
            f"index version {version} not supported (expected {INDEX_VERSION})"
        )
    body = raw[_HEADER.size : -4]
    # structural parse first so truncation is reported as such, then the CRC
    # gate, and only then typed validation of genuine bytes
    cursor = _Cursor(body)
    raw_levels = []
    for _ in range(level_count):
        level_id, k_i, members, threshold, mode_code = _LEVEL_FIXED.unpack(
            cursor.take(_LEVEL_FIXED.size, "level header")
        )
        sv = cursor.take(8 * k_i, "singular values")
        basis = cursor.take(8 * d * k_i, "basis matrix")
        ids = cursor.take(8 * members, "member ids")
        raw_levels.append((level_id, k_i, threshold, mode_code, sv, basis, ids))
    if cursor.pos != len(body):
        raise IndexFileError(
            f"{len(body) - cursor.pos} unexpected trailing bytes in body"
        )
    (stored_crc,) = struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != stored_crc:
        raise ChecksumError("body CRC-32 mismatch; file is corrupt or truncated")
    levels = []
    for level_id, k_i, threshold, mode_code, sv, basis, ids in raw_levels:
        if mode_code not in _CODE_MODES:
            raise IndexFileError(f"unknown capture mode code {mode_code}")
        levels.append(
            PartitionLevel(
                level_id=level_id,
                basis=SubspaceBasis(
                    dim=d,
                    k=k_i,
                    basis=np.frombuffer(basis, dtype="<f8").reshape(d, k_i),
                    singular_values=np.frombuffer(sv, dtype="<f8"),
                ),
                member_ids=np.frombuffer(ids, dtype="<i8"),
                threshold_used=threshold,
                capture_mode=_CODE_MODES[mode_code],
            )
        )
    params = BuildParams(
        k=k,
        epsilon=epsilon,
        eta=eta,
        alpha=alpha,
        seed=seed,
        max_levels=None if max_levels == 0 else max_levels,
    )
    return IndexModel(params=params, levels=tuple(levels), d=d, total_points=total_points)


def index_file_size(model: IndexModel) -> int:
    """Exact on-disk size in bytes of the serialized model."""
    size = _HEADER.size + 4  # header + trailing CRC
    for level in model.levels:
        k_i = level.basis.k
        size += _LEVEL_FIXED.size + 8 * k_i + 8 * model.d * k_i
        size += 8 * level.member_ids.shape[0]
    return size
