"""Persistence: the PTMPS1 tensor container and tabular result files.

PTMPS1 layout (all integers and floats little-endian)::

    b"PTMPS1"                 magic
    u32 0x01020304            endianness marker
    u16 version
    header                    see ``_HEADER``
    f64 * n_discarded         discarded weights
    per tensor: u8 rank, u64 * rank extents, complex128 * prod(extents)
    u64 checksum              blake2b-64 of every preceding byte

Result tables are CSV (``#``-prefixed metadata lines, then one header row)
or JSON (``{"metadata": ..., "columns": ..., "rows": ...}``).
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import struct
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .circuit import GateParams
from .errors import ChecksumError, FormatVersionError, PersistenceError, TruncatedFileError
from .process_tensor import CrossBlockMode, Scheme, Side, TemporalMPS, TruncationConfig

MAGIC = b"PTMPS1"
VERSION = 1
_ENDIAN = struct.pack("<I", 0x01020304)
# d, side, depth, has_params, j, jprime, chi_max, cutoff, mode, scheme, n_tensors, n_discarded
_HEADER = struct.Struct("<IBIBddIdBBII")
_SIDES = [Side.LEFT, Side.RIGHT]
_MODES = list(CrossBlockMode)
_SCHEMES = list(Scheme)
_DTYPE = np.dtype("<c16")


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def encode_ptmps(pt: TemporalMPS) -> bytes:
    buf = _io.BytesIO()
    buf.write(MAGIC)
    buf.write(_ENDIAN)
    buf.write(struct.pack("<H", VERSION))
    cfg = pt.trunc_config
    gp = pt.gate_params
    d = gp.local_dim if gp is not None else int(round(np.sqrt(pt.physical_dim)))
    buf.write(
        _HEADER.pack(
            d,
            _SIDES.index(pt.side),
            pt.depth,
            gp is not None,
            gp.j if gp else 0.0,
            gp.jprime if gp else 0.0,
            cfg.chi_max,
            cfg.cutoff,
            _MODES.index(cfg.cross_block_mode),
            _SCHEMES.index(cfg.scheme),
            len(pt.site_tensors),
            len(pt.discarded_weights),
        )
    )
    buf.write(np.asarray(pt.discarded_weights, dtype="<f8").tobytes())
    for t in pt.site_tensors:
        buf.write(struct.pack("<B", t.ndim))
        buf.write(struct.pack(f"<{t.ndim}Q", *t.shape))
        buf.write(np.ascontiguousarray(t, dtype=_DTYPE).tobytes())
    body = buf.getvalue()
    return body + _checksum(body)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(f"unexpected end of data at byte {self.pos} (wanted {n} more)")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str | struct.Struct):
        s = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        return s.unpack(self.take(s.size))


def _layout_end(r: _Reader, n_tensors: int, n_weights: int) -> list[tuple[int, tuple[int, ...]]]:
    """Walk the records without copying; returns ``(offset, shape)`` per tensor."""
    r.take(8 * n_weights)
    out = []
    for _ in range(n_tensors):
        (rank,) = r.unpack("<B")
        shape = r.unpack(f"<{rank}Q")
        count = 1
        for e in shape:
            count *= e
        out.append((r.pos, shape))
        r.take(_DTYPE.itemsize * count)
    return out


def decode_ptmps(data: bytes) -> TemporalMPS:
    """Parse a PTMPS1 byte string.

    Raises:
        TruncatedFileError: the data ends before the last record or checksum.
        ChecksumError: the stored checksum does not match.
        FormatVersionError: foreign magic, byte order or version.
    """
    head = data[: len(MAGIC)]
    if head != MAGIC:
        if len(data) < len(MAGIC) and MAGIC.startswith(head):
            raise TruncatedFileError("file ends inside the magic")
        raise FormatVersionError("not a PTMPS file")
    r = _Reader(data)
    r.take(len(MAGIC))
    endian = r.take(4)
    (version,) = r.unpack("<H")
    if endian != _ENDIAN or version != VERSION:
        if len(data) >= r.pos + 8 and _checksum(data[:-8]) != data[-8:]:
            raise ChecksumError("checksum mismatch")
        raise FormatVersionError(f"unsupported byte order or format version {version} (reader handles {VERSION})")
    d, side, depth, has_params, j, jp, chi, cutoff, mode, scheme, n_t, n_w = r.unpack(_HEADER)
    records = _layout_end(r, n_t, n_w)
    body_end = r.pos
    r.take(8)
    if _checksum(data[:body_end]) != data[body_end : body_end + 8]:
        raise ChecksumError("checksum mismatch")
    if len(data) != body_end + 8:
        raise PersistenceError(f"{len(data) - body_end - 8} trailing bytes after the checksum")
    hdr_end = len(MAGIC) + 6 + _HEADER.size
    weights = np.frombuffer(data, dtype="<f8", count=n_w, offset=hdr_end)
    tensors = []
    for off, shape in records:
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype=_DTYPE, count=count, offset=off).reshape(shape)
        tensors.append(arr.astype(np.complex128))
    try:
        params = GateParams(j, jp, d) if has_params else None
        cfg = TruncationConfig(chi, cutoff, _MODES[mode], _SCHEMES[scheme])
        return TemporalMPS(_SIDES[side], depth, tuple(tensors), params, cfg, tuple(weights))
    except (IndexError, ValueError) as exc:
        raise PersistenceError(f"malformed PTMPS payload: {exc}") from exc


def write_ptmps(pt: TemporalMPS, path: str | os.PathLike) -> Path:
    """Write atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(encode_ptmps(pt))
        os.replace(tmp, path)
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
    return path


def read_ptmps(path: str | os.PathLike) -> TemporalMPS:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise PersistenceError(f"cannot read {path}: {exc}") from exc
    return decode_ptmps(data)


def serialize_roundtrip(pt: TemporalMPS, path: str | os.PathLike) -> TemporalMPS:
    write_ptmps(pt, path)
    return read_ptmps(path)


# ---------------------------------------------------------------------------
# tables


def _jsonable(v: Any) -> Any:
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, Path):
        return str(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def render_table(
    columns: Sequence[str], rows: Sequence[Sequence[Any]], metadata: dict[str, Any], fmt: str = "csv"
) -> str:
    if fmt == "json":
        doc = {"metadata": _jsonable(metadata), "columns": list(columns), "rows": _jsonable(rows)}
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"
    if fmt != "csv":
        raise PersistenceError(f"unknown output format {fmt!r}")
    fh = _io.StringIO()
    for key, val in metadata.items():
        fh.write(f"# {key}: {json.dumps(_jsonable(val))}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return fh.getvalue()


def write_table(
    path: str | os.PathLike,
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    metadata: dict[str, Any],
    fmt: str = "csv",
) -> Path:
    path = Path(path)
    text = render_table(columns, rows, metadata, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
    return path


def read_table(path: str | os.PathLike) -> tuple[dict[str, Any], list[str], list[list[str]]]:
    """Inverse of :func:`write_table` for either format; CSV cells come back as strings."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc["metadata"], doc["columns"], doc["rows"]
    meta: dict[str, Any] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        key, _, val = lines[i][2:].partition(": ")
        meta[key] = json.loads(val)
        i += 1
    reader = list(csv.reader(lines[i:]))
    return meta, reader[0], reader[1:]
