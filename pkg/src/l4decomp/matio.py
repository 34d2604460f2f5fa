"""Matrix container formats.

Binary container (``.l4m``), all integers little-endian::

    offset  size  content
    0       4     magic b"L4MX"
    4       4     uint32 format version (1)
    8       8     uint64 rows
    16      8     uint64 cols
    24      8*rows*cols  float64 entries, column-major

CSV (``.csv``): first line ``# rows,cols``, then one matrix row per line,
values printed with 17 significant digits so they round-trip exactly.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"L4MX"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class FormatError(ValueError):
    pass


def write_binary(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype="<f8"))
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.asfortranarray(a).tobytes(order="F"))


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        body = fh.read()
    if len(body) != 8 * rows * cols:
        raise FormatError(f"{path}: expected {rows}x{cols} float64 payload")
    return np.frombuffer(body, dtype="<f8").reshape((rows, cols), order="F").astype(float)


def write_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    rows, cols = a.shape
    lines = [f"# {rows},{cols}"]
    lines.extend(",".join(format(v, ".17g") for v in row) for row in a)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise FormatError(f"{path}: missing '# rows,cols' header")
    try:
        rows, cols = (int(t) for t in text[0][1:].split(","))
    except ValueError as exc:
        raise FormatError(f"{path}: malformed header {text[0]!r}") from exc
    body = [ln for ln in text[1:] if ln.strip()]
    if len(body) != rows:
        raise FormatError(f"{path}: expected {rows} rows, found {len(body)}")
    a = np.array([[float(t) for t in ln.split(",")] for ln in body], dtype=float)
    if a.shape != (rows, cols):
        raise FormatError(f"{path}: expected shape {(rows, cols)}, found {a.shape}")
    return a


def save_matrix(path, a) -> None:
    """Write by extension: ``.csv`` as CSV, anything else as the binary container."""
    if str(path).endswith(".csv"):
        write_csv(path, a)
    else:
        write_binary(path, a)


def load_matrix(path) -> np.ndarray:
    if str(path).endswith(".csv"):
        return read_csv(path)
    return read_binary(path)
