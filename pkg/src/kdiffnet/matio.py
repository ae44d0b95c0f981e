"""File formats: matrices as delimited text or a compact binary record,
node groups as index lines, and flat key-value metadata.

Text matrices use 17 significant digits so doubles survive a round trip
exactly; the binary format is magic + row/column counts + little-endian
64-bit floats.
"""

import struct
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"KDNMAT01"
_HEADER = struct.Struct("<8sQQ")


def save_matrix_text(path, matrix, delimiter=" "):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(path, matrix, fmt="%.17g", delimiter=delimiter)


def load_matrix_text(path, delimiter=None):
    """Load a delimited text matrix. ``delimiter=None`` splits whitespace."""
    m = np.loadtxt(path, delimiter=delimiter, ndmin=2)
    return m.astype(float)


def save_matrix_binary(path, matrix):
    matrix = np.atleast_2d(np.ascontiguousarray(matrix, dtype="<f8"))
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, rows, cols))
        fh.write(matrix.tobytes())


def load_matrix_binary(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated matrix header")
        magic, rows, cols = _HEADER.unpack(header)
        if magic != MATRIX_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
        if data.size != rows * cols:
            raise ValueError(f"{path}: truncated matrix payload")
    return data.reshape(rows, cols).astype(float)


def load_matrix(path, delimiter=None):
    """Load a matrix, sniffing the binary magic before falling back to text."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MATRIX_MAGIC))
    if magic == MATRIX_MAGIC:
        return load_matrix_binary(path)
    return load_matrix_text(path, delimiter=delimiter)


def save_groups(path, groups):
    """Write node groups, one line of zero-based indices per group."""
    lines = [" ".join(str(int(i)) for i in g) for g in groups]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_groups(path):
    """Read node groups; '#' starts a comment, blank lines are skipped."""
    groups = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        groups.append(tuple(int(tok) for tok in line.split()))
    return groups


def save_keyvalues(path, mapping):
    """Write a flat mapping as ``key = value`` lines.

    Floats are written with 17 significant digits; None becomes an empty
    value. Keys must not contain '='.
    """
    lines = []
    for key, value in mapping.items():
        key = str(key)
        if "=" in key or "\n" in key:
            raise ValueError(f"invalid key {key!r}")
        if value is None:
            text = ""
        elif isinstance(value, float):
            text = format(value, ".17g")
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_keyvalues(path):
    """Read ``key = value`` lines into a dict of strings.

    Values keep their textual form; callers coerce. '#' starts a comment.
    """
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed key-value line: {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out
