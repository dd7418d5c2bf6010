"""Binary PGM (P5) read/write for 8- and 16-bit grey images.

16-bit samples are big-endian on disk, as the netpbm format requires.
"""

from __future__ import annotations

import numpy as np

from gpc.errors import BadFormat

_WHITESPACE = b" \t\r\n"


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` header tokens and the offset just past the last one."""
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i] in _WHITESPACE:
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i] not in b"\r\n":
                i += 1
            continue
        start = i
        while i < n and data[i] not in _WHITESPACE and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise BadFormat("truncated PGM header")
        tokens.append(data[start:i])
    return tokens, i


def is_pgm(data: bytes) -> bool:
    return data[:2] == b"P5"


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a P5 image into a (rows, cols) uint16 array."""
    if not is_pgm(data):
        raise BadFormat("not a binary PGM (missing P5 magic)")
    tokens, end = _tokens(data, 4)
    try:
        cols, rows, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise BadFormat(f"non-numeric PGM header field in {tokens[1:]!r}") from None
    if cols <= 0 or rows <= 0 or not 0 < maxval <= 0xFFFF:
        raise BadFormat(f"bad PGM dimensions {cols}x{rows} maxval {maxval}")
    if end >= len(data) or data[end] not in _WHITESPACE:
        raise BadFormat("missing whitespace after PGM header")
    body = data[end + 1 :]
    dtype = ">u2" if maxval > 0xFF else "u1"
    need = rows * cols * np.dtype(dtype).itemsize
    if len(body) < need:
        raise BadFormat(f"PGM raster holds {len(body)} bytes, needs {need}")
    return np.frombuffer(body[:need], dtype=dtype).reshape(rows, cols).astype(np.uint16)


def write_pgm(image, maxval: int = 0xFFFF) -> bytes:
    a = np.asarray(image)
    if a.ndim != 2:
        raise BadFormat("PGM images are two-dimensional")
    rows, cols = a.shape
    dtype = ">u2" if maxval > 0xFF else "u1"
    header = b"P5\n%d %d\n%d\n" % (cols, rows, maxval)
    return header + a.astype(dtype).tobytes()
