"""Codec for the fixed 260-byte task header and the frames built on it.

Header layout (byte offsets, all fields NUL-padded ASCII)::

    0   - 28    task flag        (29 bytes)
    29          data marker      ('+' = payload follows, NUL = none)
    30  - 229   parameters       (200 bytes, comma separated key=value)
    230 - 259   output name      (30 bytes)
    260 ...     payload

The payload carries no length prefix. Its size is derived from the
parameters by the task's payload rule (:func:`expected_payload_len`).
Responses reuse the same layout with the status in the flag slot and a
``bytes=<n>`` parameter giving the payload size.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import BinaryIO, Callable, Mapping

from gpc.errors import (
    BadMarker,
    BadToken,
    BadValue,
    DuplicateKey,
    FieldTooLong,
    InvalidCharacter,
    MalformedPadding,
    MissingParam,
    PayloadMismatch,
    PayloadTooLarge,
    Truncated,
    UnknownTask,
)

FLAG_SIZE = 29
PARAMS_SIZE = 200
OUTPUT_SIZE = 30
HEADER_SIZE = FLAG_SIZE + 1 + PARAMS_SIZE + OUTPUT_SIZE

MARKER_OFFSET = FLAG_SIZE
PARAMS_OFFSET = MARKER_OFFSET + 1
OUTPUT_OFFSET = PARAMS_OFFSET + PARAMS_SIZE

DATA_FOLLOWS = 0x2B
NO_DATA = 0x00

MAX_PAYLOAD = 1 << 30

KEY_RE = re.compile(r"[a-z_][a-z0-9_]*\Z")

# (name, offset, size) for each string slot
_SLOTS = (
    ("task_flag", 0, FLAG_SIZE),
    ("params", PARAMS_OFFSET, PARAMS_SIZE),
    ("output_name", OUTPUT_OFFSET, OUTPUT_SIZE),
)


@dataclass(frozen=True)
class TaskHeader:
    task_flag: str = ""
    data_marker: int = NO_DATA
    params: str = ""
    output_name: str = ""

    @property
    def has_data(self) -> bool:
        return self.data_marker == DATA_FOLLOWS


@dataclass(frozen=True)
class Frame:
    header: TaskHeader
    payload: bytes = b""


def check_text(field: str, value: str, limit: int) -> bytes:
    try:
        raw = value.encode("ascii")
    except UnicodeEncodeError as exc:
        raise InvalidCharacter(field, exc.start) from None
    if len(raw) > limit:
        raise FieldTooLong(field, len(raw), limit)
    for i, b in enumerate(raw):
        if not 0x20 <= b <= 0x7E:
            raise InvalidCharacter(field, i)
    return raw


def encode_header(h: TaskHeader) -> bytes:
    if h.data_marker not in (DATA_FOLLOWS, NO_DATA):
        raise BadMarker(h.data_marker)
    out = bytearray(HEADER_SIZE)
    for name, offset, size in _SLOTS:
        raw = check_text(name, getattr(h, name), size)
        out[offset : offset + len(raw)] = raw
    out[MARKER_OFFSET] = h.data_marker
    return bytes(out)


def read_slot(name: str, slot: bytes) -> str:
    end = slot.find(0)
    if end < 0:
        end = len(slot)
    elif any(slot[end:]):
        raise MalformedPadding(name)
    text = slot[:end]
    for i, b in enumerate(text):
        if not 0x20 <= b <= 0x7E:
            raise InvalidCharacter(name, i)
    return text.decode("ascii")


def decode_header(b: bytes) -> TaskHeader:
    if len(b) != HEADER_SIZE:
        raise Truncated(len(b), HEADER_SIZE)
    marker = b[MARKER_OFFSET]
    if marker not in (DATA_FOLLOWS, NO_DATA):
        raise BadMarker(marker)
    fields = {name: read_slot(name, b[off : off + size]) for name, off, size in _SLOTS}
    return TaskHeader(data_marker=marker, **fields)


# -- parameters --------------------------------------------------------------


def parse_params(s: str) -> dict[str, str]:
    """Split a parameter string into an ordered ``{key: value}`` dict.

    Values come back with ``;`` folded to ``,`` (the inverse of the
    escape applied by :func:`serialize_params`).
    """
    if len(s) > PARAMS_SIZE:
        raise FieldTooLong("params", len(s), PARAMS_SIZE)
    params: dict[str, str] = {}
    if not s:
        return params
    for token in s.split(","):
        key, sep, value = token.partition("=")
        if not sep or not KEY_RE.match(key):
            raise BadToken(token)
        if key in params:
            raise DuplicateKey(key)
        params[key] = value.replace(";", ",")
    return params


def serialize_params(params: Mapping[str, object]) -> str:
    """Join params as ``k=v,...``; commas inside values become ``;``."""
    tokens = []
    for key, value in params.items():
        if not KEY_RE.match(key):
            raise BadToken(f"{key}=")
        tokens.append(f"{key}={str(value).replace(',', ';')}")
    s = ",".join(tokens)
    check_text("params", s, PARAMS_SIZE)
    return s


def int_param(params: Mapping[str, str], key: str) -> int:
    """Positive integer parameter, or BadValue/MissingParam."""
    try:
        value = params[key]
    except KeyError:
        raise MissingParam(key) from None
    if not value.isdigit():
        raise BadValue(key, value, "expected a positive integer")
    n = int(value)
    if n <= 0:
        raise BadValue(key, value, "must be > 0")
    return n


# -- payload sizing ----------------------------------------------------------

LSQ_DTYPES = {"f32": 4, "f64": 8}


def _guard(size: int) -> int:
    if size > MAX_PAYLOAD:
        raise PayloadTooLarge(size, MAX_PAYLOAD)
    return size


def bayer_payload_len(params: Mapping[str, str]) -> int:
    rows = int_param(params, "rows")
    cols = int_param(params, "cols")
    dtype = params.get("dtype", "u16")
    if dtype != "u16":
        raise BadValue("dtype", dtype, "mosaics are u16")
    return _guard(rows * cols * 2)


def lsq_payload_len(params: Mapping[str, str]) -> int:
    lines = int_param(params, "lines")
    pixels = int_param(params, "pixels")
    dtype = params.get("dtype", "f64")
    if dtype not in LSQ_DTYPES:
        raise BadValue("dtype", dtype, "expected f32 or f64")
    return _guard(lines * pixels * LSQ_DTYPES[dtype])


def no_payload(params: Mapping[str, str]) -> int:
    return 0


PayloadRule = Callable[[Mapping[str, str]], int]

BUILTIN_PAYLOAD_RULES: dict[str, PayloadRule] = {
    "BAYER_BILINEAR": bayer_payload_len,
    "BAYER_GRADIENT": bayer_payload_len,
    "LSQ_POLYFIT": lsq_payload_len,
    "DEVINFO": no_payload,
}


def expected_payload_len(
    flag: str,
    params: Mapping[str, str],
    rules: Mapping[str, PayloadRule] | None = None,
) -> int:
    rules = BUILTIN_PAYLOAD_RULES if rules is None else rules
    try:
        rule = rules[flag]
    except KeyError:
        raise UnknownTask(flag) from None
    return rule(params)


def check_marker(header: TaskHeader, size: int) -> None:
    if header.has_data and size == 0:
        raise PayloadMismatch("marker announces data but the task takes none")
    if not header.has_data and size > 0:
        raise PayloadMismatch(f"task expects {size} payload bytes but marker is NUL")


def response_payload_len(header: TaskHeader) -> int:
    """Payload size announced by a response header (``bytes`` param)."""
    if not header.has_data:
        return 0
    params = parse_params(header.params)
    return _guard(int_param(params, "bytes"))


# -- stream framing ----------------------------------------------------------


def read_exact(stream: BinaryIO, n: int) -> bytes:
    """Read exactly ``n`` bytes or raise Truncated(got, n)."""
    buf = bytearray()
    while len(buf) < n:
        chunk = stream.read(n - len(buf))
        if not chunk:
            raise Truncated(len(buf), n)
        buf += chunk
    return bytes(buf)


def read_header(stream: BinaryIO) -> TaskHeader:
    return decode_header(read_exact(stream, HEADER_SIZE))


def _read_payload(stream: BinaryIO, size: int) -> bytes:
    try:
        return read_exact(stream, size)
    except Truncated as exc:
        raise Truncated(HEADER_SIZE + exc.got, HEADER_SIZE + size) from None


def read_frame(
    stream: BinaryIO,
    payload_len: Callable[[TaskHeader], int] | None = None,
) -> Frame:
    """Read one request frame.

    ``payload_len`` maps a decoded header to its payload size; by default
    the built-in task rules are applied to the header's params.
    """
    header = read_header(stream)
    if payload_len is None:
        size = expected_payload_len(header.task_flag, parse_params(header.params))
    else:
        size = payload_len(header)
    check_marker(header, size)
    return Frame(header, _read_payload(stream, size))


def read_response(stream: BinaryIO) -> Frame:
    header = read_header(stream)
    return Frame(header, _read_payload(stream, response_payload_len(header)))


def encode_frame(frame: Frame) -> bytes:
    if frame.header.has_data != bool(frame.payload):
        raise PayloadMismatch("payload presence disagrees with the data marker")
    return encode_header(frame.header) + frame.payload


def write_frame(stream: BinaryIO, frame: Frame) -> None:
    data = encode_frame(frame)
    written = stream.write(data)
    if written is not None and written < len(data):
        raise Truncated(written, len(data))
    flush = getattr(stream, "flush", None)
    if flush is not None:
        flush()
