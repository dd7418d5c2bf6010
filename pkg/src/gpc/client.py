"""Client library: build a request, run one round trip, store the result."""

from __future__ import annotations

import os
import re
import socket
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Mapping, Union

import numpy as np

from gpc import pgm, wire
from gpc.errors import (
    BadFormat,
    ConnectFailed,
    MissingParam,
    ServerError,
    SizeMismatch,
    Truncated,
    UnsafeName,
)
from gpc.server import DEFAULT_PORT

InputSource = Union[bytes, bytearray, memoryview, str, os.PathLike, BinaryIO, None]

_CSV_CHARS = re.compile(rb"[0-9eE+\-.,;\s]*\Z")


@dataclass
class TaskResult:
    flag: str
    status: str
    params: dict[str, str]
    payload: bytes
    output_name: str
    elapsed_ms: float = 0.0
    request: wire.TaskHeader | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "OK"

    @property
    def code(self) -> str:
        return self.status.partition(":")[2] if not self.ok else ""


def parse_address(addr: str, default_port: int = DEFAULT_PORT) -> tuple[str, int]:
    """``host``, ``host:port`` or ``[v6]:port``."""
    m = re.fullmatch(r"\[(?P<h>[^\]]+)\](?::(?P<p>\d+))?", addr)
    if m:
        return m["h"], int(m["p"] or default_port)
    host, sep, port = addr.rpartition(":")
    if sep and port.isdigit() and ":" not in host:
        return host, int(port)
    return addr, default_port


def _payload_bytes(source: InputSource) -> bytes:
    if source is None:
        return b""
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        return Path(source).read_bytes()
    return source.read()


def build_request(
    flag: str, params: Mapping[str, object], payload: bytes, output_name: str
) -> wire.TaskHeader:
    header = wire.TaskHeader(
        flag,
        wire.DATA_FOLLOWS if payload else wire.NO_DATA,
        wire.serialize_params(params),
        output_name,
    )
    wire.encode_header(header)  # validates every slot before any network I/O
    return header


def submit(
    server_addr: str,
    flag: str,
    params: Mapping[str, object] | None = None,
    input: InputSource = None,
    output_name: str = "",
    *,
    timeout: float | None = 300.0,
) -> TaskResult:
    """Send one task and wait for its response.

    Raises ServerError for ``ERR:*`` replies (the decoded result is
    attached as ``.result``) and ConnectFailed when nothing listens.
    """
    payload = _payload_bytes(input)
    header = build_request(flag, params or {}, payload, output_name)
    host, port = parse_address(server_addr)
    start = time.perf_counter()
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ConnectFailed(f"cannot connect to {host}:{port}: {exc}") from None
    with sock:
        try:
            sock.sendall(wire.encode_header(header) + payload)
            sock.shutdown(socket.SHUT_WR)
        except (BrokenPipeError, ConnectionResetError):
            pass  # server may have rejected the request early; read its reply
        with sock.makefile("rb") as stream:
            try:
                reply = wire.read_response(stream)
            except ConnectionResetError:
                raise Truncated(0, wire.HEADER_SIZE) from None
    elapsed = (time.perf_counter() - start) * 1000
    h = reply.header
    result = TaskResult(
        flag=flag,
        status=h.task_flag,
        params=wire.parse_params(h.params),
        payload=reply.payload,
        output_name=h.output_name,
        elapsed_ms=elapsed,
        request=header,
    )
    if not result.ok:
        raise ServerError(result.code or h.task_flag, result.params.get("msg", ""), result)
    return result


def check_output_name(name: str) -> str:
    if (
        not name
        or name in (".", "..")
        or ".." in name
        or any(sep in name for sep in ("/", "\\", "\0"))
        or (os.altsep and os.altsep in name)
    ):
        raise UnsafeName(name)
    return name


def save_result(result: TaskResult, directory: str | os.PathLike = ".") -> Path:
    if not result.ok:
        raise ServerError(result.code, result.params.get("msg", ""), result)
    name = check_output_name(result.output_name)
    path = Path(directory) / name
    path.write_bytes(result.payload)
    return path


# -- input loading -------------------------------------------------------------


def _looks_like_csv(path: Path, data: bytes) -> bool:
    if path.suffix.lower() in (".csv", ".txt"):
        return True
    return bool(data) and _CSV_CHARS.match(data[:65536]) is not None and b"," in data[:65536]


def _load_mosaic(data: bytes, params: dict[str, str]) -> bytes:
    if pgm.is_pgm(data):
        img = pgm.read_pgm(data)
        rows, cols = img.shape
        for key, value in (("rows", rows), ("cols", cols)):
            if key in params and params[key] != str(value):
                raise BadFormat(f"{key}={params[key]} disagrees with PGM header ({value})")
            params[key] = str(value)
        return img.astype("<u2").tobytes()
    expected = wire.bayer_payload_len(params)
    if len(data) != expected:
        raise SizeMismatch(expected, len(data))
    return data


def _load_scanlines(path: Path, data: bytes, params: dict[str, str]) -> bytes:
    if _looks_like_csv(path, data):
        rows = []
        for lineno, line in enumerate(data.decode("ascii", "replace").splitlines(), 1):
            if not line.strip():
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise BadFormat(f"{path}:{lineno}: not a row of numbers") from None
        if not rows or len({len(r) for r in rows}) != 1:
            raise BadFormat(f"{path}: scan lines must all have the same length")
        y = np.array(rows, dtype=np.float64)
        params["lines"], params["pixels"] = str(y.shape[0]), str(y.shape[1])
        params["dtype"] = "f64"
        return y.astype("<f8").tobytes()
    expected = wire.lsq_payload_len(params)
    if len(data) != expected:
        raise SizeMismatch(expected, len(data))
    return data


def load_input(
    path: str | os.PathLike | None, flag: str, params: Mapping[str, str]
) -> tuple[bytes, dict[str, str]]:
    """Read an input file into a payload, filling params derivable from it.

    Returns ``(payload, params)``; the caller's mapping is not modified.
    """
    params = dict(params)
    if path is None:
        return b"", params
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise BadFormat(f"cannot read {path}: {exc.strerror}") from None
    try:
        if flag.startswith("BAYER_"):
            return _load_mosaic(data, params), params
        if flag == "LSQ_POLYFIT":
            return _load_scanlines(path, data, params), params
    except MissingParam as exc:
        raise BadFormat(f"raw input needs parameter {exc.key!r}") from None
    return data, params
