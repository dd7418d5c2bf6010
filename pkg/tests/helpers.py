"""Shared socket helpers for tests that talk to a live server."""

import io
import socket

from gpc import wire


def exchange(port, data: bytes, *, close_write=True, timeout=30.0) -> bytes:
    """Send raw bytes, half-close, and return everything the server sends back."""
    with socket.create_connection(("127.0.0.1", port), timeout=timeout) as s:
        try:
            s.sendall(data)
            if close_write:
                s.shutdown(socket.SHUT_WR)
        except (BrokenPipeError, ConnectionResetError):
            pass
        chunks = []
        while True:
            try:
                b = s.recv(1 << 20)
            except ConnectionResetError:
                break
            if not b:
                break
            chunks.append(b)
    return b"".join(chunks)


def parse_reply(raw: bytes) -> wire.Frame:
    stream = io.BytesIO(raw)
    frame = wire.read_response(stream)
    assert stream.read() == b"", "bytes after the response frame"
    return frame
