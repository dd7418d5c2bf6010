"""TCP compute server: one request frame in, one response frame out, close.

Each connection is handled on its own thread. Task execution is gated by
a semaphore (``max_tasks``) so concurrent clients cannot pile up kernel
work; reading and writing are not gated.
"""

from __future__ import annotations

import logging
import signal
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from typing import Callable

from gpc import wire
from gpc.errors import GpcError, PayloadMismatch, Truncated
from gpc.parexec import ExecPlan
from gpc.registry import Registry, Response, builtin_registry, error_from

log = logging.getLogger("gpc.server")

DEFAULT_PORT = 7711
DEFAULT_TIMEOUT = 30.0
# grace period to notice bytes sent past the announced payload
EXTRA_BYTES_WAIT = 0.2
# cap on request bytes discarded after an early error reply
DRAIN_LIMIT = 64 << 20


@dataclass
class ConnectionRecord:
    peer: str
    flag: str = "-"
    status: str = "-"
    bytes_in: int = 0
    bytes_out: int = 0
    elapsed_ms: float = 0.0
    note: str = ""

    def line(self) -> str:
        s = (
            f"peer={self.peer} flag={self.flag} status={self.status} "
            f"in={self.bytes_in} out={self.bytes_out} ms={self.elapsed_ms:.1f}"
        )
        return f"{s} note={self.note}" if self.note else s


class _CountingReader:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.count = 0

    def read(self, n: int) -> bytes:
        data = self.sock.recv(min(n, 1 << 20))
        self.count += len(data)
        return data


def _has_extra_bytes(sock: socket.socket) -> bool:
    prev = sock.gettimeout()
    sock.settimeout(EXTRA_BYTES_WAIT)
    try:
        return bool(sock.recv(1, socket.MSG_PEEK))
    except (socket.timeout, OSError):
        return False
    finally:
        sock.settimeout(prev)


def _drain(sock: socket.socket) -> None:
    """Discard unread request bytes so closing does not reset the reply."""
    sock.settimeout(0.5)
    total = 0
    try:
        while total < DRAIN_LIMIT:
            chunk = sock.recv(1 << 16)
            if not chunk:
                break
            total += len(chunk)
    except OSError:
        pass


def _send(sock: socket.socket, response: Response, output_name: str) -> int:
    try:
        frame = response.frame(output_name)
        data = wire.encode_frame(frame)
    except GpcError:
        # output_name came from a header we could not fully trust
        data = wire.encode_frame(response.frame(""))
    sock.sendall(data)
    return len(data)


def handle_connection(
    sock: socket.socket,
    registry: Registry,
    *,
    timeout: float | None = DEFAULT_TIMEOUT,
    gate: threading.Semaphore | None = None,
    peer: str = "?",
) -> ConnectionRecord:
    """Serve exactly one request on ``sock``; never raises."""
    rec = ConnectionRecord(peer)
    start = time.perf_counter()
    reader = _CountingReader(sock)
    response: Response | None = None
    output_name = ""
    early = False
    try:
        sock.settimeout(timeout)
        try:
            raw = wire.read_exact(reader, wire.HEADER_SIZE)
        except Truncated as exc:
            rec.note = f"Truncated({exc.got},{exc.want})"
            return rec
        try:
            header = wire.decode_header(raw)
        except GpcError as exc:
            response = error_from(exc)
            output_name = _salvage_output_name(raw)
            early = True
        else:
            rec.flag = header.task_flag
            output_name = header.output_name
            try:
                _, _, size = registry.prepare(header)
            except GpcError as exc:
                response = error_from(exc)
                early = header.has_data
            else:
                try:
                    payload = wire.read_exact(reader, size)
                except Truncated as exc:
                    response = error_from(
                        PayloadMismatch(f"payload ended after {exc.got} of {size} bytes")
                    )
                else:
                    if _has_extra_bytes(sock):
                        response = error_from(PayloadMismatch(f"more than {size} payload bytes sent"))
                        early = True
                    else:
                        frame = wire.Frame(header, payload)
                        if gate is not None:
                            with gate:
                                response = registry.dispatch(frame)
                        else:
                            response = registry.dispatch(frame)
        rec.status = response.status
        rec.bytes_out = _send(sock, response, output_name)
        try:
            sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        if early:
            _drain(sock)
    except socket.timeout:
        rec.note = "TimedOut"
    except OSError as exc:
        rec.note = f"IOError({exc.__class__.__name__})"
    except Exception as exc:  # never let a connection take the loop down
        rec.note = f"Internal({exc!r})"
        log.exception("unexpected failure serving %s", peer)
    finally:
        rec.bytes_in = reader.count
        rec.elapsed_ms = (time.perf_counter() - start) * 1000
    return rec


def _salvage_output_name(raw: bytes) -> str:
    try:
        return wire.read_slot("output_name", raw[wire.OUTPUT_OFFSET :])
    except GpcError:
        return ""


class _Handler(socketserver.BaseRequestHandler):
    server: "ComputeServer"

    def handle(self):
        srv = self.server
        peer = "%s:%s" % self.client_address[:2]
        rec = handle_connection(
            self.request, srv.registry, timeout=srv.request_timeout, gate=srv.gate, peer=peer
        )
        log.info(rec.line())


class ComputeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = False
    block_on_close = True

    def __init__(
        self,
        address: tuple[str, int],
        registry: Registry,
        *,
        request_timeout: float | None = DEFAULT_TIMEOUT,
        max_tasks: int | None = None,
        plan: ExecPlan | None = None,
    ):
        self.registry = registry
        self.request_timeout = request_timeout
        self.plan = plan or ExecPlan()
        self.max_tasks = max_tasks or 2 * (self.plan.workers)
        self.gate = threading.BoundedSemaphore(self.max_tasks)
        super().__init__(address, _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, name="gpc-accept", daemon=True)
        t.start()
        return t


def make_server(
    bind: str = "0.0.0.0",
    port: int = DEFAULT_PORT,
    *,
    plan: ExecPlan | None = None,
    registry: Registry | None = None,
    request_timeout: float | None = DEFAULT_TIMEOUT,
    max_tasks: int | None = None,
) -> ComputeServer:
    plan = plan or ExecPlan()
    registry = registry or builtin_registry(plan)
    return ComputeServer(
        (bind, port), registry, request_timeout=request_timeout, max_tasks=max_tasks, plan=plan
    )


def serve(server: ComputeServer, ready: Callable[[], None] | None = None) -> None:
    """Run the accept loop until SIGINT/SIGTERM, then drain in-flight work.

    ``ready`` is called once the signal handlers are in place.
    """

    def stop(signum, frame):
        log.info("signal %d received, shutting down", signum)
        threading.Thread(target=server.shutdown, daemon=True).start()

    previous = {s: signal.signal(s, stop) for s in (signal.SIGINT, signal.SIGTERM)}
    try:
        if ready is not None:
            ready()
        server.serve_forever()
    finally:
        server.server_close()
        for s, h in previous.items():
            signal.signal(s, h)
