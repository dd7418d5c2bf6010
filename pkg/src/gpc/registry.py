"""Task descriptors, the flag-keyed registry, and request dispatch.

A task is plugged in by registering a :class:`TaskDescriptor`: its flag,
the params it requires, a payload-size rule and a handler
``(params, payload) -> (result_params, result_bytes)``. Transport code
only ever talks to :meth:`Registry.dispatch`. See docs/task_authoring.md.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from gpc import demosaic, devinfo, lsq, wire
from gpc.errors import (
    BadValue,
    DuplicateFlag,
    GpcError,
    MissingParam,
    PayloadMismatch,
    TaskFailed,
    UnknownTask,
)
from gpc.parexec import ExecPlan
from gpc.wire import Frame, TaskHeader

Handler = Callable[[Mapping[str, str], bytes], "tuple[dict[str, object], bytes]"]

STATUS_OK = "OK"
ERROR_CODES = ("UNKNOWN_TASK", "MISSING_PARAM", "PAYLOAD_MISMATCH", "BAD_HEADER", "TASK_FAILED", "TOO_LARGE")


@dataclass(frozen=True)
class TaskDescriptor:
    flag: str
    required_params: tuple[str, ...]
    payload_len: wire.PayloadRule
    handler: Handler
    description: str = ""

    def __post_init__(self):
        if not self.flag:
            raise ValueError("task flag must not be empty")
        wire.check_text("task_flag", self.flag, wire.FLAG_SIZE)


@dataclass(frozen=True)
class Response:
    status: str
    params: dict[str, object]
    payload: bytes = b""

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK

    def header(self, output_name: str = "") -> TaskHeader:
        marker = wire.DATA_FOLLOWS if self.payload else wire.NO_DATA
        return TaskHeader(self.status, marker, wire.serialize_params(self.params), output_name)

    def frame(self, output_name: str = "") -> Frame:
        return Frame(self.header(output_name), self.payload)


def error_response(code: str, msg: str) -> Response:
    msg = " ".join(str(msg).split())
    msg = "".join(ch if " " <= ch <= "~" else "?" for ch in msg).replace(",", ";")
    # "msg=" leaves 196 bytes of the params slot
    return Response(f"ERR:{code}", {"msg": msg[: wire.PARAMS_SIZE - 4]})


def error_from(exc: BaseException) -> Response:
    code = exc.code if isinstance(exc, GpcError) else "TASK_FAILED"
    return error_response(code, str(exc) or type(exc).__name__)


class Registry:
    """Write-once-at-startup map from task flag to descriptor."""

    def __init__(self, descriptors: Iterable[TaskDescriptor] = ()):
        self._tasks: dict[str, TaskDescriptor] = {}
        for d in descriptors:
            self.register(d)

    def register(self, d: TaskDescriptor) -> None:
        if d.flag in self._tasks:
            raise DuplicateFlag(d.flag)
        self._tasks[d.flag] = d

    def lookup(self, flag: str) -> TaskDescriptor:
        try:
            return self._tasks[flag]
        except KeyError:
            raise UnknownTask(flag) from None

    @property
    def flags(self) -> list[str]:
        return list(self._tasks)

    def __contains__(self, flag: str) -> bool:
        return flag in self._tasks

    def payload_rules(self) -> dict[str, wire.PayloadRule]:
        return {flag: d.payload_len for flag, d in self._tasks.items()}

    def prepare(self, header: TaskHeader) -> tuple[TaskDescriptor, dict[str, str], int]:
        """Validate a request header before its payload is read.

        Returns the descriptor, parsed params and the payload size the
        request must carry.
        """
        d = self.lookup(header.task_flag)
        params = wire.parse_params(header.params)
        for key in d.required_params:
            if key not in params:
                raise MissingParam(key)
        size = d.payload_len(params)
        wire.check_marker(header, size)
        return d, params, size

    def expected_len(self, header: TaskHeader) -> int:
        return self.prepare(header)[2]

    def dispatch(self, frame: Frame) -> Response:
        """Run one request; every failure becomes an ERR response."""
        try:
            d, params, size = self.prepare(frame.header)
            if len(frame.payload) != size:
                raise PayloadMismatch(f"payload is {len(frame.payload)} bytes, expected {size}")
            result_params, result = d.handler(params, frame.payload)
        except Exception as exc:
            return error_from(exc)
        out = {"bytes": len(result)}
        out.update(result_params)
        try:
            wire.serialize_params(out)
        except GpcError as exc:
            return error_from(TaskFailed(f"handler produced unencodable params: {exc}"))
        return Response(STATUS_OK, out, result)


# -- built-in tasks ------------------------------------------------------------


def _demosaic_handler(kernel, plan: ExecPlan | None) -> Handler:
    def handle(params: Mapping[str, str], payload: bytes):
        rows = wire.int_param(params, "rows")
        cols = wire.int_param(params, "cols")
        phase = params.get("phase", demosaic.DEFAULT_PHASE)
        if phase not in demosaic.PHASES:
            raise BadValue("phase", phase, "unknown CFA phase")
        img = demosaic.BayerImage.from_bytes(payload, rows, cols, phase)
        rgb = kernel(img, plan)
        return {"rows": rows, "cols": cols, "planes": 3, "phase": phase}, rgb.to_bytes()

    return handle


def _lsq_handler(plan: ExecPlan | None) -> Handler:
    def handle(params: Mapping[str, str], payload: bytes):
        lines = wire.int_param(params, "lines")
        pixels = wire.int_param(params, "pixels")
        order_text = params["order"]
        if not order_text.isdigit():
            raise BadValue("order", order_text, "expected a non-negative integer")
        order = int(order_text)
        dtype = params.get("dtype", "f64")
        data = lsq.ScanLineSet.from_bytes(payload, lines, pixels, dtype)
        fits = lsq.batch_fit(data, order, plan)
        failed = [f.line for f in fits if isinstance(f, lsq.LineFailure)]
        if len(failed) == lines:
            raise TaskFailed(f"every line failed: {fits[0].error}")
        out: dict[str, object] = {"lines": lines, "order": order}
        if failed:
            out["failed"] = ";".join(map(str, failed))
        return out, lsq.fits_to_bytes(fits, order)

    return handle


def _devinfo_handler(devices: list[devinfo.DeviceInfo]) -> Handler:
    document = devinfo.to_xml(devices)

    def handle(params: Mapping[str, str], payload: bytes):
        return {"devices": len(devices), "format": "xml"}, document

    return handle


def builtin_registry(
    plan: ExecPlan | None = None,
    devices: list[devinfo.DeviceInfo] | None = None,
) -> Registry:
    """Registry holding the four built-in tasks.

    ``devices`` is the cached probe result served by DEVINFO; probed from
    the host when omitted.
    """
    if devices is None:
        devices = devinfo.probe_devices()
    return Registry(
        [
            TaskDescriptor(
                "BAYER_BILINEAR",
                ("rows", "cols"),
                wire.bayer_payload_len,
                _demosaic_handler(demosaic.demosaic_bilinear, plan),
                "bilinear Bayer demosaic of a u16 mosaic",
            ),
            TaskDescriptor(
                "BAYER_GRADIENT",
                ("rows", "cols"),
                wire.bayer_payload_len,
                _demosaic_handler(demosaic.demosaic_gradient, plan),
                "gradient-directed Bayer demosaic of a u16 mosaic",
            ),
            TaskDescriptor(
                "LSQ_POLYFIT",
                ("lines", "pixels", "order"),
                wire.lsq_payload_len,
                _lsq_handler(plan),
                "per-scan-line least-squares polynomial fit",
            ),
            TaskDescriptor(
                "DEVINFO",
                (),
                wire.no_payload,
                _devinfo_handler(devices),
                "compute device inventory as XML",
            ),
        ]
    )
