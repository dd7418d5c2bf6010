"""Command line: ``gpc serve | submit | devinfo | bench``.

Exit codes: 0 success, 1 remote or task error, 2 usage or local input
error. Flags take precedence over ``GPC_SERVER`` / ``GPC_WORKERS``.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from gpc import bench, client, devinfo, pgm, wire
from gpc.errors import ClientError, ConnectFailed, GpcError, ServerError, Truncated
from gpc.parexec import ExecPlan
from gpc.server import DEFAULT_PORT, DEFAULT_TIMEOUT, make_server, serve

EXIT_OK, EXIT_REMOTE, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("gpc")


def _port(text: str) -> int:
    try:
        port = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid port {text!r}") from None
    if not 0 <= port <= 65535:
        raise argparse.ArgumentTypeError(f"port {port} outside 0-65535")
    return port


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a value >= 1, got {n}")
    return n


def _positive_float(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not x > 0:
        raise argparse.ArgumentTypeError(f"expected a value > 0, got {x}")
    return x


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _dims(text: str) -> tuple[int, int]:
    a, sep, b = text.lower().partition("x")
    if not (sep and a.isdigit() and b.isdigit()) or int(a) < 1 or int(b) < 1:
        raise argparse.ArgumentTypeError(f"expected ROWSxCOLS, got {text!r}")
    return int(a), int(b)


def _param(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not wire.KEY_RE.match(key):
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key, value


def _default_server() -> str:
    return os.environ.get("GPC_SERVER") or f"127.0.0.1:{DEFAULT_PORT}"


def _err(msg: str) -> None:
    print(f"gpc: {msg}", file=sys.stderr)


# -- serve ---------------------------------------------------------------------


def cmd_serve(args) -> int:
    try:
        plan = ExecPlan.from_env(args.workers)
    except ValueError as exc:
        _err(f"bad GPC_WORKERS: {exc}")
        return EXIT_USAGE
    try:
        server = make_server(
            args.bind,
            args.port,
            plan=plan,
            request_timeout=args.timeout_secs,
            max_tasks=args.max_tasks,
        )
    except OSError as exc:
        _err(f"BindFailed: {args.bind}:{args.port}: {exc.strerror or exc}")
        return EXIT_REMOTE
    host, port = server.server_address[:2]
    banner = (
        f"gpc serve listening on {host}:{port} workers={plan.workers} chunk={plan.chunk} "
        f"timeout={args.timeout_secs}s max_tasks={server.max_tasks} "
        f"tasks={','.join(server.registry.flags)}"
    )
    serve(server, ready=lambda: print(banner, flush=True))
    return EXIT_OK


# -- submit --------------------------------------------------------------------


def _status_line(flag: str, status: str, nbytes: int, elapsed_ms: float) -> None:
    print(f"{flag} {status} {nbytes} {elapsed_ms:.1f}", flush=True)


def _run_task(server: str, flag: str, params: dict, input_path, output: str, timeout: float):
    """Shared by submit and devinfo; returns (exit code, saved path)."""
    out = Path(output)
    try:
        name = client.check_output_name(out.name)
        payload, params = client.load_input(input_path, flag, params)
        client.build_request(flag, params, payload, name)
    except (ClientError, GpcError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE, None
    try:
        result = client.submit(server, flag, params, payload, name, timeout=timeout)
    except ServerError as exc:
        r = exc.result
        _status_line(flag, r.status if r else f"ERR:{exc.code}", 0, r.elapsed_ms if r else 0.0)
        _err(f"ServerError {exc.code}: {exc.msg}")
        return EXIT_REMOTE, None
    except (ConnectFailed, Truncated, OSError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_REMOTE, None
    except GpcError as exc:
        _err(f"bad response: {type(exc).__name__}: {exc}")
        return EXIT_REMOTE, None
    try:
        path = client.save_result(result, out.parent)
    except (ClientError, OSError) as exc:
        _err(f"cannot save result: {exc}")
        return EXIT_USAGE, None
    _status_line(flag, result.status, len(result.payload), result.elapsed_ms)
    return EXIT_OK, path


def cmd_submit(args) -> int:
    params = dict(args.param or [])
    code, _ = _run_task(args.server, args.task, params, args.input, args.output, args.timeout)
    return code


def cmd_devinfo(args) -> int:
    code, path = _run_task(args.server, "DEVINFO", {}, None, args.output, args.timeout)
    if code == EXIT_OK:
        try:
            print(devinfo.format_tree(path.read_bytes()))
        except Exception as exc:  # noqa: BLE001 - malformed reply from a foreign server
            _err(f"response is not a device document: {exc}")
            return EXIT_REMOTE
    return code


# -- bench ---------------------------------------------------------------------


def _bench_mosaic(args) -> np.ndarray:
    rows, cols = args.dims or (2048, 2048)
    if args.input is None:
        return bench.synthetic_mosaic(rows, cols)
    data = Path(args.input).read_bytes()
    if pgm.is_pgm(data):
        return pgm.read_pgm(data)
    if len(data) != rows * cols * 2:
        raise client.SizeMismatch(rows * cols * 2, len(data))
    return np.frombuffer(data, dtype="<u2").reshape(rows, cols)


def _bench_scanlines(args) -> np.ndarray:
    lines, pixels = args.dims or (6, 6000)
    if args.input is None:
        return bench.synthetic_scanlines(lines, pixels)
    params = {"lines": str(lines), "pixels": str(pixels), "dtype": "f64"}
    payload, params = client.load_input(args.input, "LSQ_POLYFIT", params)
    return np.frombuffer(payload, dtype="<f8").reshape(int(params["lines"]), int(params["pixels"]))


def cmd_bench(args) -> int:
    workers_list = args.workers_list or sorted({1, os.cpu_count() or 1})
    try:
        if args.task == "LSQ_POLYFIT":
            rows = bench.bench_lsq(_bench_scanlines(args), args.orders, workers_list, args.repeats)
        else:
            rows = bench.bench_demosaic(args.task, _bench_mosaic(args), workers_list, args.repeats, args.phase)
    except (GpcError, OSError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    print(bench.TSV_HEADER)
    for row in rows:
        print(row.tsv())
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gpc", description="remote compute offload client and server")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("serve", help="run the compute server")
    p.add_argument("--bind", default="0.0.0.0")
    p.add_argument("--port", type=_port, default=DEFAULT_PORT)
    p.add_argument("--workers", type=_positive_int, default=None, help="worker threads (default: $GPC_WORKERS or cores)")
    p.add_argument("--timeout-secs", type=_positive_float, default=DEFAULT_TIMEOUT, help="drop connections idle this long mid-request")
    p.add_argument("--max-tasks", type=_positive_int, default=None, help="concurrent task limit (default: 2 x workers)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("submit", help="submit one task and save its result")
    p.add_argument("--server", default=_default_server(), help="host[:port] (default: $GPC_SERVER or 127.0.0.1:7711)")
    p.add_argument("--task", required=True, help="task flag, e.g. BAYER_BILINEAR")
    p.add_argument("--input", default=None, help="input file (raw, PGM, or CSV for LSQ_POLYFIT)")
    p.add_argument("--output", required=True, help="result file; its name travels in the header")
    p.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE")
    p.add_argument("--timeout", type=_positive_float, default=300.0)
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("devinfo", help="fetch the server's device inventory")
    p.add_argument("--server", default=_default_server())
    p.add_argument("--output", default="gpu.xml")
    p.add_argument("--timeout", type=_positive_float, default=60.0)
    p.set_defaults(func=cmd_devinfo)

    p = sub.add_parser("bench", help="time kernels locally across worker counts")
    p.add_argument("--task", required=True, choices=bench.BENCH_TASKS)
    p.add_argument("--input", default=None, help="mosaic (PGM/raw) or scan lines (CSV/raw f64)")
    p.add_argument("--dims", type=_dims, default=None, help="ROWSxCOLS, or LINESxPIXELS for LSQ_POLYFIT")
    p.add_argument("--orders", type=_int_list, default=[1, 2, 3])
    p.add_argument("--workers-list", type=_int_list, default=None)
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--phase", default="RGGB", choices=("RGGB", "BGGR", "GRBG", "GBRG"))
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
