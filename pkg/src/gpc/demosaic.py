"""Bayer CFA demosaicing of 16-bit mosaics.

Two kernels share one neighbourhood model:

* bilinear: every missing colour is the rounded mean of the nearest
  same-colour samples (4-neighbour cross or diagonals at red/blue sites,
  the flanking pair at green sites);
* gradient: as bilinear, except green at red/blue sites averages only the
  horizontal or the vertical pair, whichever differs less (first-order
  gradients, ties fall back to the 4-neighbour mean).

Means are integer with half-up rounding. Neighbours past the border are
read from the nearest edge pixel (clamp-to-edge), whatever its colour.
The image is split into row bands that run in parallel through
:mod:`gpc.parexec`; the result does not depend on the worker count.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from gpc.errors import BadImage
from gpc.parexec import ExecPlan, parallel_map

PHASES = ("RGGB", "BGGR", "GRBG", "GBRG")
DEFAULT_PHASE = "RGGB"
BAND_ROWS = 64


class Site(enum.IntEnum):
    R = 0
    G_IN_RED_ROW = 1
    G_IN_BLUE_ROW = 2
    B = 3


def _phase_table(phase: str) -> tuple[tuple[Site, Site], tuple[Site, Site]]:
    if phase not in PHASES:
        raise BadImage(f"unknown CFA phase {phase!r}; expected one of {', '.join(PHASES)}")
    cells = [[phase[0], phase[1]], [phase[2], phase[3]]]
    table = []
    for row in cells:
        green = Site.G_IN_RED_ROW if "R" in row else Site.G_IN_BLUE_ROW
        table.append(tuple(Site.R if ch == "R" else Site.B if ch == "B" else green for ch in row))
    return tuple(table)


def cfa_color(phase: str, r: int, c: int) -> Site:
    return _phase_table(phase)[r % 2][c % 2]


@dataclass(frozen=True)
class BayerImage:
    rows: int
    cols: int
    samples: np.ndarray  # (rows, cols) uint16
    phase: str = DEFAULT_PHASE

    def validate(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise BadImage(f"mosaic must be at least 2x2, got {self.rows}x{self.cols}")
        if self.phase not in PHASES:
            raise BadImage(f"unknown CFA phase {self.phase!r}")
        s = self.samples
        if not isinstance(s, np.ndarray) or s.dtype != np.uint16:
            raise BadImage("samples must be a uint16 array")
        if s.shape != (self.rows, self.cols):
            raise BadImage(f"samples shape {s.shape} != ({self.rows}, {self.cols})")

    @classmethod
    def from_array(cls, samples, phase: str = DEFAULT_PHASE) -> "BayerImage":
        a = np.asarray(samples)
        if a.ndim != 2:
            raise BadImage("mosaic must be two-dimensional")
        if a.dtype != np.uint16:
            if a.size and (a.min() < 0 or a.max() > 0xFFFF):
                raise BadImage("samples out of the 16-bit range")
            a = a.astype(np.uint16)
        return cls(a.shape[0], a.shape[1], a, phase)

    @classmethod
    def from_bytes(cls, data: bytes, rows: int, cols: int, phase: str = DEFAULT_PHASE) -> "BayerImage":
        if len(data) != rows * cols * 2:
            raise BadImage(f"{len(data)} bytes cannot hold a {rows}x{cols} u16 mosaic")
        samples = np.frombuffer(data, dtype="<u2").reshape(rows, cols).astype(np.uint16)
        return cls(rows, cols, samples, phase)

    def to_bytes(self) -> bytes:
        return self.samples.astype("<u2").tobytes()


@dataclass(frozen=True)
class RgbImage:
    rows: int
    cols: int
    planes: np.ndarray  # (3, rows, cols) uint16, R G B

    @property
    def r(self) -> np.ndarray:
        return self.planes[0]

    @property
    def g(self) -> np.ndarray:
        return self.planes[1]

    @property
    def b(self) -> np.ndarray:
        return self.planes[2]

    def to_bytes(self) -> bytes:
        """Planes R, G, B concatenated, each row-major little-endian u16."""
        return self.planes.astype("<u2").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, rows: int, cols: int) -> "RgbImage":
        planes = np.frombuffer(data, dtype="<u2").reshape(3, rows, cols).astype(np.uint16)
        return cls(rows, cols, planes)


def _mean2(a, b):
    return (a + b + 1) >> 1


def _mean4(a, b, c, d):
    return (a + b + c + d + 2) >> 2


def _site_map(phase: str, r0: int, r1: int, cols: int) -> np.ndarray:
    table = np.array([[int(s) for s in row] for row in _phase_table(phase)], dtype=np.int8)
    rr = np.arange(r0, r1) % 2
    cc = np.arange(cols) % 2
    return table[rr[:, None], cc[None, :]]


def _band(padded: np.ndarray, phase: str, r0: int, r1: int, gradient: bool) -> np.ndarray:
    # padded has one clamped pixel of border; image row r is padded row r+1
    w = padded[r0 : r1 + 2]
    C = w[1:-1, 1:-1]
    N, S = w[:-2, 1:-1], w[2:, 1:-1]
    W, E = w[1:-1, :-2], w[1:-1, 2:]
    diag = _mean4(w[:-2, :-2], w[:-2, 2:], w[2:, :-2], w[2:, 2:])
    cross = _mean4(N, S, E, W)
    horiz = _mean2(W, E)
    vert = _mean2(N, S)

    if gradient:
        dh = np.abs(W - E)
        dv = np.abs(N - S)
        green_rb = np.where(dh < dv, horiz, np.where(dv < dh, vert, cross))
    else:
        green_rb = cross

    site = _site_map(phase, r0, r1, padded.shape[1] - 2)
    is_r = site == Site.R
    is_b = site == Site.B
    g_red = site == Site.G_IN_RED_ROW
    g_blue = site == Site.G_IN_BLUE_ROW

    out = np.empty((3,) + C.shape, dtype=np.int64)
    out[0] = np.select([is_r, is_b, g_red, g_blue], [C, diag, horiz, vert])
    out[1] = np.where(is_r | is_b, green_rb, C)
    out[2] = np.select([is_b, is_r, g_red, g_blue], [C, diag, vert, horiz])
    np.clip(out, 0, 0xFFFF, out=out)
    return out.astype(np.uint16)


def _demosaic(img: BayerImage, gradient: bool, plan: ExecPlan | None) -> RgbImage:
    img.validate()
    padded = np.pad(img.samples.astype(np.int64), 1, mode="edge")
    nbands = -(-img.rows // BAND_ROWS)

    def band(k: int) -> np.ndarray:
        r0 = k * BAND_ROWS
        return _band(padded, img.phase, r0, min(r0 + BAND_ROWS, img.rows), gradient)

    planes = np.concatenate(parallel_map(nbands, band, plan), axis=1)
    return RgbImage(img.rows, img.cols, planes)


def demosaic_bilinear(img: BayerImage, plan: ExecPlan | None = None) -> RgbImage:
    return _demosaic(img, gradient=False, plan=plan)


def demosaic_gradient(img: BayerImage, plan: ExecPlan | None = None) -> RgbImage:
    return _demosaic(img, gradient=True, plan=plan)
