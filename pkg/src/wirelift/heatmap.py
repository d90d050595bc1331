"""Stride-4 heatmap encoding of wireframes and the WFHM tensor container.

Encoding rules (all at heatmap resolution Hs = H/4, Ws = W/4):

* junction map: cell (x, y) of type t is 1 iff some junction v of type t has
  ``floor(v / 4) == (x, y)``, else 0;
* offset map: ``v / 4 - floor(v / 4)`` in [0, 1)^2 at junction cells, zero
  elsewhere, restoring sub-pixel positions at full resolution;
* edge map: ``max_e (1 - dist(p, e))`` where dist is the exact Euclidean
  point-to-segment distance from the cell centre, in heatmap-cell units,
  clamped at 0 beyond one cell;
* junction depth map: the raw relative depth at junction cells, 0 elsewhere.

Two same-type junctions in one cell collide; the one with the smaller
full-resolution y (then x) wins, so encoding stays order-independent.

WFHM container layout (little-endian): magic ``WFHM``, u16 version=1,
u16 stride, u32 W, u32 H, then nine float32 row-major planes in the order
jmap C, jmap T, offset Cx, Cy, Tx, Ty, emap, jdepth C, jdepth T, then the
3x3 float32 VP matrix (rows v1, v2, v3).
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from wirelift.core import JunctionType, VanishingPoints, Wireframe
from wirelift.synth import GroundTruth

__all__ = [
    "HeatmapBundle",
    "DimensionError",
    "MagicMismatch",
    "DimMismatch",
    "TruncatedFile",
    "encode",
    "write_tensor",
    "read_tensor",
    "bundles_equal",
]

STRIDE = 4
_MAGIC = b"WFHM"
_VERSION = 1
# largest float32 below 1.0; offsets must stay inside [0, 1)
_OFFSET_MAX = np.float32(np.nextafter(np.float32(1.0), np.float32(0.0)))


class DimensionError(Exception):
    """Image size incompatible with the heatmap stride."""


class MagicMismatch(Exception):
    """Not a WFHM file (bad magic or unsupported version)."""


class DimMismatch(Exception):
    """Header dimensions violate the stride relation."""


class TruncatedFile(Exception):
    """Payload length inconsistent with the header."""


@dataclass(frozen=True)
class HeatmapBundle:
    """The five map families plus normalized VPs, all float32.

    Array index order is [row=y][col=x]; type index 0 is C, 1 is T; the
    offset's second axis is (x, y).
    """

    jmap: np.ndarray    # (2, Hs, Ws)
    offset: np.ndarray  # (2, 2, Hs, Ws)
    emap: np.ndarray    # (Hs, Ws)
    jdepth: np.ndarray  # (2, Hs, Ws)
    vps: np.ndarray     # (3, 3), rows v1 v2 v3
    image_size: tuple[int, int]
    stride: int = STRIDE

    def __post_init__(self):
        W, H = self.image_size
        if W % self.stride or H % self.stride:
            raise DimensionError(f"image size {W}x{H} not divisible by stride {self.stride}")
        hs, ws = H // self.stride, W // self.stride
        shapes = {
            "jmap": (self.jmap.shape, (2, hs, ws)),
            "offset": (self.offset.shape, (2, 2, hs, ws)),
            "emap": (self.emap.shape, (hs, ws)),
            "jdepth": (self.jdepth.shape, (2, hs, ws)),
            "vps": (self.vps.shape, (3, 3)),
        }
        for name, (got, want) in shapes.items():
            if got != want:
                raise DimMismatch(f"{name} has shape {got}, expected {want}")

    @property
    def grid_size(self) -> tuple[int, int]:
        """(Ws, Hs)."""
        return (self.image_size[0] // self.stride, self.image_size[1] // self.stride)

    def vanishing_points(self) -> VanishingPoints:
        return VanishingPoints.from_matrix(self.vps.astype(np.float64))


def encode(gt: GroundTruth) -> HeatmapBundle:
    """Ground-truth heatmaps of a wireframe, bit-deterministic.

    Raises `DimensionError` when the image size is not divisible by 4.
    """
    wf = gt.wireframe
    W, H = wf.image_size
    if W % STRIDE or H % STRIDE:
        raise DimensionError(f"image size {W}x{H} not divisible by stride {STRIDE}")
    hs, ws = H // STRIDE, W // STRIDE

    jmap = np.zeros((2, hs, ws), dtype=np.float32)
    offset = np.zeros((2, 2, hs, ws), dtype=np.float32)
    jdepth = np.zeros((2, hs, ws), dtype=np.float32)

    # winner per (type, cell): the junction with smallest full-res y, then x
    winners: dict[tuple[int, int, int], tuple[float, float, float]] = {}
    for v in wf.vertices:
        t = 0 if v.jtype is JunctionType.C else 1
        x, y = v.position
        cx, cy = int(x // STRIDE), int(y // STRIDE)
        key = (t, cy, cx)
        cand = (y, x, v.depth if v.depth is not None else 0.0)
        if key not in winners or cand[:2] < winners[key][:2]:
            winners[key] = cand
    for (t, cy, cx), (y, x, depth) in winners.items():
        jmap[t, cy, cx] = 1.0
        offset[t, 0, cy, cx] = min(np.float32(x / STRIDE - cx), _OFFSET_MAX)
        offset[t, 1, cy, cx] = min(np.float32(y / STRIDE - cy), _OFFSET_MAX)
        jdepth[t, cy, cx] = depth

    emap = _edge_map(wf, hs, ws)
    vps = gt.vps.as_matrix().astype(np.float32)
    return HeatmapBundle(jmap, offset, emap, jdepth, vps, (W, H))


def _edge_map(wf: Wireframe, hs: int, ws: int) -> np.ndarray:
    """Exact distance-based anti-aliased rasterization of all lines."""
    emap = np.zeros((hs, ws), dtype=np.float32)
    pos = wf.positions() / STRIDE  # cell coordinates
    for i, j in wf.edges:
        a, b = pos[i], pos[j]
        d = b - a
        # window of cells whose centres can be within one cell of the segment
        x0 = max(0, int(np.floor(min(a[0], b[0]) - 1.5)))
        x1 = min(ws - 1, int(np.ceil(max(a[0], b[0]) + 0.5)))
        y0 = max(0, int(np.floor(min(a[1], b[1]) - 1.5)))
        y1 = min(hs - 1, int(np.ceil(max(a[1], b[1]) + 0.5)))
        if x1 < x0 or y1 < y0:
            continue
        xs = np.arange(x0, x1 + 1) + 0.5
        ys = np.arange(y0, y1 + 1) + 0.5
        gx, gy = np.meshgrid(xs, ys)
        px = gx - a[0]
        py = gy - a[1]
        dd = float(d @ d)
        if dd < 1e-24:
            dist = np.hypot(px, py)
        else:
            t = np.clip((px * d[0] + py * d[1]) / dd, 0.0, 1.0)
            dist = np.hypot(px - t * d[0], py - t * d[1])
        contrib = np.maximum(0.0, 1.0 - dist).astype(np.float32)
        patch = emap[y0 : y1 + 1, x0 : x1 + 1]
        np.maximum(patch, contrib, out=patch)
    return emap


def bundles_equal(a: HeatmapBundle, b: HeatmapBundle) -> bool:
    return (
        a.image_size == b.image_size
        and a.stride == b.stride
        and np.array_equal(a.jmap, b.jmap)
        and np.array_equal(a.offset, b.offset)
        and np.array_equal(a.emap, b.emap)
        and np.array_equal(a.jdepth, b.jdepth)
        and np.array_equal(a.vps, b.vps)
    )


def write_tensor(bundle: HeatmapBundle, path) -> None:
    """Serialize to the WFHM container; the write is atomic (temp + rename)."""
    W, H = bundle.image_size
    header = _MAGIC + struct.pack("<HHII", _VERSION, bundle.stride, W, H)
    planes = [
        bundle.jmap[0],
        bundle.jmap[1],
        bundle.offset[0, 0],
        bundle.offset[0, 1],
        bundle.offset[1, 0],
        bundle.offset[1, 1],
        bundle.emap,
        bundle.jdepth[0],
        bundle.jdepth[1],
    ]
    payload = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in planes)
    payload += np.ascontiguousarray(bundle.vps, dtype="<f4").tobytes()
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".wfhm.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, os.fspath(path))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_tensor(path) -> HeatmapBundle:
    """Parse a WFHM container; bit-exact inverse of `write_tensor`."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != _MAGIC:
        raise MagicMismatch(f"{path}: not a WFHM file")
    version, stride, W, H = struct.unpack("<HHII", data[4:16])
    if version != _VERSION:
        raise MagicMismatch(f"{path}: unsupported WFHM version {version}")
    if stride == 0 or W % stride or H % stride:
        raise DimMismatch(f"{path}: dims {W}x{H} not divisible by stride {stride}")
    hs, ws = H // stride, W // stride
    expected = 16 + (9 * hs * ws + 9) * 4
    if len(data) != expected:
        raise TruncatedFile(f"{path}: {len(data)} bytes, header implies {expected}")
    body = np.frombuffer(data, dtype="<f4", offset=16)
    planes = body[: 9 * hs * ws].reshape(9, hs, ws)
    vps = body[9 * hs * ws :].reshape(3, 3)
    return HeatmapBundle(
        jmap=np.stack([planes[0], planes[1]]),
        offset=np.stack(
            [np.stack([planes[2], planes[3]]), np.stack([planes[4], planes[5]])]
        ),
        emap=planes[6].copy(),
        jdepth=np.stack([planes[7], planes[8]]),
        vps=vps.copy(),
        image_size=(W, H),
        stride=stride,
    )
