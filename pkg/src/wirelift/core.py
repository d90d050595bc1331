"""Core data model: wireframes, junction taxonomy, cameras, vanishing points.

Shared conventions (used by every module in this package):

* Image coordinates: origin at the top-left pixel corner, x right, y down,
  continuous sub-pixel positions. A position is valid iff it lies in
  ``[0, W) x [0, H)``.
* Depth is camera-space z in relative units, strictly positive.
* A wireframe is 2D (no depths), 2.5D (depths present) or 3D (depths present
  plus an attached camera); all three share the same type.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "JunctionType",
    "TConstraint",
    "GroundTruth",
    "Vertex",
    "Wireframe",
    "VanishingPoints",
    "CameraModel",
    "Violation",
    "validate",
    "normalize_vp",
    "calibrated_ray",
    "project",
    "wireframe_to_json",
    "wireframe_from_json",
    "dumps_wireframe",
    "loads_wireframe",
]


class JunctionType(Enum):
    """Junction taxonomy: C for physical corners, T for occlusion junctions."""

    C = "C"
    T = "T"


@dataclass(frozen=True)
class Vertex:
    """A wireframe junction.

    ``position`` is (x, y) in full-resolution image pixels. ``depth``, when
    present, is the camera-space z; for T junctions it is the depth of the
    occluded (background) line at this image point, not the occluder's.
    """

    position: tuple[float, float]
    jtype: JunctionType
    depth: Optional[float] = None

    def with_depth(self, depth: float) -> "Vertex":
        return Vertex(self.position, self.jtype, float(depth))

    def with_position(self, position: tuple[float, float]) -> "Vertex":
        return Vertex((float(position[0]), float(position[1])), self.jtype, self.depth)


@dataclass(frozen=True)
class Wireframe:
    """Junction/line graph over one image.

    Edges are unordered index pairs, stored canonically as ``(min, max)``.
    T-type vertices must have degree exactly 1: an occlusion junction only
    connects into the visible part of its background line.
    """

    vertices: tuple[Vertex, ...]
    edges: tuple[tuple[int, int], ...]
    image_size: tuple[int, int]

    def __init__(
        self,
        vertices: Sequence[Vertex],
        edges: Iterable[Sequence[int]],
        image_size: Sequence[int],
    ):
        object.__setattr__(self, "vertices", tuple(vertices))
        canon = tuple(
            (int(min(i, j)), int(max(i, j))) for i, j in edges
        )
        object.__setattr__(self, "edges", canon)
        object.__setattr__(self, "image_size", (int(image_size[0]), int(image_size[1])))

    def positions(self) -> np.ndarray:
        """(n, 2) array of vertex positions."""
        return np.array([v.position for v in self.vertices], dtype=np.float64).reshape(-1, 2)

    def depths(self) -> np.ndarray:
        """(n,) array of depths; NaN where absent."""
        return np.array(
            [v.depth if v.depth is not None else np.nan for v in self.vertices],
            dtype=np.float64,
        )

    def degrees(self) -> np.ndarray:
        deg = np.zeros(len(self.vertices), dtype=np.int64)
        for i, j in self.edges:
            if 0 <= i < len(self.vertices):
                deg[i] += 1
            if 0 <= j < len(self.vertices):
                deg[j] += 1
        return deg

    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges)


@dataclass(frozen=True)
class VanishingPoints:
    """The three Manhattan vanishing points in normalized homogeneous form.

    Each vector is ``[x, y, 1] / (x^2 + y^2 + 1)`` for the VP at image
    point (x, y); v3 is the vertical VP, v1/v2 the (unordered) horizontal
    pair. The normalization bounds every vector inside the unit ball, with
    points at infinity mapping to the zero vector in the limit.
    """

    v1: tuple[float, float, float]
    v2: tuple[float, float, float]
    v3: tuple[float, float, float]

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "VanishingPoints":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"expected (3, 3) VP matrix, got {m.shape}")
        return cls(tuple(m[0]), tuple(m[1]), tuple(m[2]))

    @classmethod
    def from_pixels(cls, p1, p2, p3) -> "VanishingPoints":
        return cls(
            tuple(normalize_vp(p1)), tuple(normalize_vp(p2)), tuple(normalize_vp(p3))
        )

    def as_matrix(self) -> np.ndarray:
        """(3, 3) array with rows v1, v2, v3."""
        return np.array([self.v1, self.v2, self.v3], dtype=np.float64)

    def pixel_points(self) -> np.ndarray:
        """(3, 2) VP positions in pixels; huge but finite for near-infinite VPs."""
        m = self.as_matrix()
        w = m[:, 2:3].copy()
        tiny = np.finfo(np.float64).tiny
        w[np.abs(w) < tiny] = tiny
        return m[:, :2] / w


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics: square pixels, zero skew."""

    focal: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]

    def __post_init__(self):
        if not self.focal > 0:
            raise ValueError(f"focal must be positive, got {self.focal}")

    def K(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array(
            [[self.focal, 0.0, cx], [0.0, self.focal, cy], [0.0, 0.0, 1.0]]
        )

    def K_inv(self) -> np.ndarray:
        cx, cy = self.principal_point
        f = self.focal
        return np.array(
            [[1.0 / f, 0.0, -cx / f], [0.0, 1.0 / f, -cy / f], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class TConstraint:
    """T-junction ``w`` lies on the interior of wireframe edge ``(u, v)``
    (the occluding foreground line) at ``w = lam * u + (1 - lam) * v`` in
    image coordinates; its background depth bounds the interpolated
    foreground depth from above."""

    w: int
    edge: tuple[int, int]
    lam: float


@dataclass(frozen=True)
class GroundTruth:
    """Exact wireframe + calibration for one rendered viewpoint.

    ``edge_axes`` labels each wireframe edge with its world axis (0/1/2),
    and ``t_constraints``/``occluder_depths`` record the occlusion geometry
    behind every T-junction; these are generator by-products used as test
    oracles and are not part of the JSON interchange.
    """

    wireframe: Wireframe
    vps: "VanishingPoints"
    camera: "CameraModel"
    edge_axes: tuple[int, ...] = ()
    t_constraints: tuple[TConstraint, ...] = ()
    occluder_depths: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Violation:
    """One broken wireframe invariant, naming the rule and offending indices."""

    rule: str
    indices: tuple[int, ...]
    message: str


def validate(wf: Wireframe) -> list[Violation]:
    """Check all Wireframe invariants; returns an empty list iff they hold.

    Diagnostics, not exceptions: constructors in this package are expected to
    produce clean wireframes, and callers decide what a violation means.
    """
    out: list[Violation] = []
    n = len(wf.vertices)
    W, H = wf.image_size

    for k, (x, y) in enumerate(v.position for v in wf.vertices):
        if not (0.0 <= x < W and 0.0 <= y < H) or not (np.isfinite(x) and np.isfinite(y)):
            out.append(
                Violation("position-bounds", (k,), f"vertex {k} at ({x}, {y}) outside [0,{W})x[0,{H})")
            )
    for k, v in enumerate(wf.vertices):
        if v.depth is not None and not (np.isfinite(v.depth) and v.depth > 0):
            out.append(Violation("depth-positive", (k,), f"vertex {k} depth {v.depth} not > 0"))

    seen: set[tuple[int, int]] = set()
    for i, j in wf.edges:
        if i == j:
            out.append(Violation("self-loop", (i, j), f"edge ({i}, {j}) is a self-loop"))
            continue
        if not (0 <= i < n and 0 <= j < n):
            out.append(Violation("edge-index", (i, j), f"edge ({i}, {j}) references missing vertex"))
            continue
        if (i, j) in seen:
            out.append(Violation("duplicate-edge", (i, j), f"edge ({i}, {j}) duplicated"))
        seen.add((i, j))

    deg = wf.degrees()
    for k, v in enumerate(wf.vertices):
        if v.jtype is JunctionType.T and deg[k] != 1:
            out.append(Violation("T-degree", (k,), f"T-vertex {k} has degree {deg[k]}, expected 1"))
    return out


def normalize_vp(raw) -> np.ndarray:
    """Map a VP at image point (x, y) to ``[x, y, 1] / (x^2 + y^2 + 1)``.

    The normalization keeps far-away vanishing points bounded (norm <= 1)
    while remaining invertible for finite points.
    """
    x, y = float(raw[0]), float(raw[1])
    return np.array([x, y, 1.0]) / (x * x + y * y + 1.0)


def calibrated_ray(cam: CameraModel, p) -> np.ndarray:
    """``K^-1 [p_x, p_y, 1]^T``: the viewing ray with unit z-component."""
    x, y = float(p[0]), float(p[1])
    cx, cy = cam.principal_point
    return np.array([(x - cx) / cam.focal, (y - cy) / cam.focal, 1.0])


def project(cam: CameraModel, X) -> np.ndarray:
    """Project a camera-space point (z > 0) to pixel coordinates."""
    X = np.asarray(X, dtype=np.float64)
    cx, cy = cam.principal_point
    return np.array([cam.focal * X[0] / X[2] + cx, cam.focal * X[1] / X[2] + cy])


# --- wireframe JSON interchange -------------------------------------------
#
# {"image_size": [W, H],
#  "vertices": [{"xy": [x, y], "type": "C"|"T", "depth": number|null}, ...],
#  "edges": [[i, j], ...]}            # canonical form sorts edges


def wireframe_to_json(wf: Wireframe) -> dict:
    return {
        "image_size": [wf.image_size[0], wf.image_size[1]],
        "vertices": [
            {
                "xy": [float(v.position[0]), float(v.position[1])],
                "type": v.jtype.value,
                "depth": None if v.depth is None else float(v.depth),
            }
            for v in wf.vertices
        ],
        "edges": [[i, j] for i, j in sorted(wf.edges)],
    }


def wireframe_from_json(doc: dict) -> Wireframe:
    vertices = [
        Vertex(
            (float(v["xy"][0]), float(v["xy"][1])),
            JunctionType(v["type"]),
            None if v.get("depth") is None else float(v["depth"]),
        )
        for v in doc["vertices"]
    ]
    return Wireframe(vertices, [tuple(e) for e in doc["edges"]], tuple(doc["image_size"]))


def dumps_wireframe(wf: Wireframe) -> str:
    """Canonical serialization: fixed key order, edges sorted lexicographically."""
    return json.dumps(wireframe_to_json(wf), indent=1)


def loads_wireframe(text: str) -> Wireframe:
    return wireframe_from_json(json.loads(text))
