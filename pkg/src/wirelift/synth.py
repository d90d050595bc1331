"""Deterministic Manhattan block scenes with exact ground-truth wireframes.

Hidden-line removal is done analytically in 2D: every cuboid edge is
projected, split at all pairwise projected crossings (and at image-border
clips), and each sub-segment is classified by ray-casting its midpoint
against every cuboid face. Splits where an edge transitions visible/hidden
become T-junctions carrying the background (occluded) depth. Exactness
beats a z-buffer here: junction positions and depths must be reproducible
bit-for-bit from the scene description.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from wirelift.core import (
    CameraModel,
    GroundTruth,
    JunctionType,
    TConstraint,
    VanishingPoints,
    Vertex,
    Wireframe,
    normalize_vp,
    project,
    validate,
)

__all__ = [
    "Cuboid",
    "CameraPose",
    "Scene3D",
    "TConstraint",
    "GroundTruth",
    "GenParams",
    "EmptyView",
    "DegenerateScene",
    "GenerationError",
    "generate",
    "project_gt",
    "vp_from_pose",
    "scene_to_json",
    "scene_from_json",
    "gt_to_json",
    "gt_from_json",
]


class EmptyView(Exception):
    """No cuboid edge is visible from the camera."""


class DegenerateScene(Exception):
    """Scene/pose combination with ill-defined ground truth (e.g. a triple
    crossing or a grazing contact); the generator resamples these."""


class GenerationError(Exception):
    """Rejection sampling failed to find an acceptable pose."""


# Local corner order of a cuboid: bit 0 -> x, bit 1 -> y, bit 2 -> z.
_CORNER_BITS = [(i & 1, (i >> 1) & 1, (i >> 2) & 1) for i in range(8)]
# The 12 edges as (corner, corner, world axis of the edge direction).
_CUBE_EDGES = [
    (a, a | (1 << axis), axis)
    for a in range(8)
    for axis in range(3)
    if a | (1 << axis) != a
]

_EPS_PARALLEL = 1e-12
_EPS_SPLIT = 1e-9          # min separation of split parameters along an edge
_EPS_ENDPOINT = 1e-7       # crossings closer than this to an endpoint are degenerate
_EPS_TAU = 1e-7            # relative ray-parameter margin for occlusion tests
_CROSS_DEPTH_GAP = 1e-6    # min relative depth gap between crossing edges
_MERGE_TOL_PX = 0.5


@dataclass(frozen=True)
class Cuboid:
    """Axis-aligned box in world meters."""

    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        lo, hi = self.min_corner, self.max_corner
        if not all(h > l for l, h in zip(lo, hi)):
            raise ValueError(f"cuboid extent must be positive: {lo} .. {hi}")

    def corners(self) -> np.ndarray:
        lo = np.asarray(self.min_corner)
        hi = np.asarray(self.max_corner)
        return np.array([np.where(bits, hi, lo) for bits in _CORNER_BITS])

    def contains(self, p, margin: float = 0.0) -> bool:
        return all(
            self.min_corner[k] - margin <= p[k] <= self.max_corner[k] + margin
            for k in range(3)
        )


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform: ``X_cam = R (X_world - position)``.

    Camera frame: x right, y down, z forward (matching image x right/y down).
    """

    rotation: tuple[tuple[float, float, float], ...]
    position: tuple[float, float, float]

    def R(self) -> np.ndarray:
        return np.array(self.rotation, dtype=np.float64)

    def center(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)

    def world_to_camera(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.center()) @ self.R().T

    def camera_to_world(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.R() + self.center()

    @classmethod
    def look_at(
        cls,
        position: Sequence[float],
        target: Sequence[float],
        roll: float = 0.0,
        up: Sequence[float] = (0.0, 0.0, 1.0),
    ) -> "CameraPose":
        pos = np.asarray(position, dtype=np.float64)
        fwd = np.asarray(target, dtype=np.float64) - pos
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(up, dtype=np.float64))
        nr = np.linalg.norm(right)
        if nr < 1e-12:
            raise ValueError("camera forward axis parallel to up vector")
        right /= nr
        down = np.cross(fwd, right)
        if roll != 0.0:
            c, s = math.cos(roll), math.sin(roll)
            right, down = c * right + s * down, -s * right + c * down
        R = np.stack([right, down, fwd])
        return cls(tuple(tuple(row) for row in R), tuple(pos))


@dataclass(frozen=True)
class Scene3D:
    """Block layout plus camera; the full deterministic scene description."""

    blocks: tuple[Cuboid, ...]
    camera: CameraModel
    pose: CameraPose
    seed: int

    def diameter(self) -> float:
        pts = np.concatenate([c.corners() for c in self.blocks])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))


@dataclass(frozen=True)
class GenParams:
    """Layout ranges and pose-quality thresholds for `generate`.

    The quality thresholds drive seeded rejection sampling: a candidate pose
    is accepted only when its ground truth is clean enough for exact
    round-trip experiments (separated junctions, non-grazing occlusions,
    finite vanishing points, depths compatible with the z >= 1 constraint).
    """

    cell: float = 2.0
    footprint: tuple[float, float] = (0.9, 1.6)
    height: tuple[float, float] = (0.6, 3.4)
    expected_blocks: float = 5.0
    image_size: tuple[int, int] = (512, 512)
    focal_range: tuple[float, float] = (450.0, 850.0)
    pp_jitter: float = 20.0
    distance_factor: tuple[float, float] = (1.4, 2.2)
    elevation_deg: tuple[float, float] = (18.0, 50.0)
    azimuth_deg: tuple[float, float] = (8.0, 82.0)
    roll_deg: tuple[float, float] = (-8.0, 8.0)
    look_jitter: float = 0.4
    min_buildings: int = 1
    min_junction_sep_px: float = 8.5
    min_edge_len_px: float = 17.0
    min_depth_gap: float = 0.05
    min_corner_angle_deg: float = 8.0
    min_axis_tilt: float = 0.08
    min_depth: float = 1.5
    frame_margin_px: float = 4.0
    min_edge_confidence: float = 0.70
    max_tries: int = 1000

    def check(self) -> None:
        if self.footprint[0] >= self.footprint[1] or self.height[0] >= self.height[1]:
            raise ValueError("degenerate params: size/height ranges must have positive width")
        if self.cell <= 0 or self.footprint[1] >= self.cell:
            raise ValueError("degenerate params: footprints must fit inside grid cells")
        if self.image_size[0] % 4 or self.image_size[1] % 4:
            raise ValueError("image_size must be divisible by the heatmap stride (4)")


def vp_from_pose(pose: CameraPose, cam: CameraModel) -> VanishingPoints:
    """Vanishing points of the three world axes under (pose, cam).

    v_i is the normalized image point of ``K r_i`` with ``r_i`` the i-th
    world axis in the camera frame; v3 is assigned to the world-up axis. An
    axis exactly parallel to the image plane has its VP at infinity, which
    the normalization maps to the zero vector in the limit.
    """
    R = pose.R()
    vs = []
    for i in range(3):
        d = R[:, i]
        if abs(d[2]) < 1e-14:
            vs.append(np.zeros(3))
            continue
        px = (
            cam.focal * d[0] / d[2] + cam.principal_point[0],
            cam.focal * d[1] / d[2] + cam.principal_point[1],
        )
        vs.append(normalize_vp(px))
    return VanishingPoints(tuple(vs[0]), tuple(vs[1]), tuple(vs[2]))


# --- hidden-line removal ----------------------------------------------------


def _faces_of(blocks: Sequence[Cuboid]) -> list[tuple]:
    """Every cuboid face as (axis, value, u_axis, v_axis, umin, umax, vmin, vmax)."""
    faces = []
    for c in blocks:
        lo, hi = c.min_corner, c.max_corner
        for axis in range(3):
            u_ax, v_ax = [k for k in range(3) if k != axis]
            for value in (lo[axis], hi[axis]):
                faces.append(
                    (axis, value, u_ax, v_ax, lo[u_ax], hi[u_ax], lo[v_ax], hi[v_ax])
                )
    return faces


def _segment_blocked(origin: np.ndarray, targets: np.ndarray, faces) -> np.ndarray:
    """For each world-space target, whether the open segment origin->target
    passes strictly through some cuboid face interior."""
    m = len(targets)
    blocked = np.zeros(m, dtype=bool)
    D = targets - origin[None, :]
    for axis, value, u_ax, v_ax, umin, umax, vmin, vmax in faces:
        dk = D[:, axis]
        ok = np.abs(dk) > 1e-300
        tau = np.full(m, np.inf)
        tau[ok] = (value - origin[axis]) / dk[ok]
        hit = ok & (tau > _EPS_TAU) & (tau < 1.0 - _EPS_TAU)
        if not hit.any():
            continue
        pu = origin[u_ax] + tau[hit] * D[hit, u_ax]
        pv = origin[v_ax] + tau[hit] * D[hit, v_ax]
        mu = 1e-12 * max(umax - umin, vmax - vmin)
        inside = (pu > umin + mu) & (pu < umax - mu) & (pv > vmin + mu) & (pv < vmax - mu)
        blocked[np.flatnonzero(hit)[inside]] = True
    return blocked


def _clip_to_frame(pa, pb, W, H, margin=1e-9) -> Optional[tuple[float, float]]:
    """Liang-Barsky clip of 2D segment pa->pb to [0, W) x [0, H).

    Returns the surviving parameter interval (s0, s1), or None.
    """
    x0, y0 = pa
    dx, dy = pb[0] - x0, pb[1] - y0
    lo, hi = 0.0, 1.0
    for p, q in (
        (-dx, x0 - 0.0),
        (dx, (W - margin) - x0),
        (-dy, y0 - 0.0),
        (dy, (H - margin) - y0),
    ):
        if abs(p) < 1e-300:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            lo = max(lo, r)
        else:
            hi = min(hi, r)
        if lo > hi:
            return None
    if hi - lo < _EPS_SPLIT:
        return None
    return (lo, hi)


def _depth_at(s: float, za: float, zb: float) -> float:
    """Perspective-correct depth at 2D parameter s along a projected edge."""
    return 1.0 / ((1.0 - s) / za + s / zb)


def _param_3d(s: float, za: float, zb: float) -> float:
    """3D parameter t on the edge whose projection has 2D parameter s."""
    return s * za / (zb + s * (za - zb))


class _EdgeRecord:
    __slots__ = ("idx", "ca", "cb", "axis", "A", "B", "pa", "pb", "clip", "splits")

    def __init__(self, idx, ca, cb, axis, A, B, pa, pb, clip):
        self.idx = idx
        self.ca = ca  # global corner key of the t=0 end
        self.cb = cb
        self.axis = axis
        self.A = A    # camera-space endpoints
        self.B = B
        self.pa = pa  # projected endpoints
        self.pb = pb
        self.clip = clip  # (s_lo, s_hi) after frame clipping
        self.splits: list[tuple[float, int]] = []  # (s, crossing id)

    def point2d(self, s: float) -> np.ndarray:
        return self.pa + s * (self.pb - self.pa)

    def depth(self, s: float) -> float:
        return _depth_at(s, self.A[2], self.B[2])


def project_gt(scene: Scene3D) -> GroundTruth:
    """Exact visible-edge wireframe of a scene, with VPs and calibration.

    C-junctions are projections of visible cuboid corners plus image-border
    clips; T-junctions appear where an occluded edge's visibility changes at
    a projected crossing, carrying the background depth there and connecting
    with degree 1 into the visible part of their background line. Raises
    `EmptyView` when nothing is visible and `DegenerateScene` for
    configurations with ill-defined semantics (triple crossings, grazing
    contacts, sub-pixel collisions involving T-junctions).
    """
    cam, pose = scene.camera, scene.pose
    W, H = cam.image_size
    origin = pose.center()
    faces = _faces_of(scene.blocks)
    for c in scene.blocks:
        if c.contains(origin, margin=1e-9):
            raise DegenerateScene("camera inside a cuboid")

    edges: list[_EdgeRecord] = []
    for ci, cub in enumerate(scene.blocks):
        cw = cub.corners()
        cc = pose.world_to_camera(cw)
        if np.any(cc[:, 2] <= 1e-9):
            raise DegenerateScene("cuboid corner behind the camera")
        pc = cam.focal * cc[:, :2] / cc[:, 2:3] + np.asarray(cam.principal_point)
        for a, b, axis in _CUBE_EDGES:
            clip = _clip_to_frame(pc[a], pc[b], W, H)
            if clip is None:
                continue
            edges.append(
                _EdgeRecord(len(edges), (ci, a), (ci, b), axis, cc[a], cc[b], pc[a], pc[b], clip)
            )

    if not edges:
        raise EmptyView("no cuboid edge projects into the frame")

    # pairwise projected crossings; each one may become a T-junction
    crossings: list[dict] = []
    n_e = len(edges)
    PA = np.array([e.pa for e in edges])
    D = np.array([e.pb - e.pa for e in edges])
    norms = np.linalg.norm(D, axis=1)
    ii, jj = np.triu_indices(n_e, k=1)
    denom = D[ii, 0] * D[jj, 1] - D[ii, 1] * D[jj, 0]
    ok = np.abs(denom) > _EPS_PARALLEL * norms[ii] * norms[jj]
    R2 = PA[jj] - PA[ii]
    with np.errstate(divide="ignore", invalid="ignore"):
        s_all = (R2[:, 0] * D[jj, 1] - R2[:, 1] * D[jj, 0]) / denom
        u_all = (R2[:, 0] * D[ii, 1] - R2[:, 1] * D[ii, 0]) / denom
    near = (
        ok
        & (s_all > -_EPS_ENDPOINT)
        & (s_all < 1 + _EPS_ENDPOINT)
        & (u_all > -_EPS_ENDPOINT)
        & (u_all < 1 + _EPS_ENDPOINT)
    )
    for k in np.flatnonzero(near):
        i, j, s, u = int(ii[k]), int(jj[k]), float(s_all[k]), float(u_all[k])
        e, f = edges[i], edges[j]
        if {e.ca, e.cb} & {f.ca, f.cb}:
            continue  # edges meeting at a cuboid corner do not cross
        if not (_EPS_ENDPOINT < s < 1 - _EPS_ENDPOINT) or not (
            _EPS_ENDPOINT < u < 1 - _EPS_ENDPOINT
        ):
            raise DegenerateScene("projected crossing at an edge endpoint")
        ze = e.depth(s)
        zf = f.depth(u)
        if abs(ze - zf) < _CROSS_DEPTH_GAP * max(ze, zf):
            raise DegenerateScene("grazing contact: crossing edges at equal depth")
        cid = len(crossings)
        crossings.append(
            {"point": e.point2d(s), "e": i, "s": s, "f": j, "u": u, "ze": ze, "zf": zf}
        )
        e.splits.append((s, cid))
        f.splits.append((u, cid))

    # split each edge at its crossings; boundaries carry their provenance
    segments: list[list[tuple]] = []  # per edge: [(s_a, s_b, tag_a, tag_b)]
    midpoints_w = []
    for e in edges:
        s_lo, s_hi = e.clip
        tag_lo = ("corner", e.ca) if s_lo <= _EPS_SPLIT else ("clip", e.idx, 0)
        tag_hi = ("corner", e.cb) if s_hi >= 1 - _EPS_SPLIT else ("clip", e.idx, 1)
        bounds = [(s_lo, tag_lo)]
        for s, cid in sorted(e.splits):
            if s <= s_lo + _EPS_SPLIT or s >= s_hi - _EPS_SPLIT:
                raise DegenerateScene("crossing at a clip boundary")
            bounds.append((s, ("T", e.idx, cid)))
        bounds.append((s_hi, tag_hi))
        for (sa, _), (sb, _) in zip(bounds[:-1], bounds[1:]):
            if sb - sa < _EPS_SPLIT:
                raise DegenerateScene("near-coincident splits: possible triple crossing")
        segs = [
            (sa, sb, ta, tb)
            for (sa, ta), (sb, tb) in zip(bounds[:-1], bounds[1:])
        ]
        segments.append(segs)
        for sa, sb, _, _ in segs:
            smid = 0.5 * (sa + sb)
            t = _param_3d(smid, e.A[2], e.B[2])
            midpoints_w.append(pose.camera_to_world(e.A + t * (e.B - e.A)))

    blocked = _segment_blocked(origin, np.asarray(midpoints_w), faces)

    # merge consecutive visible sub-segments into maximal visible runs
    junctions: dict = {}  # key -> (position, depth, jtype, crossing id | None)
    runs: list[tuple] = []  # (key_a, key_b, axis, edge idx, s_a, s_b)
    k = 0
    for e, segs in zip(edges, segments):
        vis = [not blocked[k + t] for t in range(len(segs))]
        k += len(segs)
        i = 0
        while i < len(segs):
            if not vis[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(segs) and vis[j + 1]:
                j += 1
            s_a, tag_a = segs[i][0], segs[i][2]
            s_b, tag_b = segs[j][1], segs[j][3]
            for key, s_end in ((tag_a, s_a), (tag_b, s_b)):
                if key in junctions:
                    continue
                if key[0] == "T":
                    cr = crossings[key[2]]
                    z_back = cr["ze"] if cr["e"] == e.idx else cr["zf"]
                    z_front = cr["zf"] if cr["e"] == e.idx else cr["ze"]
                    if z_back <= z_front:
                        raise DegenerateScene("visibility flip on the nearer edge of a crossing")
                    junctions[key] = (cr["point"].copy(), z_back, JunctionType.T, key[2])
                else:
                    pos = e.point2d(s_end)
                    if key[0] == "clip":
                        # round-off at the frame boundary may land epsilon outside
                        pos = np.clip(pos, 0.0, [W - 1e-9, H - 1e-9])
                    junctions[key] = (pos, e.depth(s_end), JunctionType.C, None)
            runs.append((tag_a, tag_b, e.axis, e.idx, s_a, s_b))
            i = j + 1

    if not runs:
        raise EmptyView("no visible edge in the frame")

    return _assemble(scene, junctions, runs, crossings)


def _assemble(scene, junctions, runs, crossings) -> GroundTruth:
    """Merge sub-pixel coincident C-junctions, index vertices, build edges
    and T-constraints, and validate the result."""
    keys = list(junctions.keys())

    # union-find over junctions closer than the merge tolerance
    parent = {k: k for k in keys}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for i in range(len(keys)):
        for j in range(i + 1, len(keys)):
            ki, kj = keys[i], keys[j]
            if np.linalg.norm(junctions[ki][0] - junctions[kj][0]) < _MERGE_TOL_PX:
                if junctions[ki][2] is JunctionType.T or junctions[kj][2] is JunctionType.T:
                    raise DegenerateScene("T-junction collides with another junction")
                ri, rj = find(ki), find(kj)
                if ri != rj:
                    parent[max(ri, rj, key=str)] = min(ri, rj, key=str)

    merged: dict = {}
    for k in keys:
        root = find(k)
        if root not in merged or junctions[k][1] < merged[root][1]:
            # keep the frontmost member of a merged cluster
            merged[root] = junctions[k]
    key_to_root = {k: find(k) for k in keys}

    # deterministic vertex order: C junctions first, then T, each by (y, x)
    roots = sorted(
        merged,
        key=lambda r: (merged[r][2] is not JunctionType.C, merged[r][0][1], merged[r][0][0]),
    )
    index_of = {r: i for i, r in enumerate(roots)}

    vertices = [
        Vertex((float(merged[r][0][0]), float(merged[r][0][1])), merged[r][2], float(merged[r][1]))
        for r in roots
    ]

    pairs = []
    run_of_pair = {}
    for key_a, key_b, axis, eidx, s_a, s_b in runs:
        ia = index_of[key_to_root[key_a]]
        ib = index_of[key_to_root[key_b]]
        if ia == ib:
            continue  # run collapsed by a merge
        pair = (min(ia, ib), max(ia, ib))
        if pair in run_of_pair:
            continue
        run_of_pair[pair] = (eidx, s_a, s_b)
        pairs.append((pair, axis))

    pairs.sort()
    wf_edges = [p for p, _ in pairs]
    edge_axes = [a for _, a in pairs]

    wf = Wireframe(vertices, wf_edges, scene.camera.image_size)

    # T-constraints: for each T-junction find the foreground run covering it
    t_constraints = []
    occluder_depths = {}
    pos_arr = wf.positions()
    for r in roots:
        pos, depth, jtype, cid = merged[r]
        if jtype is not JunctionType.T:
            continue
        w_idx = index_of[r]
        cr = crossings[cid]
        front_idx, front_s = (cr["f"], cr["u"]) if cr["ze"] > cr["zf"] else (cr["e"], cr["s"])
        occluder_depths[w_idx] = min(cr["ze"], cr["zf"])
        host = None
        for pair, (eidx, s_a, s_b) in run_of_pair.items():
            if eidx == front_idx and s_a + _EPS_SPLIT < front_s < s_b - _EPS_SPLIT:
                host = pair
                break
        if host is None:
            raise DegenerateScene("occluding edge invisible at a T-junction")
        pu, pv = pos_arr[host[0]], pos_arr[host[1]]
        dv = pu - pv
        lam = float(np.dot(pos - pv, dv) / np.dot(dv, dv))
        if not (1e-9 < lam < 1 - 1e-9):
            raise DegenerateScene("T-junction at the end of its occluding edge")
        if np.linalg.norm(lam * pu + (1 - lam) * pv - pos) > 1e-6:
            raise DegenerateScene("T-junction off its occluding edge")
        t_constraints.append(TConstraint(w_idx, host, lam))

    problems = validate(wf)
    if problems:
        raise DegenerateScene(f"generated wireframe violates invariants: {problems[:3]}")

    return GroundTruth(
        wireframe=wf,
        vps=vp_from_pose(scene.pose, scene.camera),
        camera=scene.camera,
        edge_axes=tuple(edge_axes),
        t_constraints=tuple(t_constraints),
        occluder_depths=occluder_depths,
    )


# --- scene generation -------------------------------------------------------


def _layout_blocks(rng: np.random.Generator, grid: tuple[int, int], params: GenParams) -> tuple[Cuboid, ...]:
    rows, cols = grid
    # crowded grids get partial occupancy so the view stays vectorizable
    p_fill = min(1.0, params.expected_blocks / (rows * cols))
    blocks = []
    for i in range(rows):
        for j in range(cols):
            w = rng.uniform(*params.footprint)
            d = rng.uniform(*params.footprint)
            h = rng.uniform(*params.height)
            # jitter inside the cell breaks accidental projective alignments
            # while keeping neighbouring blocks from interpenetrating
            jx = 0.4 * (params.cell - w) * rng.uniform(-1.0, 1.0)
            jy = 0.4 * (params.cell - d) * rng.uniform(-1.0, 1.0)
            occupied = rng.uniform() <= p_fill
            if not occupied:
                continue
            cx = (j - (cols - 1) / 2.0) * params.cell + jx
            cy = (i - (rows - 1) / 2.0) * params.cell + jy
            blocks.append(
                Cuboid((cx - w / 2, cy - d / 2, 0.0), (cx + w / 2, cy + d / 2, h))
            )
    if not blocks:
        # degenerate draw: fall back to a single centre block
        w = rng.uniform(*params.footprint)
        d = rng.uniform(*params.footprint)
        h = rng.uniform(*params.height)
        blocks.append(Cuboid((-w / 2, -d / 2, 0.0), (w / 2, d / 2, h)))
    return tuple(blocks)


def _quality_issue(scene: Scene3D, gt: GroundTruth, params: GenParams) -> Optional[str]:
    """Why this ground truth is unsuitable for exact round trips, or None."""
    wf = gt.wireframe
    pos = wf.positions()
    if len(pos) == 0:
        return "empty wireframe"
    W, H = scene.camera.image_size
    m = params.frame_margin_px
    if pos[:, 0].min() < m or pos[:, 0].max() > W - m or pos[:, 1].min() < m or pos[:, 1].max() > H - m:
        return "junction too close to the frame border"
    if len(pos) > 1:
        d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2, np.inf)
        if d2.min() < params.min_junction_sep_px**2:
            return "junction separation"
    for i, j in wf.edges:
        if np.linalg.norm(pos[i] - pos[j]) < params.min_edge_len_px:
            return "edge too short"
    if wf.depths().min() < params.min_depth:
        return "depth below the lifting floor"
    for w_idx, z_front in gt.occluder_depths.items():
        if wf.vertices[w_idx].depth - z_front < params.min_depth_gap:
            return "T-junction depth gap"
    # no two edges may leave a junction in nearly the same direction,
    # or line pruning could discard a true edge
    cos_min = math.cos(math.radians(params.min_corner_angle_deg))
    incident: dict[int, list[np.ndarray]] = {}
    for i, j in wf.edges:
        d = pos[j] - pos[i]
        d = d / np.linalg.norm(d)
        incident.setdefault(i, []).append(d)
        incident.setdefault(j, []).append(-d)
    for dirs in incident.values():
        for a in range(len(dirs)):
            for b in range(a + 1, len(dirs)):
                if float(np.dot(dirs[a], dirs[b])) > cos_min:
                    return "incident edges nearly parallel"
    # every edge must be recoverable from its own encoded edge map: a line
    # hugging a heatmap cell boundary caps the anti-aliased values near 0.5,
    # below the published line threshold, so such poses are resampled
    from wirelift.heatmap import encode
    from wirelift.vectorize import line_confidence

    emap = encode(gt).emap
    for i, j in wf.edges:
        if line_confidence(pos[i], pos[j], emap) < params.min_edge_confidence:
            return "edge confidence too low in its own encoding"
    return None


def _count_visible_blocks(scene: Scene3D, gt: GroundTruth) -> int:
    """Number of cuboids owning at least one visible wireframe vertex."""
    rays = []
    cam = scene.camera
    for v in gt.wireframe.vertices:
        rays.append(
            v.depth
            * np.array(
                [
                    (v.position[0] - cam.principal_point[0]) / cam.focal,
                    (v.position[1] - cam.principal_point[1]) / cam.focal,
                    1.0,
                ]
            )
        )
    pts = scene.pose.camera_to_world(np.asarray(rays))
    return sum(
        1 for c in scene.blocks if any(c.contains(p, margin=1e-6) for p in pts)
    )


def generate(seed: int, grid: tuple[int, int] = (2, 2), params: GenParams = GenParams()) -> Scene3D:
    """Deterministic Manhattan block scene for (seed, grid, params).

    Blocks are axis-aligned on a grid with seeded random footprints and
    heights; the camera pose is rejection-sampled until the projected ground
    truth passes all quality thresholds in ``params``.
    """
    if grid[0] < 1 or grid[1] < 1:
        raise ValueError(f"grid dims must be >= 1, got {grid}")
    params.check()
    rng = np.random.default_rng(np.random.SeedSequence([0x57F7, int(seed)]))
    layout_params = params
    blocks = _layout_blocks(rng, grid, layout_params)
    extent = max(grid) * params.cell + params.footprint[1]

    for attempt in range(params.max_tries):
        if attempt and attempt % 150 == 0:
            # this arrangement may admit no clean pose at all; redraw it,
            # progressively sparser so dense grids stay vectorizable
            layout_params = replace(
                layout_params, expected_blocks=max(2.0, 0.75 * layout_params.expected_blocks)
            )
            blocks = _layout_blocks(rng, grid, layout_params)
        focal = rng.uniform(*params.focal_range)
        W, H = params.image_size
        pp = (
            W / 2 + rng.uniform(-params.pp_jitter, params.pp_jitter),
            H / 2 + rng.uniform(-params.pp_jitter, params.pp_jitter),
        )
        cam = CameraModel(focal, pp, params.image_size)
        dist = extent * rng.uniform(*params.distance_factor) + 2.0
        azim = math.radians(rng.uniform(*params.azimuth_deg))
        elev = math.radians(rng.uniform(*params.elevation_deg))
        roll = math.radians(rng.uniform(*params.roll_deg))
        eye = np.array(
            [
                dist * math.cos(elev) * math.cos(azim),
                dist * math.cos(elev) * math.sin(azim),
                dist * math.sin(elev),
            ]
        )
        target = rng.uniform(-params.look_jitter, params.look_jitter, size=3)
        target[2] = abs(target[2]) + 0.3 * params.height[0]
        pose = CameraPose.look_at(eye, target, roll=roll)
        # every world axis must keep a finite, well-placed vanishing point
        if np.min(np.abs(pose.R()[2, :])) < params.min_axis_tilt:
            continue
        scene = Scene3D(blocks=blocks, camera=cam, pose=pose, seed=int(seed))
        try:
            gt = project_gt(scene)
        except (DegenerateScene, EmptyView):
            continue
        if _quality_issue(scene, gt, params) is not None:
            continue
        if _count_visible_blocks(scene, gt) < params.min_buildings:
            continue
        return scene
    raise GenerationError(
        f"no acceptable pose for seed={seed} grid={grid} after {params.max_tries} tries"
    )


# --- JSON interchange -------------------------------------------------------


def scene_to_json(scene: Scene3D) -> dict:
    return {
        "seed": scene.seed,
        "blocks": [
            {"min": list(c.min_corner), "max": list(c.max_corner)} for c in scene.blocks
        ],
        "camera": {
            "focal": scene.camera.focal,
            "principal_point": list(scene.camera.principal_point),
            "image_size": list(scene.camera.image_size),
        },
        "pose": {
            "rotation": [list(r) for r in scene.pose.rotation],
            "position": list(scene.pose.position),
        },
    }


def scene_from_json(doc: dict) -> Scene3D:
    return Scene3D(
        blocks=tuple(Cuboid(tuple(b["min"]), tuple(b["max"])) for b in doc["blocks"]),
        camera=CameraModel(
            doc["camera"]["focal"],
            tuple(doc["camera"]["principal_point"]),
            tuple(doc["camera"]["image_size"]),
        ),
        pose=CameraPose(
            tuple(tuple(r) for r in doc["pose"]["rotation"]),
            tuple(doc["pose"]["position"]),
        ),
        seed=int(doc["seed"]),
    )


def gt_to_json(gt: GroundTruth) -> dict:
    from wirelift.core import wireframe_to_json

    return {
        "wireframe": wireframe_to_json(gt.wireframe),
        "vps": gt.vps.as_matrix().tolist(),
        "camera": {
            "focal": gt.camera.focal,
            "principal_point": list(gt.camera.principal_point),
            "image_size": list(gt.camera.image_size),
        },
    }


def gt_from_json(doc: dict) -> GroundTruth:
    from wirelift.core import wireframe_from_json

    return GroundTruth(
        wireframe=wireframe_from_json(doc["wireframe"]),
        vps=VanishingPoints.from_matrix(np.asarray(doc["vps"])),
        camera=CameraModel(
            doc["camera"]["focal"],
            tuple(doc["camera"]["principal_point"]),
            tuple(doc["camera"]["image_size"]),
        ),
    )
