"""Heatmap vectorization: from a heatmap bundle to a 2.5D wireframe.

Stage 1 enumerates all C-junction pairs, keeps those whose mean edge-map
confidence clears the line threshold, and prunes crossings/near-duplicates
greedily by confidence. Stage 2 repeatedly admits T-junction candidates that
lie close to an existing line: each is projected onto its nearest host line
(the occluder it sits on, recorded for the depth-refinement ordering
constraint) and then connected to its single best partner vertex along the
background line. T-junctions keep degree exactly 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wirelift.core import JunctionType, Vertex, Wireframe
from wirelift.heatmap import HeatmapBundle
from wirelift.raster import cell_path
from wirelift.synth import TConstraint

__all__ = [
    "VectorizeParams",
    "JunctionCandidates",
    "VectorizeResult",
    "DegenerateLine",
    "extract_junctions",
    "line_confidence",
    "prune_lines",
    "vectorize",
]


class DegenerateLine(Exception):
    """Line confidence queried for two identical endpoints."""


@dataclass(frozen=True)
class VectorizeParams:
    """Thresholds for junction extraction and line construction.

    ``theta_c``/``theta_t``/``theta_e`` are the published operating points.
    ``min_angle_deg`` (the polar-angle separation for pruning) and ``t_snap``
    (max distance, in heatmap cells, for attaching a T-junction to a line)
    have no published values; the defaults are chosen to pass exact
    ground-truth round trips on generic scenes. NMS is for externally
    inferred soft heatmaps; ground-truth encodings have isolated peaks.
    """

    theta_c: float = 0.2
    theta_t: float = 0.3
    theta_e: float = 0.65
    min_angle_deg: float = 5.0
    t_snap: float = 1.5
    nms: bool = False

    def __post_init__(self):
        for name in ("theta_c", "theta_t", "theta_e"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} must lie in (0, 1)")
        if not 0.0 < self.min_angle_deg < 90.0:
            raise ValueError("min_angle_deg must lie in (0, 90)")


@dataclass(frozen=True)
class JunctionCandidates:
    """Thresholded junction detections of one type, in scan order."""

    positions: np.ndarray  # (n, 2) full-resolution pixels
    scores: np.ndarray     # (n,)
    depths: np.ndarray     # (n,)

    def __len__(self) -> int:
        return len(self.scores)


@dataclass(frozen=True)
class VectorizeResult:
    wireframe: Wireframe
    t_constraints: tuple[TConstraint, ...]
    edge_confidences: tuple[float, ...]


def _nms_keep(plane: np.ndarray) -> np.ndarray:
    """Cells that are >= all 4-neighbours (ties kept on both sides)."""
    padded = np.pad(plane, 1, constant_values=-np.inf)
    keep = np.ones_like(plane, dtype=bool)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        keep &= plane >= padded[1 + dy : plane.shape[0] + 1 + dy, 1 + dx : plane.shape[1] + 1 + dx]
    return keep


def extract_junctions(
    bundle: HeatmapBundle, params: VectorizeParams = VectorizeParams()
) -> tuple[JunctionCandidates, JunctionCandidates]:
    """Thresholded candidate sets (C, T) with sub-cell positions and depths.

    Positions are ``stride * (cell + offset)`` in full-resolution pixels;
    optional 4-neighbourhood non-max suppression runs before thresholding.
    """
    out = []
    for t, theta in ((0, params.theta_c), (1, params.theta_t)):
        plane = bundle.jmap[t]
        mask = plane >= theta
        if params.nms:
            mask &= _nms_keep(plane)
        ys, xs = np.nonzero(mask)
        ox = bundle.offset[t, 0, ys, xs].astype(np.float64)
        oy = bundle.offset[t, 1, ys, xs].astype(np.float64)
        pos = np.stack(
            [bundle.stride * (xs + ox), bundle.stride * (ys + oy)], axis=1
        )
        out.append(
            JunctionCandidates(
                positions=pos,
                scores=plane[ys, xs].astype(np.float64),
                depths=bundle.jdepth[t, ys, xs].astype(np.float64),
            )
        )
    return out[0], out[1]


def line_confidence(u, w, emap: np.ndarray, stride: int = 4) -> float:
    """Mean edge-map value over the rasterized cell path between two points.

    Endpoints are full-resolution pixel positions; the path is the shared
    8-connected walk between their heatmap cells, so the value is symmetric
    in (u, w).
    """
    u = np.asarray(u, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if np.array_equal(u, w):
        raise DegenerateLine(f"identical endpoints {tuple(u)}")
    hs, ws = emap.shape
    cells = cell_path(u, w, stride, grid_size=(ws, hs))
    return float(sum(emap[y, x] for x, y in cells) / len(cells))


def _proper_crossing(p1, p2, p3, p4, eps=1e-12) -> bool:
    """Strict interior-interior intersection of two 2D segments."""
    d1 = p2 - p1
    d2 = p4 - p3
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    scale = np.linalg.norm(d1) * np.linalg.norm(d2)
    if abs(denom) <= eps * scale:
        return False
    r = p3 - p1
    s = (r[0] * d2[1] - r[1] * d2[0]) / denom
    t = (r[0] * d1[1] - r[1] * d1[0]) / denom
    margin = 1e-9
    return margin < s < 1 - margin and margin < t < 1 - margin


def prune_lines(
    edges: list[tuple[int, int]],
    confidences: list[float],
    positions: np.ndarray,
    min_angle_deg: float = 5.0,
) -> list[int]:
    """Greedy crossing/near-duplicate removal; returns indices of survivors.

    Candidates are processed in descending confidence (ties broken by
    lexicographic endpoints); one is rejected if it properly crosses an
    already accepted line, or shares an endpoint with an accepted line at a
    polar angle below ``min_angle_deg``.
    """
    order = sorted(
        range(len(edges)),
        key=lambda k: (-confidences[k], (min(edges[k]), max(edges[k]))),
    )
    cos_thresh = math.cos(math.radians(min_angle_deg))
    accepted: list[int] = []

    def conflicts(k: int) -> bool:
        i, j = edges[k]
        pi, pj = positions[i], positions[j]
        for a in accepted:
            ai, aj = edges[a]
            shared = {i, j} & {ai, aj}
            if shared:
                s = shared.pop()
                o1 = j if i == s else i
                o2 = aj if ai == s else ai
                d1 = positions[o1] - positions[s]
                d2 = positions[o2] - positions[s]
                cosang = float(np.dot(d1, d2) / (np.linalg.norm(d1) * np.linalg.norm(d2)))
                if cosang > cos_thresh:
                    return True
            elif _proper_crossing(pi, pj, positions[ai], positions[aj]):
                return True
        return False

    for k in order:
        if not conflicts(k):
            accepted.append(k)
    return sorted(accepted)


def _point_segment(p, a, b) -> tuple[float, float]:
    """(perpendicular distance, parameter t with p ~ a + t (b - a))."""
    d = b - a
    dd = float(d @ d)
    t = float(np.dot(p - a, d) / dd)
    proj = a + np.clip(t, 0.0, 1.0) * d
    return float(np.linalg.norm(p - proj)), t


def vectorize(bundle: HeatmapBundle, params: VectorizeParams = VectorizeParams()) -> VectorizeResult:
    """Full two-stage vectorization of a heatmap bundle.

    The output wireframe satisfies every wireframe invariant (in particular
    T degree 1 and no properly crossing edge pairs); T-junction attachments
    are reported as interpolation constraints for depth refinement.
    """
    c_cands, t_cands = extract_junctions(bundle, params)
    stride = bundle.stride
    snap_px = params.t_snap * stride

    # stage 1: all C-C pairs above the confidence threshold, then pruning
    vertices: list[Vertex] = [
        Vertex((float(p[0]), float(p[1])), JunctionType.C, float(d) if d > 0 else None)
        for p, d in zip(c_cands.positions, c_cands.depths)
    ]
    positions = [np.asarray(v.position, dtype=np.float64) for v in vertices]

    cand_edges: list[tuple[int, int]] = []
    cand_conf: list[float] = []
    nc = len(vertices)
    for i in range(nc):
        for j in range(i + 1, nc):
            if np.array_equal(positions[i], positions[j]):
                continue
            c = line_confidence(positions[i], positions[j], bundle.emap, stride)
            if c >= params.theta_e:
                cand_edges.append((i, j))
                cand_conf.append(c)
    keep = prune_lines(cand_edges, cand_conf, np.asarray(positions).reshape(-1, 2), params.min_angle_deg)
    edges: list[tuple[int, int]] = [cand_edges[k] for k in keep]
    conf_of: dict[tuple[int, int], float] = {cand_edges[k]: cand_conf[k] for k in keep}

    # stage 2: fixed-point admission of T-junctions
    pending = list(range(len(t_cands)))
    host_of: dict[int, tuple[int, int]] = {}  # vertex index -> host edge
    lam_of: dict[int, float] = {}
    t_depths: dict[int, float] = {}
    changed = True
    while changed:
        changed = False

        # (a) attach pending candidates to their nearest line
        still = []
        for k in pending:
            p = t_cands.positions[k]
            best = None
            for e in edges:
                a, b = positions[e[0]], positions[e[1]]
                dist, t = _point_segment(p, a, b)
                if dist <= snap_px and 0.0 < t < 1.0:
                    if best is None or dist < best[0]:
                        best = (dist, e, t)
            if best is None:
                still.append(k)
                continue
            _, host, t = best
            a, b = positions[host[0]], positions[host[1]]
            proj = a + t * (b - a)
            idx = len(vertices)
            depth = float(t_cands.depths[k])
            vertices.append(Vertex((float(proj[0]), float(proj[1])), JunctionType.T, depth if depth > 0 else None))
            positions.append(proj)
            host_of[idx] = host
            lam_of[idx] = 1.0 - t  # proj == lam * a + (1 - lam) * b
            t_depths[idx] = depth
            changed = True
        pending = still

        # (b) connect each attached, still-isolated T to its best partner
        degree: dict[int, int] = {}
        for i, j in edges:
            degree[i] = degree.get(i, 0) + 1
            degree[j] = degree.get(j, 0) + 1
        cos_host = math.cos(math.radians(params.min_angle_deg))
        for w in sorted(host_of):
            if degree.get(w, 0) > 0:
                continue
            pw = positions[w]
            hd = positions[host_of[w][1]] - positions[host_of[w][0]]
            hd = hd / np.linalg.norm(hd)
            best = None  # (conf, partner)
            for q in range(len(vertices)):
                if q == w or q in host_of[w]:  # never the host endpoints
                    continue
                # a T partner must stay at degree 1
                if vertices[q].jtype is JunctionType.T and degree.get(q, 0) > 0:
                    continue
                dq = positions[q] - pw
                nq = np.linalg.norm(dq)
                if nq == 0.0:
                    continue
                # a partner along the host direction would duplicate the host
                if abs(float(np.dot(dq / nq, hd))) > cos_host:
                    continue
                c = line_confidence(pw, positions[q], bundle.emap, stride)
                if c < params.theta_e:
                    continue
                if best is None or c > best[0] or (c == best[0] and q < best[1]):
                    best = (c, q)
            if best is not None:
                c, q = best
                e = (min(w, q), max(w, q))
                if e not in conf_of:
                    edges.append(e)
                    conf_of[e] = c
                    degree[w] = degree.get(w, 0) + 1
                    degree[q] = degree.get(q, 0) + 1
                    changed = True

    # final pruning over the union of C-C and T edges
    pos_arr = np.asarray(positions).reshape(-1, 2)
    all_conf = [conf_of[e] for e in edges]
    keep = prune_lines(edges, all_conf, pos_arr, params.min_angle_deg)
    kept = [(edges[k], all_conf[k]) for k in keep]

    # drop T vertices that ended up isolated, then reindex
    degree = {}
    for (i, j), _ in kept:
        degree[i] = degree.get(i, 0) + 1
        degree[j] = degree.get(j, 0) + 1
    keep_vertex = [
        k
        for k, v in enumerate(vertices)
        if v.jtype is JunctionType.C or degree.get(k, 0) == 1
    ]
    remap = {old: new for new, old in enumerate(keep_vertex)}
    out_edges = sorted(
        ((remap[i], remap[j]), c) for (i, j), c in kept if i in remap and j in remap
    )
    edge_set = {e for e, _ in out_edges}

    wf = Wireframe(
        [vertices[k] for k in keep_vertex], [e for e, _ in out_edges], bundle.image_size
    )
    t_constraints = []
    for w in sorted(host_of):
        if w not in remap:
            continue
        hi, hj = host_of[w]
        if hi not in remap or hj not in remap:
            continue
        he = (remap[hi], remap[hj])
        if he not in edge_set:
            continue  # host line was pruned away
        t_constraints.append(TConstraint(remap[w], he, lam_of[w]))

    return VectorizeResult(
        wireframe=wf,
        t_constraints=tuple(t_constraints),
        edge_confidences=tuple(c for _, c in out_edges),
    )
