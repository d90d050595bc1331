"""Reference implementations of the five training losses.

These are verification oracles for the codec and a precise spec for any
external training code; nothing here backpropagates. Cross-entropy losses
use natural log and are means over every summed element, so a uniform 0.5
prediction scores ln 2 on any target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from wirelift.core import VanishingPoints

__all__ = [
    "LossWeights",
    "ShapeMismatch",
    "NonPositiveDepth",
    "clamp_probs",
    "loss_junction",
    "loss_offset",
    "loss_edge",
    "loss_silog",
    "loss_vp",
    "loss_total",
    "loss_breakdown",
]


class ShapeMismatch(Exception):
    pass


class NonPositiveDepth(Exception):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Per-term weights; the junction/offset/edge/depth defaults balance the
    term magnitudes, the VP weight has no published default."""

    junction: float = 2.0
    offset: float = 0.25
    edge: float = 3.0
    depth: float = 0.1
    vp: float = 1.0

    def __post_init__(self):
        for name in ("junction", "offset", "edge", "depth", "vp"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"weight {name}={v} must be finite and >= 0")


def clamp_probs(x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Squeeze probabilities into (eps, 1 - eps) so hard 0/1 maps are usable
    as cross-entropy predictions."""
    return np.clip(np.asarray(x, dtype=np.float64), eps, 1.0 - eps)


def _check_shape(pred, gt):
    if np.shape(pred) != np.shape(gt):
        raise ShapeMismatch(f"shapes differ: {np.shape(pred)} vs {np.shape(gt)}")


def _bce(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return -(target * np.log(pred) + (1.0 - target) * np.log(1.0 - pred))


def loss_junction(pred_jmap: np.ndarray, gt_jmap: np.ndarray) -> float:
    """Mean binary cross entropy over both junction-type planes."""
    _check_shape(pred_jmap, gt_jmap)
    pred = np.asarray(pred_jmap, dtype=np.float64)
    gt = np.asarray(gt_jmap, dtype=np.float64)
    return float(np.mean(_bce(pred, gt)))


def loss_offset(pred_offset: np.ndarray, gt_offset: np.ndarray, gt_jmap: np.ndarray) -> float:
    """Masked squared-l2 offset error, normalized by junction count per type.

    Cells without a junction contribute nothing; a type with zero junctions
    contributes zero instead of dividing by zero.
    """
    _check_shape(pred_offset, gt_offset)
    pred = np.asarray(pred_offset, dtype=np.float64)
    gt = np.asarray(gt_offset, dtype=np.float64)
    mask = np.asarray(gt_jmap, dtype=np.float64)
    total = 0.0
    for t in range(pred.shape[0]):
        n_t = mask[t].sum()
        if n_t == 0:
            continue
        err2 = np.sum((pred[t] - gt[t]) ** 2, axis=0)
        total += float(np.sum(mask[t] * err2) / n_t)
    return total


def loss_edge(pred_emap: np.ndarray, gt_emap: np.ndarray) -> float:
    """Mean cross entropy with the soft anti-aliased edge map as target."""
    _check_shape(pred_emap, gt_emap)
    pred = np.asarray(pred_emap, dtype=np.float64)
    gt = np.asarray(gt_emap, dtype=np.float64)
    return float(np.mean(_bce(pred, gt)))


def silog(log_errors: np.ndarray) -> float:
    """Scale-invariant log error of a pooled set: E[e^2] - (E[e])^2."""
    e = np.asarray(log_errors, dtype=np.float64)
    n = e.size
    if n == 0:
        return 0.0
    return float(np.sum(e**2) / n - (np.sum(e) / n) ** 2)


def loss_silog(pred_jdepth: np.ndarray, gt_jdepth: np.ndarray, gt_jmap: np.ndarray) -> float:
    """Per-type scale-invariant log depth error at junction cells, summed.

    Zero iff each type's masked prediction equals ground truth up to one
    multiplicative constant.
    """
    _check_shape(pred_jdepth, gt_jdepth)
    pred = np.asarray(pred_jdepth, dtype=np.float64)
    gt = np.asarray(gt_jdepth, dtype=np.float64)
    mask = np.asarray(gt_jmap) == 1.0
    total = 0.0
    for t in range(pred.shape[0]):
        p = pred[t][mask[t]]
        g = gt[t][mask[t]]
        if p.size == 0:
            continue
        if np.any(p <= 0) or np.any(g <= 0):
            raise NonPositiveDepth("depths must be positive on junction cells")
        total += silog(np.log(p) - np.log(g))
    return total


def _vp_rows(v) -> np.ndarray:
    if isinstance(v, VanishingPoints):
        return v.as_matrix()
    m = np.asarray(v, dtype=np.float64)
    if m.shape != (3, 3):
        raise ShapeMismatch(f"expected (3, 3) VP matrix, got {m.shape}")
    return m


def loss_vp(pred_vps, gt_vps) -> float:
    """Chamfer l2 over the order-agnostic horizontal pair, squared l2 for
    the vertical vanishing point."""
    p = _vp_rows(pred_vps)
    g = _vp_rows(gt_vps)
    d = lambda a, b: float(np.linalg.norm(a - b))
    return (
        min(d(p[0], g[0]), d(p[1], g[0]))
        + min(d(p[0], g[1]), d(p[1], g[1]))
        + d(p[2], g[2]) ** 2
    )


def loss_breakdown(pred, gt, weights: LossWeights = LossWeights(), clamp: float = 1e-6) -> dict:
    """All five terms plus the weighted total for two heatmap bundles.

    Probability maps are clamped into (clamp, 1 - clamp) so ground-truth
    encodings (hard 0/1) can stand in as predictions.
    """
    terms = {
        "junction": loss_junction(clamp_probs(pred.jmap, clamp), gt.jmap),
        "offset": loss_offset(pred.offset, gt.offset, gt.jmap),
        "edge": loss_edge(clamp_probs(pred.emap, clamp), gt.emap),
        "depth": loss_silog(pred.jdepth, gt.jdepth, gt.jmap),
        "vp": loss_vp(pred.vps, gt.vps),
    }
    terms["total"] = (
        weights.junction * terms["junction"]
        + weights.offset * terms["offset"]
        + weights.edge * terms["edge"]
        + weights.depth * terms["depth"]
        + weights.vp * terms["vp"]
    )
    return terms


def loss_total(pred, gt, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum of the five losses over two heatmap bundles."""
    return loss_breakdown(pred, gt, weights)["total"]
