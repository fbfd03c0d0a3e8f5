"""Saliency scoring of candidate boxes and greedy rotated NMS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boxes import RotatedBox, rotated_iou
from .features import (
    ROI_OUT_SIZE,
    ROI_SAMPLES_PER_BIN,
    FeaturePyramid,
    PyramidLevel,
    _sample_points,
    bilinear_on_grid,
    pool_region,
)


@dataclass(frozen=True)
class RegionRecord:
    box: RotatedBox
    score: float
    feature: np.ndarray  # (4, N_CHANNELS)


_RING_SCALE = 1.5  # surround box = center box dilated by this factor


def _stacked_samples(boxes: list[RotatedBox], scale: float) -> tuple[np.ndarray, np.ndarray]:
    """RoI sample points of all (optionally dilated) boxes, shape (n, t, t)."""
    xs, ys = [], []
    for box in boxes:
        if scale != 1.0:
            box = RotatedBox(box.cx, box.cy, box.w * scale, box.h * scale, box.theta)
        px, py = _sample_points(box, ROI_OUT_SIZE, ROI_SAMPLES_PER_BIN)
        xs.append(px)
        ys.append(py)
    return np.stack(xs), np.stack(ys)


def _mean_activations(
    mean_grid: np.ndarray, level: PyramidLevel, px: np.ndarray, py: np.ndarray
) -> np.ndarray:
    """Per-box mean over RoI bins of the bin's channel-mean activation.

    Bilinear sampling commutes with the channel mean, so the 7x7 pooling is
    evaluated on the precomputed channel-mean grid: the result is the mean
    of all bin samples.
    """
    fx = px / level.stride - 0.5
    fy = py / level.stride - 0.5
    return bilinear_on_grid(mean_grid, fx, fy).mean(axis=(1, 2))


def saliency_scores(pyr: FeaturePyramid, boxes: list[RotatedBox]) -> np.ndarray:
    """Center-minus-surround contrast score for each box.

    Per level, with e_in the box's mean activation and e_big the mean of
    the box dilated by 1.5, the surround ring mean is
    e_ring = (2.25 * e_big - e_in) / 1.25 and the level score e_in - e_ring.
    The final score is the mean over the four levels.
    """
    if not boxes:
        return np.zeros(0)
    px_in, py_in = _stacked_samples(boxes, 1.0)
    px_big, py_big = _stacked_samples(boxes, _RING_SCALE)
    scores = np.zeros(len(boxes))
    for level in pyr.levels:
        mean_grid = level.grid.mean(axis=2)
        e_in = _mean_activations(mean_grid, level, px_in, py_in)
        e_big = _mean_activations(mean_grid, level, px_big, py_big)
        e_ring = (_RING_SCALE**2 * e_big - e_in) / (_RING_SCALE**2 - 1.0)
        scores += e_in - e_ring
    scores /= len(pyr.levels)
    return scores


def saliency_score(pyr: FeaturePyramid, box: RotatedBox) -> float:
    return float(saliency_scores(pyr, [box])[0])


def select_regions(
    pyr: FeaturePyramid,
    cands: list[RotatedBox],
    top_n: int = 8,
    nms_iou: float = 0.5,
) -> list[RegionRecord]:
    """Score, NMS-filter, and pool features for at most ``top_n`` regions.

    Greedy NMS in descending score order; a candidate is suppressed when
    its rotated IoU with any kept box reaches ``nms_iou``.  Score ties keep
    candidate input order.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    if not (0.0 < nms_iou < 1.0):
        raise ValueError(f"nms_iou must be in (0, 1), got {nms_iou}")
    if not cands:
        return []

    scores = saliency_scores(pyr, cands)
    order = np.argsort(-scores, kind="stable")
    kept: list[int] = []
    for i in order:
        if len(kept) == top_n:
            break
        if all(rotated_iou(cands[i], cands[j]) < nms_iou for j in kept):
            kept.append(int(i))
    return [
        RegionRecord(box=cands[i], score=float(scores[i]), feature=pool_region(pyr, cands[i]))
        for i in kept
    ]
