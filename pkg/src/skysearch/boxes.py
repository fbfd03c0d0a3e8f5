"""Rotated boxes, rotated IoU, K-means shape priors, and anchor candidates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CameraModel, CircularAnchor, wrap_direction
from .rng import XorShift64Star


@dataclass(frozen=True)
class RotatedBox:
    """Oriented rectangle; ``theta`` is the direction of the w axis.

    theta is stored in [-pi/2, pi/2) since a box is invariant under a
    half-turn of its axis.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box sides must be > 0, got w={self.w}, h={self.h}")
        object.__setattr__(self, "theta", wrap_direction(float(self.theta)))

    @property
    def area(self) -> float:
        return self.w * self.h

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel-space unit vectors of the w and h axes."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([c, -s]), np.array([-s, -c])

    def corners(self) -> np.ndarray:
        """The four corners, shape (4, 2), positively oriented for shoelace."""
        u, v = self.axes()
        c = np.array([self.cx, self.cy])
        hw, hh = 0.5 * self.w, 0.5 * self.h
        return np.array(
            [
                c - hw * u - hh * v,
                c - hw * u + hh * v,
                c + hw * u + hh * v,
                c + hw * u - hh * v,
            ]
        )

    def to_image(self, u, v):
        """Map box-frame offsets (u along w, v along h) to image coordinates."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        return self.cx + u * c - v * s, self.cy - u * s - v * c

    def contains(self, x, y) -> np.ndarray:
        """Vectorised point-in-box test (boundary counts as inside)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = np.asarray(x, dtype=np.float64) - self.cx
        dy = self.cy - np.asarray(y, dtype=np.float64)  # flip to math frame
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (np.abs(u) <= 0.5 * self.w) & (np.abs(v) <= 0.5 * self.h)

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h, self.theta])


@dataclass(frozen=True)
class BoxPrior:
    """Shape-only box prior from clustering labeled regions."""

    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"prior sides must be > 0, got w={self.w}, h={self.h}")


def _shoelace_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _clip_by_edge(poly: list[np.ndarray], a: np.ndarray, b: np.ndarray) -> list[np.ndarray]:
    """Sutherland-Hodgman step: keep the side left of (and on) edge a->b."""
    ex, ey = b[0] - a[0], b[1] - a[1]

    def side(p: np.ndarray) -> float:
        return ex * (p[1] - a[1]) - ey * (p[0] - a[0])

    out: list[np.ndarray] = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        sp, sq = side(p), side(q)
        if sp >= 0.0:
            out.append(p)
            if sq < 0.0:
                out.append(p + (q - p) * (sp / (sp - sq)))
        elif sq >= 0.0:
            out.append(p + (q - p) * (sp / (sp - sq)))
    return out


def _intersection_area(subject: np.ndarray, clip: np.ndarray) -> float:
    poly = list(subject)
    for i in range(len(clip)):
        poly = _clip_by_edge(poly, clip[i], clip[(i + 1) % len(clip)])
        if len(poly) < 3:
            return 0.0
    return max(0.0, _shoelace_area(np.array(poly)))


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection-over-union of two rotated boxes via convex clipping.

    The operand order is canonicalised first, so iou(a, b) and iou(b, a)
    are bit-identical; clipping a box against itself returns its own
    corner list, making iou(x, x) exactly 1.
    """
    key_a = (a.cx, a.cy, a.w, a.h, a.theta)
    key_b = (b.cx, b.cy, b.w, b.h, b.theta)
    if key_b < key_a:
        a, b = b, a
    ca, cb = a.corners(), b.corners()
    # Wide centers can never overlap; also skips clipping in the common case.
    reach = 0.5 * (math.hypot(a.w, a.h) + math.hypot(b.w, b.h))
    if math.hypot(b.cx - a.cx, b.cy - a.cy) > reach:
        return 0.0
    inter = _intersection_area(ca, cb)
    if inter == 0.0:
        return 0.0
    area_a = _shoelace_area(ca)
    area_b = _shoelace_area(cb)
    return inter / (area_a + area_b - inter)


# ---------------------------------------------------------------------------
# K-means shape priors (IoU distance, median update)
# ---------------------------------------------------------------------------


def shape_iou(wh: np.ndarray, priors: np.ndarray) -> np.ndarray:
    """IoU of centered, axis-aligned shapes; (n, 2) x (k, 2) -> (n, k)."""
    wh = np.atleast_2d(np.asarray(wh, dtype=np.float64))
    priors = np.atleast_2d(np.asarray(priors, dtype=np.float64))
    inter = np.minimum(wh[:, None, 0], priors[None, :, 0]) * np.minimum(
        wh[:, None, 1], priors[None, :, 1]
    )
    union = wh[:, 0:1] * wh[:, 1:2] + (priors[:, 0] * priors[:, 1])[None, :] - inter
    return inter / union


def _seed_priors(wh: np.ndarray, k: int, rng: XorShift64Star) -> np.ndarray:
    """k-means++-style seeding under the 1 - IoU distance."""
    n = wh.shape[0]
    chosen = [int(rng.next_u01() * n)]
    while len(chosen) < k:
        d = 1.0 - shape_iou(wh, wh[chosen])
        d2 = d.min(axis=1) ** 2
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.next_u01() * n)
        else:
            r = rng.next_u01() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        chosen.append(idx)
    return wh[chosen].copy()

_MAX_KMEANS_ITERS = 100


def _lloyd(wh: np.ndarray, priors: np.ndarray) -> tuple[np.ndarray, float]:
    """Median-update Lloyd iterations; returns (priors, avg_iou)."""
    assign = None
    for _ in range(_MAX_KMEANS_ITERS):
        iou = shape_iou(wh, priors)
        new_assign = np.argmax(iou, axis=1)  # argmin of 1 - iou, first index wins ties
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for j in range(priors.shape[0]):
            members = wh[assign == j]
            if members.size:
                priors[j] = np.median(members, axis=0)
    avg_iou = float(np.mean(shape_iou(wh, priors).max(axis=1)))
    return priors, avg_iou


def kmeans_box_priors(
    boxes: np.ndarray, k: int = 6, seed: int = 0, restarts: int = 10
) -> tuple[list[BoxPrior], float]:
    """Cluster labeled (w, h) pairs into ``k`` box priors.

    Distance is 1 - IoU of the centered axis-aligned shapes; centroids are
    component-wise medians, which bounds the pull of outlier labels.  The
    best of ``restarts`` seeded runs (by average IoU against the nearest
    prior) is returned with its priors sorted by area ascending.
    """
    wh = np.atleast_2d(np.asarray(boxes, dtype=np.float64))
    if wh.ndim != 2 or wh.shape[1] != 2:
        raise ValueError(f"boxes must have shape (n, 2), got {wh.shape}")
    if np.any(wh <= 0):
        raise ValueError("box sides must be > 0")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    if wh.shape[0] < k:
        raise ValueError(f"need at least k={k} boxes, got {wh.shape[0]}")

    best: tuple[np.ndarray, float] | None = None
    for restart in range(restarts):
        rng = XorShift64Star(seed, stream=restart)
        priors, avg_iou = _lloyd(wh, _seed_priors(wh, k, rng))
        if best is None or avg_iou > best[1]:
            best = (priors, avg_iou)
    priors, avg_iou = best
    order = np.lexsort((priors[:, 1], priors[:, 0], priors[:, 0] * priors[:, 1]))
    return [BoxPrior(float(w), float(h)) for w, h in priors[order]], avg_iou


# ---------------------------------------------------------------------------
# Proposal candidates at circular anchors
# ---------------------------------------------------------------------------

_INFIELD_GRID = 5
_INFIELD_MIN_FRACTION = 0.8


def in_field_fraction(box: RotatedBox, cam: CameraModel) -> float:
    """Fraction of a 5x5 interior sample grid that falls inside the FOV disk."""
    f = (np.arange(_INFIELD_GRID) + 0.5) / _INFIELD_GRID
    u = (f - 0.5) * box.w
    v = (f - 0.5) * box.h
    uu, vv = np.meshgrid(u, v)
    x, y = box.to_image(uu, vv)
    inside = (x - cam.center_x) ** 2 + (y - cam.center_y) ** 2 <= cam.rim_radius**2
    return float(np.count_nonzero(inside)) / inside.size


def candidates(
    lattice: list[CircularAnchor], priors: list[BoxPrior], cam: CameraModel
) -> list[RotatedBox]:
    """One candidate box per (anchor, prior), dropping mostly-out-of-field boxes.

    Output order is (lat_index, lon_index, prior index).
    """
    ordered = sorted(lattice, key=lambda a: (a.lat_index, a.lon_index))
    out = []
    for anchor in ordered:
        for prior in priors:
            box = RotatedBox(
                cx=anchor.point.x,
                cy=anchor.point.y,
                w=prior.w,
                h=prior.h,
                theta=anchor.direction,
            )
            if in_field_fraction(box, cam) >= _INFIELD_MIN_FRACTION:
                out.append(box)
    return out
