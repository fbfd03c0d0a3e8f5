"""Deterministic feature pyramid and region pooling.

The backbone is a seeded stand-in for a trained CNN: per-cell image
statistics pushed through a fixed random projection.  It keeps the full
pipeline shape (4 levels x 256 channels) while making every downstream
number exactly reproducible.  A real network export can replace
:func:`build_pyramid` as long as it honours the :class:`FeaturePyramid`
contract (4 non-negative levels at strides 4/8/16/32).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .boxes import RotatedBox
from .rng import XorShift64Star

STRIDES = (4, 8, 16, 32)
LEVEL_NAMES = ("P2", "P3", "P4", "P5")
N_CHANNELS = 256
N_RAW = 10  # mean, std, 8 orientation bins

ROI_OUT_SIZE = 7
ROI_SAMPLES_PER_BIN = 2


class PyramidLevel(NamedTuple):
    grid: np.ndarray  # (n, n, N_CHANNELS), non-negative
    stride: int


@dataclass(frozen=True)
class FeaturePyramid:
    levels: tuple[PyramidLevel, ...]
    image_size: int
    seed: int

    def __iter__(self):
        return iter(self.levels)


@lru_cache(maxsize=16)
def projection_matrix(seed: int, level_index: int) -> np.ndarray:
    """Fixed (N_CHANNELS, N_RAW) projection, entries (2u - 1) / sqrt(N_RAW).

    Entries are drawn row-major from the xorshift64* stream of
    (seed, level_index), so the matrix depends on nothing else.
    """
    rng = XorShift64Star(seed, stream=level_index)
    u = rng.uniform_block(N_CHANNELS * N_RAW)
    m = (2.0 * u - 1.0) / math.sqrt(N_RAW)
    m = m.reshape(N_CHANNELS, N_RAW)
    m.flags.writeable = False
    return m


def _gradient_bins(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude and orientation-bin index of central-difference gradients.

    Orientations fold into [0, pi) over 8 bins; zero gradients land in bin
    0 with zero weight.
    """
    gy, gx = np.gradient(img)
    mag = np.hypot(gx, gy)
    ang = np.mod(np.arctan2(gy, gx), math.pi)
    bins = np.minimum((ang * (8.0 / math.pi)).astype(np.int64), 7)
    return mag, bins


def _cell_statistics(
    img: np.ndarray, stride: int, mag: np.ndarray, bins: np.ndarray
) -> np.ndarray:
    """(n, n, N_RAW) raw per-cell descriptors for one pyramid level."""
    n = img.shape[0] // stride
    blocks = img.reshape(n, stride, n, stride)
    mean = blocks.mean(axis=(1, 3))
    std = blocks.std(axis=(1, 3))

    rows = np.arange(img.shape[0]) // stride
    cell = rows[:, None] * n + rows[None, :]
    flat = cell * 8 + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=n * n * 8)
    hist = hist.reshape(n, n, 8)

    return np.concatenate([mean[..., None], std[..., None], hist], axis=2)


def build_pyramid(img: np.ndarray, seed: int) -> FeaturePyramid:
    """Four-level feature pyramid of a square grayscale image.

    Activations are |M_level . raw| per cell, hence non-negative, and scale
    linearly with a global intensity scale (every raw statistic is linear
    in the pixel values).
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"image must be square 2-D, got shape {img.shape}")
    size = img.shape[0]
    if size % STRIDES[-1] != 0:
        raise ValueError(f"image side must be divisible by {STRIDES[-1]}, got {size}")

    mag, bins = _gradient_bins(img)
    levels = []
    for level_index, stride in enumerate(STRIDES):
        raw = _cell_statistics(img, stride, mag, bins)
        m = projection_matrix(seed, level_index)
        n = raw.shape[0]
        grid = np.abs(raw.reshape(n * n, N_RAW) @ m.T).reshape(n, n, N_CHANNELS)
        levels.append(PyramidLevel(grid=grid, stride=stride))
    return FeaturePyramid(levels=tuple(levels), image_size=size, seed=seed)


# ---------------------------------------------------------------------------
# RoIAlign
# ---------------------------------------------------------------------------


def _sample_points(box: RotatedBox, out_size: int, samples_per_bin: int):
    """Image coordinates of the RoI sample grid, shape (total, total) each.

    First axis runs along the box h axis, second along w; within each of
    the out_size^2 bins, samples_per_bin^2 points are regularly spaced in
    the bin interior.
    """
    total = out_size * samples_per_bin
    f = (np.arange(total) + 0.5) / total
    u = (f - 0.5) * box.w
    v = (f - 0.5) * box.h
    uu = np.broadcast_to(u[None, :], (total, total))
    vv = np.broadcast_to(v[:, None], (total, total))
    return box.to_image(uu, vv)


def bilinear_on_grid(grid: np.ndarray, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Bilinear interpolation with zero padding outside the grid.

    ``grid`` is (n, m) or (n, m, C); ``fx``/``fy`` are continuous feature
    coordinates (column / row).  Samples farther than one cell outside the
    grid are exactly zero.
    """
    n, m = grid.shape[0], grid.shape[1]
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    tx = fx - x0
    ty = fy - y0

    def fetch(yi, xi):
        valid = (yi >= 0) & (yi < n) & (xi >= 0) & (xi < m)
        vals = grid[np.clip(yi, 0, n - 1), np.clip(xi, 0, m - 1)]
        if grid.ndim == 3:
            return vals * valid[..., None]
        return vals * valid

    w00 = (1 - tx) * (1 - ty)
    w01 = tx * (1 - ty)
    w10 = (1 - tx) * ty
    w11 = tx * ty
    if grid.ndim == 3:
        w00, w01, w10, w11 = (w[..., None] for w in (w00, w01, w10, w11))
    return (
        fetch(y0, x0) * w00
        + fetch(y0, x0 + 1) * w01
        + fetch(y0 + 1, x0) * w10
        + fetch(y0 + 1, x0 + 1) * w11
    )


def roi_align(
    level: PyramidLevel,
    box: RotatedBox,
    out_size: int = ROI_OUT_SIZE,
    samples_per_bin: int = ROI_SAMPLES_PER_BIN,
) -> np.ndarray:
    """Quantisation-free pooling of a rotated box from one pyramid level.

    The box is cut into out_size^2 bins in its own frame; every bin value
    is the mean of its bilinear samples taken at feature coordinates
    (x / stride - 0.5, y / stride - 0.5), zero outside the level grid.
    Returns (out_size, out_size, C).
    """
    if out_size < 1:
        raise ValueError(f"out_size must be >= 1, got {out_size}")
    if samples_per_bin < 1:
        raise ValueError(f"samples_per_bin must be >= 1, got {samples_per_bin}")
    px, py = _sample_points(box, out_size, samples_per_bin)
    fx = px / level.stride - 0.5
    fy = py / level.stride - 0.5
    samples = bilinear_on_grid(level.grid, fx, fy)
    s = samples_per_bin
    binned = samples.reshape(out_size, s, out_size, s, -1)
    return binned.mean(axis=(1, 3))


# ---------------------------------------------------------------------------
# Multi-scale descriptors
# ---------------------------------------------------------------------------


def normalize_rows(feats: np.ndarray) -> np.ndarray:
    """Unit-normalise each per-scale descriptor; all-zero rows stay zero."""
    feats = np.asarray(feats, dtype=np.float64)
    norms = np.linalg.norm(feats, axis=-1, keepdims=True)
    return np.divide(feats, norms, out=feats.copy(), where=norms > 0)


def pool_region(pyr: FeaturePyramid, box: RotatedBox) -> np.ndarray:
    """Multi-scale region descriptor {R-P2..R-P5}, shape (4, N_CHANNELS).

    Per level: RoIAlign to 7x7, channel-wise max over the 49 bins, then
    unit normalisation.
    """
    rows = [
        roi_align(level, box, ROI_OUT_SIZE, ROI_SAMPLES_PER_BIN).max(axis=(0, 1))
        for level in pyr.levels
    ]
    return normalize_rows(np.stack(rows))


def global_feature(pyr: FeaturePyramid) -> np.ndarray:
    """Multi-scale whole-image descriptor {G-P2..G-P5}, shape (4, N_CHANNELS)."""
    rows = [level.grid.max(axis=(0, 1)) for level in pyr.levels]
    return normalize_rows(np.stack(rows))
