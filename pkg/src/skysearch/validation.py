"""Input validation helpers for the estimator layer and the CLI."""

from __future__ import annotations

import numpy as np

from .features import STRIDES
from .geometry import CameraModel


def check_gray_image(img, camera: CameraModel | None = None) -> np.ndarray:
    """Coerce to a square float64 grid with values in [0, 1].

    When a camera is given, the side must equal its ``image_size``; it must
    always be divisible by the coarsest pyramid stride.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"expected a square 2-D grayscale image, got shape {img.shape}")
    side = img.shape[0]
    if camera is not None and side != camera.image_size:
        raise ValueError(f"image side {side} does not match camera image_size {camera.image_size}")
    if side % STRIDES[-1] != 0:
        raise ValueError(f"image side must be divisible by {STRIDES[-1]}, got {side}")
    lo, hi = float(img.min()), float(img.max())
    if lo < 0.0 or hi > 1.0:
        raise ValueError(f"pixel values must lie in [0, 1], got range [{lo}, {hi}]")
    return img


def check_wh_array(X) -> np.ndarray:
    """Coerce labeled box shapes to a positive (n, 2) float array."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"expected shape (n, 2) of (w, h) pairs, got {X.shape}")
    if not np.all(np.isfinite(X)) or np.any(X <= 0):
        raise ValueError("box shapes must be finite and > 0")
    return X


def check_image_ids(ids, n_images: int) -> list[str]:
    if ids is None:
        width = max(4, len(str(n_images - 1)) if n_images else 1)
        return [f"img_{i:0{width}d}" for i in range(n_images)]
    ids = [str(i) for i in ids]
    if len(ids) != n_images:
        raise ValueError(f"got {len(ids)} image ids for {n_images} images")
    if len(set(ids)) != len(ids):
        raise ValueError("image ids must be unique")
    return ids
