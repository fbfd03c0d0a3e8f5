"""Per-image feature extraction: pyramid -> anchors -> regions -> descriptors.

Features leave this module as float32, matching index storage, so a query
image re-extracted with the same configuration is bit-identical to its
indexed entry.  All distance computation downstream happens in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .boxes import BoxPrior, RotatedBox, candidates
from .config import PipelineConfig
from .features import build_pyramid, global_feature
from .geometry import CircularAnchor, ImagePoint, anchor_lattice
from .proposals import RegionRecord, select_regions


class AnchorMode(str, Enum):
    """Anchor placement/orientation variants for the ablation grid."""

    RA_HD = "ra+hd"  # rectangular anchor grid, horizontal boxes
    CA_HD = "ca+hd"  # circular anchors, horizontal boxes
    CA_DD = "ca+dd"  # circular anchors, deformation-direction boxes (full SPN)


@dataclass(frozen=True)
class ImageFeatures:
    """Extraction output for one image: global descriptor plus regions."""

    global_f: np.ndarray  # (4, 256) float32, per-level unit norm (or zero)
    regions: list[RegionRecord]  # features float32

    @property
    def region_features(self) -> list[np.ndarray]:
        return [r.feature for r in self.regions]


def rectangular_lattice(cfg: PipelineConfig) -> list[CircularAnchor]:
    """Uniform l x l axis-aligned anchor grid over the image square."""
    step = cfg.camera.image_size / cfg.l
    out = []
    for i in range(cfg.l):
        for j in range(cfg.l):
            point = ImagePoint((j + 0.5) * step, (i + 0.5) * step)
            out.append(CircularAnchor(point=point, direction=0.0, lat_index=i, lon_index=j))
    return out


def anchors_for_mode(cfg: PipelineConfig, mode: AnchorMode) -> list[CircularAnchor]:
    if mode is AnchorMode.RA_HD:
        return rectangular_lattice(cfg)
    lattice = anchor_lattice(cfg.camera, cfg.l)
    if mode is AnchorMode.CA_HD:
        lattice = [
            CircularAnchor(point=a.point, direction=0.0, lat_index=a.lat_index, lon_index=a.lon_index)
            for a in lattice
        ]
    return lattice


def candidate_boxes(
    cfg: PipelineConfig, priors: list[BoxPrior], mode: AnchorMode = AnchorMode.CA_DD
) -> list[RotatedBox]:
    return candidates(anchors_for_mode(cfg, mode), priors, cfg.camera)


def _narrow(record: RegionRecord) -> RegionRecord:
    return RegionRecord(
        box=record.box,
        score=record.score,
        feature=record.feature.astype(np.float32),
    )


def extract_features(
    img: np.ndarray,
    cfg: PipelineConfig,
    priors: list[BoxPrior],
    mode: AnchorMode = AnchorMode.CA_DD,
    cands: list[RotatedBox] | None = None,
) -> ImageFeatures:
    """Run the full extraction pipeline on one image.

    ``cands`` lets callers reuse precomputed candidate boxes (they depend
    only on cfg, priors, and mode, not on the image).
    """
    if len(priors) != cfg.n_priors:
        raise ValueError(f"config expects {cfg.n_priors} priors, got {len(priors)}")
    pyr = build_pyramid(img, cfg.seed)
    if cands is None:
        cands = candidate_boxes(cfg, priors, mode)
    regions = select_regions(pyr, cands, top_n=cfg.top_n, nms_iou=cfg.nms_iou)
    return ImageFeatures(
        global_f=global_feature(pyr).astype(np.float32),
        regions=[_narrow(r) for r in regions],
    )
