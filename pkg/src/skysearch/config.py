"""Pipeline configuration shared by indexing, querying, and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field

from .geometry import CameraModel, default_camera

DEFAULT_L = 8
DEFAULT_N_PRIORS = 6
DEFAULT_TOP_N = 8
DEFAULT_NMS_IOU = 0.5
DEFAULT_SEED = 20240101


@dataclass(frozen=True)
class PipelineConfig:
    """Everything needed to reproduce feature extraction for an index.

    ``l`` is the meridian division count (the anchor lattice is l x l);
    ``n_priors`` the number of K-means box priors; ``seed`` drives the
    backbone projection matrices.
    """

    camera: CameraModel = field(default_factory=default_camera)
    l: int = DEFAULT_L
    n_priors: int = DEFAULT_N_PRIORS
    top_n: int = DEFAULT_TOP_N
    nms_iou: float = DEFAULT_NMS_IOU
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.l < 1:
            raise ValueError(f"l must be >= 1, got {self.l}")
        if self.n_priors < 1:
            raise ValueError(f"n_priors must be >= 1, got {self.n_priors}")
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")
        if not (0.0 < self.nms_iou < 1.0):
            raise ValueError(f"nms_iou must be in (0, 1), got {self.nms_iou}")
        if not (0 <= self.seed < 1 << 64):
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    def extraction_key(self) -> tuple:
        """The fields that must match between an index and its queries."""
        return (self.l, self.n_priors, self.seed, self.camera.as_tuple())
