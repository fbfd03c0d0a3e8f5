"""Saliency-region proposals and content-based retrieval for all-sky imagery."""

from .boxes import BoxPrior, RotatedBox, candidates, kmeans_box_priors, rotated_iou
from .config import PipelineConfig
from .features import FeaturePyramid, build_pyramid, global_feature, pool_region, roi_align
from .geometry import (
    CameraModel,
    CircularAnchor,
    ImagePoint,
    OutOfFieldError,
    SkyDirection,
    anchor_lattice,
    default_camera,
    deformation_line,
    project,
    unproject,
)
from .index_store import (
    DuplicateImageIdError,
    Index,
    IndexEntry,
    IndexFormatError,
    build_index,
    load_index,
    save_index,
)
from .pipeline import AnchorMode, ImageFeatures, extract_features
from .proposals import RegionRecord, saliency_score, select_regions
from .retrieval import AllSkyRetriever, BoxShapeKMeans
from .search import (
    AblationConfig,
    ConfigMismatchError,
    FeatureMode,
    QueryResult,
    global_similarity,
    mean_average_precision,
    rank,
    regional_similarity,
    run_ablation,
)
from .synth import SceneSpec, StructureSpec, SyntheticDataset, generate_dataset, render_scene

__version__ = "0.1.0"

__all__ = [
    "AblationConfig",
    "AllSkyRetriever",
    "AnchorMode",
    "BoxPrior",
    "BoxShapeKMeans",
    "CameraModel",
    "CircularAnchor",
    "ConfigMismatchError",
    "DuplicateImageIdError",
    "FeatureMode",
    "FeaturePyramid",
    "ImageFeatures",
    "ImagePoint",
    "Index",
    "IndexEntry",
    "IndexFormatError",
    "OutOfFieldError",
    "PipelineConfig",
    "QueryResult",
    "RegionRecord",
    "RotatedBox",
    "SceneSpec",
    "SkyDirection",
    "StructureSpec",
    "SyntheticDataset",
    "anchor_lattice",
    "build_index",
    "build_pyramid",
    "candidates",
    "default_camera",
    "deformation_line",
    "extract_features",
    "generate_dataset",
    "global_feature",
    "global_similarity",
    "kmeans_box_priors",
    "load_index",
    "mean_average_precision",
    "pool_region",
    "project",
    "rank",
    "regional_similarity",
    "render_scene",
    "roi_align",
    "rotated_iou",
    "run_ablation",
    "saliency_score",
    "save_index",
    "select_regions",
    "unproject",
]
