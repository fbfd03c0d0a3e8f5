"""scikit-learn style estimators wrapping the retrieval pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .boxes import BoxPrior, kmeans_box_priors, shape_iou
from .config import (
    DEFAULT_L,
    DEFAULT_N_PRIORS,
    DEFAULT_NMS_IOU,
    DEFAULT_SEED,
    DEFAULT_TOP_N,
    PipelineConfig,
)
from .geometry import CameraModel, default_camera
from .index_store import Index, build_index
from .pipeline import AnchorMode, extract_features
from .search import QueryResult, rank
from .validation import check_gray_image, check_image_ids, check_wh_array


class BoxShapeKMeans(ClusterMixin, BaseEstimator):
    """K-means over labeled (w, h) box shapes with 1 - IoU distance.

    Attributes after fit: ``priors_`` (n_clusters, 2) sorted by area,
    ``avg_iou_`` the mean IoU of samples with their nearest prior, and
    ``labels_`` the per-sample nearest prior index.
    """

    def __init__(self, n_clusters: int = DEFAULT_N_PRIORS, seed: int = DEFAULT_SEED,
                 restarts: int = 10):
        self.n_clusters = n_clusters
        self.seed = seed
        self.restarts = restarts

    def fit(self, X, y=None):
        X = check_wh_array(X)
        priors, avg_iou = kmeans_box_priors(
            X, k=self.n_clusters, seed=self.seed, restarts=self.restarts
        )
        self.priors_ = np.array([(p.w, p.h) for p in priors])
        self.avg_iou_ = avg_iou
        self.labels_ = self.predict(X)
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "priors_")
        X = check_wh_array(X)
        return np.argmax(shape_iou(X, self.priors_), axis=1)

    def box_priors(self) -> list[BoxPrior]:
        check_is_fitted(self, "priors_")
        return [BoxPrior(float(w), float(h)) for w, h in self.priors_]


class AllSkyRetriever(BaseEstimator):
    """Content-based retrieval over all-sky images.

    ``fit`` runs offline indexing (feature extraction for every corpus
    image); ``query`` extracts the same features for a new image and ranks
    the indexed corpus by total similarity.
    """

    def __init__(
        self,
        camera: CameraModel | None = None,
        l: int = DEFAULT_L,
        n_priors: int = DEFAULT_N_PRIORS,
        top_n: int = DEFAULT_TOP_N,
        nms_iou: float = DEFAULT_NMS_IOU,
        seed: int = DEFAULT_SEED,
        restarts: int = 10,
    ):
        self.camera = camera
        self.l = l
        self.n_priors = n_priors
        self.top_n = top_n
        self.nms_iou = nms_iou
        self.seed = seed
        self.restarts = restarts

    def _config(self) -> PipelineConfig:
        return PipelineConfig(
            camera=self.camera if self.camera is not None else default_camera(),
            l=self.l,
            n_priors=self.n_priors,
            top_n=self.top_n,
            nms_iou=self.nms_iou,
            seed=self.seed,
        )

    def fit(self, X, y=None, image_ids=None, labeled_boxes=None, priors=None):
        """Index a corpus.

        X is a sequence of square grayscale images (or an (n, s, s) array).
        Box priors come either ready-made via ``priors`` or are clustered
        from ``labeled_boxes`` (w, h) pairs.
        """
        cfg = self._config()
        if priors is not None:
            priors = [p if isinstance(p, BoxPrior) else BoxPrior(*map(float, p)) for p in priors]
            if len(priors) != cfg.n_priors:
                raise ValueError(f"expected {cfg.n_priors} priors, got {len(priors)}")
        elif labeled_boxes is not None:
            priors, self.prior_avg_iou_ = kmeans_box_priors(
                check_wh_array(labeled_boxes), k=cfg.n_priors, seed=cfg.seed,
                restarts=self.restarts,
            )
        else:
            raise ValueError("fit needs either priors= or labeled_boxes=")

        images = [check_gray_image(img, cfg.camera) for img in X]
        ids = check_image_ids(image_ids, len(images))
        self.cfg_ = cfg
        self.priors_ = priors
        self.index_ = build_index(zip(ids, images), cfg, priors)
        self.n_features_in_ = None
        return self

    def query(self, image, top_k: int | None = None) -> list[QueryResult]:
        """Rank the indexed corpus against one query image."""
        check_is_fitted(self, "index_")
        image = check_gray_image(image, self.cfg_.camera)
        feats = extract_features(image, self.cfg_, self.priors_, AnchorMode.CA_DD)
        results = rank(feats, self.index_, cfg=self.cfg_)
        return results if top_k is None else results[:top_k]

    def kneighbors(self, image, n_neighbors: int = 5) -> tuple[np.ndarray, list[str]]:
        """Total similarity scores and ids of the top ``n_neighbors`` matches."""
        results = self.query(image, top_k=n_neighbors)
        return np.array([r.ss for r in results]), [r.image_id for r in results]
