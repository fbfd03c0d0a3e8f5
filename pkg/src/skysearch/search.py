"""Similarity scoring, ranking, mAP evaluation, and the ablation grid.

Scores follow the global/regional similarity definitions: per-level
Euclidean distances are summed over the pyramid levels (Eq.-style
1/(1+dis) transforms), the regional part averages over all query-region /
index-region pairs, and the total score is the plain sum of the global
and regional parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .boxes import BoxPrior
from .config import PipelineConfig
from .index_store import Index, build_index
from .pipeline import AnchorMode, ImageFeatures

ALL_LEVELS = (0, 1, 2, 3)

# Below this many query-region x index-region pairs, distances are computed
# by direct elementwise subtraction (bit-stable per entry); above it, the
# BLAS |a|^2+|b|^2-2ab form keeps large-index queries fast.
_DIRECT_PAIR_LIMIT = 16384


class ConfigMismatchError(ValueError):
    """Query extraction configuration differs from the index's."""


@dataclass(frozen=True)
class QueryResult:
    image_id: str
    ss_g: float
    ss_r: float
    ss: float


class FeatureMode(str, Enum):
    """Which feature scales/parts contribute to the similarity score."""

    R_P2 = "r-p2"
    R_P3 = "r-p3"
    R_P4 = "r-p4"
    R_P5 = "r-p5"
    ALL_R = "r-pi"
    G_P2 = "g-p2"
    G_P3 = "g-p3"
    G_P4 = "g-p4"
    G_P5 = "g-p5"
    ALL_G = "g-pi"
    R_AND_G = "r&g"

    @property
    def levels(self) -> tuple[int, ...]:
        single = {
            FeatureMode.R_P2: (0,),
            FeatureMode.R_P3: (1,),
            FeatureMode.R_P4: (2,),
            FeatureMode.R_P5: (3,),
            FeatureMode.G_P2: (0,),
            FeatureMode.G_P3: (1,),
            FeatureMode.G_P4: (2,),
            FeatureMode.G_P5: (3,),
        }
        return single.get(self, ALL_LEVELS)

    @property
    def uses_regional(self) -> bool:
        return self in (
            FeatureMode.R_P2,
            FeatureMode.R_P3,
            FeatureMode.R_P4,
            FeatureMode.R_P5,
            FeatureMode.ALL_R,
            FeatureMode.R_AND_G,
        )

    @property
    def uses_global(self) -> bool:
        return self in (
            FeatureMode.G_P2,
            FeatureMode.G_P3,
            FeatureMode.G_P4,
            FeatureMode.G_P5,
            FeatureMode.ALL_G,
            FeatureMode.R_AND_G,
        )


@dataclass(frozen=True)
class AblationConfig:
    anchor_mode: AnchorMode = AnchorMode.CA_DD
    feature_mode: FeatureMode = FeatureMode.R_AND_G


# ---------------------------------------------------------------------------
# Similarity scores
# ---------------------------------------------------------------------------


def _level_distance_sum(a: np.ndarray, b: np.ndarray, levels: Sequence[int]) -> float:
    """Sum over the chosen levels of per-level Euclidean distances."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(sum(np.linalg.norm(a[i] - b[i]) for i in levels))


def global_similarity(q: np.ndarray, i: np.ndarray, levels: Sequence[int] = ALL_LEVELS) -> float:
    """1 / (1 + sum of per-level global feature distances); in (0, 1]."""
    return 1.0 / (1.0 + _level_distance_sum(q, i, levels))


def regional_similarity(
    q_regions: Sequence[np.ndarray],
    i_regions: Sequence[np.ndarray],
    levels: Sequence[int] = ALL_LEVELS,
) -> float:
    """Average cross-region distance pushed through 1 / (1 + .).

    Each query region is compared against all r_d index regions (mean of
    level-summed distances); the per-region values are averaged over the
    r_q query regions.  Structureless sides are degenerate: both empty
    scores 1, exactly one empty scores 0.
    """
    r_q, r_d = len(q_regions), len(i_regions)
    if r_q == 0 and r_d == 0:
        return 1.0
    if r_q == 0 or r_d == 0:
        return 0.0
    total = 0.0
    for qf in q_regions:
        per_region = sum(_level_distance_sum(qf, df, levels) for df in i_regions) / r_d
        total += per_region
    return 1.0 / (1.0 + total / r_q)


# ---------------------------------------------------------------------------
# Vectorised entry scoring
# ---------------------------------------------------------------------------


def _pairwise_level_distances(a: np.ndarray, b: np.ndarray, levels: Sequence[int]) -> np.ndarray:
    """(len(a), len(b)) matrix of level-summed Euclidean distances.

    ``a`` and ``b`` are stacks of multi-scale features, shape (n, 4, 256).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[0] * b.shape[0] <= _DIRECT_PAIR_LIMIT:
        diff = a[:, None, levels, :] - b[None, :, levels, :]
        return np.sqrt((diff**2).sum(axis=3)).sum(axis=2)
    out = np.zeros((a.shape[0], b.shape[0]))
    for lvl in levels:
        al, bl = a[:, lvl, :], b[:, lvl, :]
        sq = (al**2).sum(axis=1)[:, None] + (bl**2).sum(axis=1)[None, :]
        sq = sq - 2.0 * (al @ bl.T)
        out += np.sqrt(np.maximum(sq, 0.0))
    return out


def _segment_means(dist: np.ndarray, offsets: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Column-segment means of a (r_q, T) matrix -> (r_q, n_entries).

    Zero-length segments yield 0 (callers special-case them).
    """
    csum = np.concatenate([np.zeros((dist.shape[0], 1)), np.cumsum(dist, axis=1)], axis=1)
    sums = csum[:, offsets[1:]] - csum[:, offsets[:-1]]
    return sums / np.maximum(counts, 1)[None, :]


def _entry_scores(
    global_f: np.ndarray,
    region_features: Sequence[np.ndarray],
    index: Index,
    levels: Sequence[int] = ALL_LEVELS,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-entry (ss_g, ss_r) arrays for one query against the whole index."""
    stacked = index.stacked()
    n = len(index.entries)
    if n == 0:
        return np.zeros(0), np.zeros(0)

    qg = np.asarray(global_f, dtype=np.float64)[None]
    dis_g = _pairwise_level_distances(qg, stacked["g"], levels)[0]
    ss_g = 1.0 / (1.0 + dis_g)

    counts = stacked["counts"]
    r_q = len(region_features)
    if r_q == 0:
        ss_r = np.where(counts == 0, 1.0, 0.0)
    else:
        ss_r = np.zeros(n)
        if stacked["regions"].shape[0]:
            qr = np.stack([np.asarray(f, dtype=np.float64) for f in region_features])
            dist = _pairwise_level_distances(qr, stacked["regions"], levels)
            per_entry = _segment_means(dist, stacked["offsets"], counts).mean(axis=0)
            nonzero = counts > 0
            ss_r[nonzero] = 1.0 / (1.0 + per_entry[nonzero])
    return ss_g, ss_r


def _sorted_results(
    index: Index, ss_g: np.ndarray, ss_r: np.ndarray, ss: np.ndarray
) -> list[QueryResult]:
    order = sorted(range(len(index.entries)), key=lambda i: (-ss[i], index.entries[i].image_id))
    return [
        QueryResult(
            image_id=index.entries[i].image_id,
            ss_g=float(ss_g[i]),
            ss_r=float(ss_r[i]),
            ss=float(ss[i]),
        )
        for i in order
    ]


def rank(
    query: ImageFeatures, index: Index, cfg: PipelineConfig | None = None
) -> list[QueryResult]:
    """Score every index entry against the query and sort by total score.

    Results are ordered by ss descending, image id ascending on ties.  If
    ``cfg`` is given it must match the index's extraction parameters.
    """
    if cfg is not None:
        check_config(cfg, index.params)
    ss_g, ss_r = _entry_scores(query.global_f, query.region_features, index)
    return _sorted_results(index, ss_g, ss_r, ss_g + ss_r)


def check_config(cfg: PipelineConfig, index_params: PipelineConfig) -> None:
    if cfg.extraction_key() != index_params.extraction_key():
        raise ConfigMismatchError(
            "query configuration (l={}, n_priors={}, seed={}, camera={}) does not "
            "match index parameters (l={}, n_priors={}, seed={}, camera={})".format(
                cfg.l,
                cfg.n_priors,
                cfg.seed,
                cfg.camera.as_tuple(),
                index_params.l,
                index_params.n_priors,
                index_params.seed,
                index_params.camera.as_tuple(),
            )
        )


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def average_precision(ranked: Sequence[str], relevant: Iterable[str], query_id: str | None = None) -> float:
    """Mean over relevant items of precision at the item's rank.

    ``query_id`` (when given) is dropped from both the ranking and the
    relevance set before scoring.
    """
    rel = set(relevant)
    rel.discard(query_id)
    if not rel:
        raise ValueError(f"relevance set for query {query_id!r} is empty")
    hits = 0
    precision_sum = 0.0
    k = 0
    for image_id in ranked:
        if image_id == query_id:
            continue
        k += 1
        if image_id in rel:
            hits += 1
            precision_sum += hits / k
    return precision_sum / len(rel)


def mean_average_precision(
    rankings: Mapping[str, Sequence[str]],
    relevance: Mapping[str, Iterable[str]],
) -> float:
    """Mean AP over all queries in ``rankings``.

    Every query ranks the full corpus; the query image itself is excluded
    from its own ranking and relevance set.
    """
    if not rankings:
        raise ValueError("no queries to evaluate")
    aps = [
        average_precision(ranked, relevance[qid], query_id=qid)
        for qid, ranked in rankings.items()
    ]
    return float(np.mean(aps))


def score_for_mode(ss_g: np.ndarray, ss_r: np.ndarray, mode: FeatureMode) -> np.ndarray:
    ss = np.zeros_like(ss_g)
    if mode.uses_global:
        ss = ss + ss_g
    if mode.uses_regional:
        ss = ss + ss_r
    return ss


def evaluate_map(
    index: Index,
    relevance: Mapping[str, Iterable[str]],
    feature_mode: FeatureMode = FeatureMode.R_AND_G,
) -> float:
    """Self-query mAP: every query id is an entry of the index itself."""
    levels = feature_mode.levels
    rankings: dict[str, list[str]] = {}
    for qid in relevance:
        entry = index.get(qid)
        ss_g, ss_r = _entry_scores(entry.global_f, entry.region_features, index, levels)
        ss = score_for_mode(ss_g, ss_r, feature_mode)
        results = _sorted_results(index, ss_g, ss_r, ss)
        rankings[qid] = [r.image_id for r in results if r.image_id != qid]
    return mean_average_precision(rankings, relevance)


def run_ablation(
    images: Sequence[tuple[str, np.ndarray]],
    relevance: Mapping[str, Iterable[str]],
    cfg: PipelineConfig,
    priors: list[BoxPrior],
    anchor_modes: Sequence[AnchorMode] = tuple(AnchorMode),
    feature_modes: Sequence[FeatureMode] = (FeatureMode.R_AND_G,),
) -> dict[tuple[AnchorMode, FeatureMode], float]:
    """mAP grid over anchor-placement and feature-scale variants.

    One index is built per anchor mode (global features are identical
    across modes); each feature mode then rescoring the same index.
    """
    table: dict[tuple[AnchorMode, FeatureMode], float] = {}
    for anchor_mode in anchor_modes:
        index = build_index(images, cfg, priors, mode=anchor_mode)
        for feature_mode in feature_modes:
            table[(anchor_mode, feature_mode)] = evaluate_map(index, relevance, feature_mode)
    return table
