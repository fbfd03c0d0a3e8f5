"""Command-line interface: synth, priors, index, query, eval, ablate, anchors."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import dataio
from .boxes import BoxPrior, kmeans_box_priors
from .config import (
    DEFAULT_L,
    DEFAULT_N_PRIORS,
    DEFAULT_NMS_IOU,
    DEFAULT_SEED,
    DEFAULT_TOP_N,
    PipelineConfig,
)
from .geometry import CameraModel, anchor_lattice
from .index_store import Index, build_index, load_index, save_index
from .pipeline import AnchorMode, extract_features
from .search import FeatureMode, evaluate_map, rank, run_ablation
from .synth import generate_dataset
from .validation import check_gray_image


def _add_camera_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("camera")
    g.add_argument("--image-size", type=int, default=512, help="square image side (default 512)")
    g.add_argument("--center-x", type=float, default=None, help="FOV center x (default size/2)")
    g.add_argument("--center-y", type=float, default=None, help="FOV center y (default size/2)")
    g.add_argument(
        "--rim-radius", type=float, default=None, help="FOV disk radius (default size/2 - 6)"
    )
    g.add_argument(
        "--phi", type=float, default=0.0, help="magnetic meridian offset angle, radians (default 0)"
    )


def _add_pipeline_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--l", type=int, default=DEFAULT_L, help=f"meridian divisions; l*l anchors (default {DEFAULT_L})")
    g.add_argument("--k", type=int, default=DEFAULT_N_PRIORS, help=f"number of box priors (default {DEFAULT_N_PRIORS})")
    g.add_argument("--top-n", type=int, default=DEFAULT_TOP_N, help=f"max regions kept per image (default {DEFAULT_TOP_N})")
    g.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_IOU, help=f"NMS suppression threshold (default {DEFAULT_NMS_IOU})")
    g.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"backbone / clustering seed (default {DEFAULT_SEED})")


def _add_prior_source_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--labels", help="labeled box shapes, one 'w h' pair per line")
    g.add_argument("--priors", help="precomputed priors, one 'w h' pair per line")


def _camera(args) -> CameraModel:
    size = args.image_size
    cx = args.center_x if args.center_x is not None else size / 2.0
    cy = args.center_y if args.center_y is not None else size / 2.0
    rim = args.rim_radius if args.rim_radius is not None else size / 2.0 - 6.0
    return CameraModel(cx, cy, rim, phi=args.phi, image_size=size)


def _config(args) -> PipelineConfig:
    return PipelineConfig(
        camera=_camera(args),
        l=args.l,
        n_priors=args.k,
        top_n=args.top_n,
        nms_iou=args.nms_iou,
        seed=args.seed,
    )


def _resolve_priors(args, cfg: PipelineConfig, restarts: int = 10) -> list[BoxPrior]:
    if args.priors:
        wh = dataio.read_labeled_boxes(args.priors)
        if wh.shape[0] != cfg.n_priors:
            raise ValueError(
                f"{args.priors}: holds {wh.shape[0]} priors, configuration expects {cfg.n_priors}"
            )
        return [BoxPrior(float(w), float(h)) for w, h in wh]
    wh = dataio.read_labeled_boxes(args.labels)
    priors, _ = kmeans_box_priors(wh, k=cfg.n_priors, seed=cfg.seed, restarts=restarts)
    return priors


def _load_corpus(directory) -> list[tuple[str, np.ndarray]]:
    paths = dataio.corpus_image_paths(directory)
    if not paths:
        raise FileNotFoundError(f"no .pgm/.png images found in {directory!r}")
    return [(image_id, dataio.load_gray_image(path)) for image_id, path in paths]


def _emit(rows: list[tuple], header: tuple, fmt: str) -> None:
    if fmt == "tsv":
        print("\t".join(header))
        for row in rows:
            print("\t".join(row))
    else:
        widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
        print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
        for row in rows:
            print("  ".join(v.ljust(w) for v, w in zip(row, widths)))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_synth(args) -> int:
    cam = _camera(args)
    data = generate_dataset(
        n_classes=args.classes,
        per_class=args.per_class,
        cam=cam,
        master_seed=args.seed,
        l=args.l,
        noise_sigma=args.noise,
    )
    os.makedirs(args.out, exist_ok=True)
    for image_id, img in data.images:
        dataio.save_pgm(os.path.join(args.out, f"{image_id}.pgm"), img)
    dataio.write_manifest(os.path.join(args.out, "manifest.txt"), data.classes, data.boxes)
    dataio.write_relevance(os.path.join(args.out, "relevance.txt"), data.relevance)
    dataio.write_labeled_boxes(os.path.join(args.out, "labels.txt"), data.labeled_wh)
    print(f"wrote {len(data.images)} images to {args.out}")
    return 0


def _cmd_priors(args) -> int:
    wh = dataio.read_labeled_boxes(args.labels)
    rows = []
    for k in range(1, args.max_k + 1):
        _, avg_iou = kmeans_box_priors(wh, k=k, seed=args.seed, restarts=args.restarts)
        rows.append(("%d" % k, "%.6f" % avg_iou))
    _emit(rows, ("k", "avg_iou"), args.format)
    priors, avg_iou = kmeans_box_priors(wh, k=args.k, seed=args.seed, restarts=args.restarts)
    _emit(
        [("%.6f" % p.w, "%.6f" % p.h) for p in priors],
        ("prior_w", "prior_h"),
        args.format,
    )
    return 0


def _cmd_index(args) -> int:
    cfg = _config(args)
    priors = _resolve_priors(args, cfg, restarts=args.restarts)
    images = _load_corpus(args.corpus)
    for _, img in images:
        check_gray_image(img, cfg.camera)
    index = build_index(images, cfg, priors)
    save_index(index, args.out)
    total_regions = sum(e.r_d for e in index.entries)
    print(f"indexed {len(index)} images ({total_regions} regions) -> {args.out}")
    return 0


def _cmd_query(args) -> int:
    index = load_index(args.index)
    cfg = index.params
    priors = _resolve_priors(args, cfg, restarts=args.restarts)
    img = check_gray_image(dataio.load_gray_image(args.image), cfg.camera)
    feats = extract_features(img, cfg, priors)
    results = rank(feats, index, cfg=cfg)[: args.top]
    rows = [
        ("%d" % (i + 1), r.image_id, "%.6f" % r.ss_g, "%.6f" % r.ss_r, "%.6f" % r.ss)
        for i, r in enumerate(results)
    ]
    _emit(rows, ("rank", "image_id", "ss_g", "ss_r", "ss"), args.format)
    return 0


def _build_or_load_index(args, cfg: PipelineConfig) -> Index:
    if args.index:
        return load_index(args.index)
    if not (args.labels or args.priors):
        raise ValueError("building an index needs --labels or --priors (or pass --index)")
    priors = _resolve_priors(args, cfg, restarts=args.restarts)
    return build_index(_load_corpus(args.corpus), cfg, priors)


def _cmd_eval(args) -> int:
    cfg = _config(args)
    relevance_path = args.relevance or os.path.join(args.corpus, "relevance.txt")
    relevance = dataio.read_relevance(relevance_path)
    index = _build_or_load_index(args, cfg)
    value = evaluate_map(index, relevance)
    if args.format == "tsv":
        print("map\t%.12f" % value)
    else:
        print("mAP over %d queries: %.12f" % (len(relevance), value))
    return 0


def _cmd_ablate(args) -> int:
    cfg = _config(args)
    priors = _resolve_priors(args, cfg, restarts=args.restarts)
    images = _load_corpus(args.corpus)
    relevance_path = args.relevance or os.path.join(args.corpus, "relevance.txt")
    relevance = dataio.read_relevance(relevance_path)

    anchor_table = run_ablation(
        images, relevance, cfg, priors,
        anchor_modes=tuple(AnchorMode),
        feature_modes=(FeatureMode.R_AND_G,),
    )
    feature_table = run_ablation(
        images, relevance, cfg, priors,
        anchor_modes=(AnchorMode.CA_DD,),
        feature_modes=tuple(FeatureMode),
    )
    rows = [
        ("anchors", mode.value, "%.6f" % anchor_table[(mode, FeatureMode.R_AND_G)])
        for mode in AnchorMode
    ]
    rows += [
        ("features", mode.value, "%.6f" % feature_table[(AnchorMode.CA_DD, mode)])
        for mode in FeatureMode
    ]
    _emit(rows, ("table", "mode", "map"), args.format)
    return 0


def _cmd_anchors(args) -> int:
    cam = _camera(args)
    rows = [
        (
            "%d" % a.lat_index,
            "%d" % a.lon_index,
            "%.6f" % a.point.x,
            "%.6f" % a.point.y,
            "%.6f" % a.direction,
        )
        for a in anchor_lattice(cam, args.l)
    ]
    _emit(rows, ("lat", "lon", "x", "y", "direction"), args.format)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skysearch",
        description="Saliency-region proposals and retrieval for all-sky fisheye imagery.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, pipeline=True, fmt=True):
        _add_camera_args(p)
        if pipeline:
            _add_pipeline_args(p)
        if fmt:
            p.add_argument("--format", choices=("human", "tsv"), default="human",
                           help="output format (default human)")

    p = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--noise", type=float, default=0.02, help="pixel noise sigma (default 0.02)")
    common(p, fmt=False)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("priors", help="K-means box priors and avg-IoU-vs-K table")
    p.add_argument("--labels", required=True, help="labeled box shapes ('w h' per line)")
    p.add_argument("--k", type=int, default=DEFAULT_N_PRIORS)
    p.add_argument("--max-k", type=int, default=8, help="table upper K (default 8)")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_priors)

    p = sub.add_parser("index", help="build and save a feature index")
    p.add_argument("--corpus", required=True, help="directory of .pgm/.png images")
    p.add_argument("--out", required=True, help="index file to write")
    p.add_argument("--restarts", type=int, default=10)
    _add_prior_source_args(p)
    common(p, fmt=False)
    p.set_defaults(func=_cmd_index)

    p = sub.add_parser("query", help="rank an index against one query image")
    p.add_argument("--index", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--top", type=int, default=10, help="rows to print (default 10)")
    p.add_argument("--restarts", type=int, default=10)
    _add_prior_source_args(p)
    p.add_argument("--format", choices=("human", "tsv"), default="human")
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="mAP of self-queries over a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", help="reuse a saved index instead of rebuilding")
    p.add_argument("--relevance", help="relevance file (default <corpus>/relevance.txt)")
    p.add_argument("--restarts", type=int, default=10)
    _add_prior_source_args(p, required=False)
    common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablate", help="anchor-mode and feature-mode mAP grids")
    p.add_argument("--corpus", required=True)
    p.add_argument("--relevance", help="relevance file (default <corpus>/relevance.txt)")
    p.add_argument("--restarts", type=int, default=10)
    _add_prior_source_args(p)
    common(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("anchors", help="dump the l*l circular anchor lattice")
    common(p, pipeline=False)
    p.add_argument("--l", type=int, default=DEFAULT_L)
    p.set_defaults(func=_cmd_anchors)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
