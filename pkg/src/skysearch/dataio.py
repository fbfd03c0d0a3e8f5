"""File formats: PGM images, corpus manifest, relevance and label tables."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .boxes import RotatedBox


def load_pgm(path) -> np.ndarray:
    """Read a binary 8-bit grayscale PGM (P5); intensities scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()

    tokens = []
    pos = 0
    while len(tokens) < 4 and pos < len(data):
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if pos > start:
            tokens.append(data[start:pos])
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    pos += 1  # single whitespace byte after maxval
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if pixels.size != width * height:
        raise ValueError(f"{path}: truncated pixel data")
    return pixels.reshape(height, width).astype(np.float64) / 255.0


def save_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    quantised = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(quantised.tobytes())


def load_gray_image(path) -> np.ndarray:
    """Load a grayscale image ([0, 1] floats) from PGM or, optionally, PNG."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return load_pgm(path)
    if suffix == ".png":
        from PIL import Image

        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    raise ValueError(f"{path}: unsupported image format {suffix!r} (use .pgm or .png)")


# ---------------------------------------------------------------------------
# Corpus manifest
# ---------------------------------------------------------------------------


def write_manifest(path, classes: dict[str, int], boxes: dict[str, list[RotatedBox]]) -> None:
    """One `image <id> <class>` line per image, each followed by its
    ground-truth `box cx cy w h theta` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# skysearch manifest v1\n")
        for image_id in sorted(classes):
            fh.write(f"image {image_id} {classes[image_id]}\n")
            for b in boxes.get(image_id, []):
                fh.write(f"box {b.cx:.6f} {b.cy:.6f} {b.w:.6f} {b.h:.6f} {b.theta:.6f}\n")


def read_manifest(path) -> tuple[dict[str, int], dict[str, list[RotatedBox]]]:
    classes: dict[str, int] = {}
    boxes: dict[str, list[RotatedBox]] = {}
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "image" and len(parts) == 3:
                current = parts[1]
                classes[current] = int(parts[2])
                boxes[current] = []
            elif parts[0] == "box" and len(parts) == 6 and current is not None:
                cx, cy, w, h, theta = (float(v) for v in parts[1:])
                boxes[current].append(RotatedBox(cx, cy, w, h, theta))
            else:
                raise ValueError(f"{path}:{lineno}: malformed manifest line: {line!r}")
    return classes, boxes


def relevance_from_classes(classes: dict[str, int]) -> dict[str, set[str]]:
    by_class: dict[int, set[str]] = {}
    for image_id, class_id in classes.items():
        by_class.setdefault(class_id, set()).add(image_id)
    return {i: by_class[c] - {i} for i, c in classes.items()}


# ---------------------------------------------------------------------------
# Relevance ground truth: `query_id: relevant_id relevant_id ...`
# ---------------------------------------------------------------------------


def write_relevance(path, relevance: dict[str, set[str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in sorted(relevance):
            fh.write(f"{query_id}: {' '.join(sorted(relevance[query_id]))}\n")


def read_relevance(path) -> dict[str, set[str]]:
    relevance: dict[str, set[str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if ":" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'query_id: id id ...'")
            query_id, rest = line.split(":", 1)
            relevance[query_id.strip()] = set(rest.split())
    return relevance


# ---------------------------------------------------------------------------
# Labeled box shapes: one `w h` pair per line
# ---------------------------------------------------------------------------


def write_labeled_boxes(path, wh: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w, h in np.asarray(wh, dtype=np.float64):
            fh.write(f"{w:.6f} {h:.6f}\n")


def read_labeled_boxes(path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'w h', got {line!r}")
            rows.append((float(parts[0]), float(parts[1])))
    return np.array(rows, dtype=np.float64).reshape(-1, 2)


def corpus_image_paths(directory) -> list[tuple[str, str]]:
    """(image_id, path) pairs for every PGM/PNG in a corpus directory."""
    out = []
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in (".pgm", ".png"):
            out.append((stem, os.path.join(directory, name)))
    return out
