"""Offline feature index with bit-exact binary persistence.

File layout (all little-endian), checksummed with a trailing CRC-32 of
every preceding byte:

    magic   4 bytes  "SDEI"
    version u32      1
    count   u64      number of entries
    params  l u32, n_priors u32, top_n u32, nms_iou f64, seed u64,
            camera f64 x 5 (center_x, center_y, rim_radius, phi, image_size)
    entry*  id_len u32, id utf-8, r_d u32,
            global f32 x (4*256),
            r_d x (box f32 x 5 (cx, cy, w, h, theta), feature f32 x (4*256))
    crc32   u32

Features are stored and held in memory as float32; similarity math
upcasts to float64.  Entries are kept sorted by image id.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .boxes import BoxPrior, RotatedBox
from .config import PipelineConfig
from .features import N_CHANNELS
from .geometry import CameraModel
from .pipeline import AnchorMode, ImageFeatures, candidate_boxes, extract_features

MAGIC = b"SDEI"
VERSION = 1
_FEAT_SHAPE = (4, N_CHANNELS)
_FEAT_COUNT = 4 * N_CHANNELS


class IndexFormatError(ValueError):
    """Malformed index data; the message names the failing byte offset."""


class DuplicateImageIdError(ValueError):
    pass


@dataclass(frozen=True)
class IndexEntry:
    image_id: str
    global_f: np.ndarray  # (4, 256) float32
    regions: list[tuple[RotatedBox, np.ndarray]]  # feature (4, 256) float32

    @property
    def r_d(self) -> int:
        return len(self.regions)

    @property
    def region_features(self) -> list[np.ndarray]:
        return [f for _, f in self.regions]


@dataclass
class Index:
    params: PipelineConfig
    entries: list[IndexEntry]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.entries.sort(key=lambda e: e.image_id)
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise DuplicateImageIdError(f"duplicate image ids: {dup}")

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, image_id: str) -> IndexEntry:
        lo = 0
        hi = len(self.entries)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.entries[mid].image_id < image_id:
                lo = mid + 1
            else:
                hi = mid
        if lo < len(self.entries) and self.entries[lo].image_id == image_id:
            return self.entries[lo]
        raise KeyError(image_id)

    def stacked(self) -> dict:
        """Cached flat arrays for vectorised scoring (float64)."""
        if "g" not in self._cache:
            n = len(self.entries)
            g = np.zeros((n, 4, N_CHANNELS))
            for i, e in enumerate(self.entries):
                g[i] = e.global_f
            counts = np.array([e.r_d for e in self.entries], dtype=np.int64)
            offsets = np.concatenate([[0], np.cumsum(counts)])
            regions = np.zeros((int(offsets[-1]), 4, N_CHANNELS))
            for i, e in enumerate(self.entries):
                for j, f in enumerate(e.region_features):
                    regions[offsets[i] + j] = f
            self._cache.update(g=g, counts=counts, offsets=offsets, regions=regions)
        return self._cache


def _narrow_box(box: RotatedBox) -> RotatedBox:
    """Round box fields to float32 such that reconstruction is a fixpoint.

    Rounding theta to float32 can push it just past pi/2, in which case the
    constructor re-wraps it; iterate until the stored values survive a
    construct/round cycle unchanged.
    """
    vals = box.as_array()
    for _ in range(4):
        box = RotatedBox(*(float(np.float32(v)) for v in vals))
        vals = box.as_array()
        if all(float(np.float32(v)) == float(v) for v in vals):
            return box
    raise AssertionError(f"float32 narrowing did not stabilise for {box}")


def entry_from_features(image_id: str, feats: ImageFeatures) -> IndexEntry:
    """Narrow extracted features into their storage representation."""
    regions = []
    for rec in feats.regions:
        box = _narrow_box(rec.box)
        regions.append((box, np.ascontiguousarray(rec.feature, dtype=np.float32)))
    return IndexEntry(
        image_id=image_id,
        global_f=np.ascontiguousarray(feats.global_f, dtype=np.float32),
        regions=regions,
    )


def build_index(
    images,
    cfg: PipelineConfig,
    priors: list[BoxPrior],
    mode: AnchorMode = AnchorMode.CA_DD,
) -> Index:
    """Index an iterable of (image_id, image) pairs under one configuration."""
    cands = candidate_boxes(cfg, priors, mode)
    entries = []
    seen = set()
    for image_id, img in images:
        if image_id in seen:
            raise DuplicateImageIdError(f"duplicate image id: {image_id!r}")
        seen.add(image_id)
        feats = extract_features(img, cfg, priors, mode, cands=cands)
        entries.append(entry_from_features(image_id, feats))
    return Index(params=cfg, entries=entries)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _pack_f32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def serialize_index(idx: Index) -> bytes:
    cam = idx.params.camera
    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        struct.pack("<Q", len(idx.entries)),
        struct.pack(
            "<IIIdQ5d",
            idx.params.l,
            idx.params.n_priors,
            idx.params.top_n,
            idx.params.nms_iou,
            idx.params.seed,
            *cam.as_tuple(),
        ),
    ]
    for e in idx.entries:
        raw_id = e.image_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw_id)))
        parts.append(raw_id)
        parts.append(struct.pack("<I", e.r_d))
        parts.append(_pack_f32(e.global_f))
        for box, feat in e.regions:
            parts.append(_pack_f32(box.as_array()))
            parts.append(_pack_f32(feat))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_index(idx: Index, sink) -> None:
    """Write the index to a path or binary file object."""
    data = serialize_index(idx)
    if hasattr(sink, "write"):
        sink.write(data)
    else:
        with open(sink, "wb") as fh:
            fh.write(data)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError(
                f"truncated index: needed {n} bytes for {what} at offset {self.pos}, "
                f"only {len(self.data) - self.pos} remain"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def f32_array(self, count: int, what: str) -> np.ndarray:
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4", count=count).copy()


def deserialize_index(data: bytes) -> Index:
    r = _Reader(data)
    if r.take(4, "magic") != MAGIC:
        raise IndexFormatError(f"bad magic at offset 0: expected {MAGIC!r}")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise IndexFormatError(f"unsupported version {version} at offset 4")
    (count,) = r.unpack("<Q", "entry count")
    l, n_priors, top_n, nms_iou, seed, cx, cy, rim, phi, size = r.unpack(
        "<IIIdQ5d", "parameter block"
    )
    params = PipelineConfig(
        camera=CameraModel(cx, cy, rim, phi, int(size)),
        l=l,
        n_priors=n_priors,
        top_n=top_n,
        nms_iou=nms_iou,
        seed=seed,
    )
    entries = []
    for i in range(count):
        (id_len,) = r.unpack("<I", f"id length of entry {i}")
        raw_id = r.take(id_len, f"id of entry {i}")
        try:
            image_id = raw_id.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IndexFormatError(
                f"entry {i} id is not valid UTF-8 at offset {r.pos - id_len}"
            ) from exc
        (r_d,) = r.unpack("<I", f"region count of entry {i}")
        global_f = r.f32_array(_FEAT_COUNT, f"global feature of entry {i}").reshape(_FEAT_SHAPE)
        regions = []
        for j in range(r_d):
            vals = r.f32_array(5, f"region {j} box of entry {i}")
            box = RotatedBox(*(float(v) for v in vals))
            feat = r.f32_array(_FEAT_COUNT, f"region {j} feature of entry {i}").reshape(_FEAT_SHAPE)
            regions.append((box, feat))
        entries.append(IndexEntry(image_id=image_id, global_f=global_f, regions=regions))
    crc_offset = r.pos
    (stored_crc,) = r.unpack("<I", "checksum")
    if r.pos != len(data):
        raise IndexFormatError(f"{len(data) - r.pos} trailing bytes at offset {r.pos}")
    actual = zlib.crc32(data[:crc_offset])
    if stored_crc != actual:
        raise IndexFormatError(
            f"checksum mismatch at offset {crc_offset}: stored {stored_crc:#010x}, "
            f"computed {actual:#010x}"
        )
    return Index(params=params, entries=entries)


def load_index(source) -> Index:
    """Read an index from a path or binary file object."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    return deserialize_index(data)
