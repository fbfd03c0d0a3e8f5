"""Synthetic all-sky corpus with ground-truth rotated boxes.

Stands in for real auroral imagery: arc and vortex structures are drawn
along deformation lines in sky coordinates, projected through the camera
model, and grouped into relevance classes that share a structure template.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .boxes import RotatedBox
from .geometry import HALF_PI, CameraModel, _line_params, line_direction
from .rng import XorShift64Star, gaussian_field

_LEVEL_SET_FRACTION = 0.2  # ground-truth boxes cover field >= this * intensity
_LON_EDGE_SOFTNESS = 0.03  # soft falloff of the arc segment window (line fraction)
_VORTEX_ENVELOPE = 2.5  # envelope sigma in units of thickness
_VORTEX_TWIST = 3.0  # radians of arm phase per e-fold of radius

_TEMPLATE_STREAM = 1_000
_IMAGE_STREAM = 1_000_000


@dataclass(frozen=True)
class StructureSpec:
    kind: str  # "arc" or "vortex"
    lat_band: int
    lon_center: float
    lon_extent: float
    intensity: float
    thickness: float  # sky-angle radians

    def __post_init__(self):
        if self.kind not in ("arc", "vortex"):
            raise ValueError(f"kind must be 'arc' or 'vortex', got {self.kind!r}")
        if not (0.0 < self.intensity <= 1.0):
            raise ValueError(f"intensity must be in (0, 1], got {self.intensity}")
        if self.thickness <= 0:
            raise ValueError(f"thickness must be > 0, got {self.thickness}")
        half = self.lon_extent / 2.0
        if not (0.0 <= self.lon_center - half and self.lon_center + half <= 1.0):
            raise ValueError(
                f"segment [{self.lon_center - half}, {self.lon_center + half}] "
                "leaves the [0, 1] line range"
            )


@dataclass(frozen=True)
class SceneSpec:
    class_id: int
    structures: tuple[StructureSpec, ...]
    noise_sigma: float
    seed: int


@lru_cache(maxsize=4)
def _sky_grids(cam: CameraModel):
    """Per-pixel sky geometry for a camera (pixel centers at +0.5).

    Elevation runs negative outside the rim so fields stay smooth across
    the boundary; the final image is masked to the disk anyway.
    """
    size = cam.image_size
    coord = np.arange(size) + 0.5
    xs = np.broadcast_to(coord[None, :], (size, size))
    ys = np.broadcast_to(coord[:, None], (size, size))
    dx = xs - cam.center_x
    dy = cam.center_y - ys
    r = np.hypot(dx, dy)
    inside = r <= cam.rim_radius
    elevation = HALF_PI * (1.0 - r / cam.rim_radius)
    azimuth = np.arctan2(dy, dx) - cam.phi
    ce = np.cos(elevation)
    m = ce * np.cos(azimuth)
    t = ce * np.sin(azimuth)
    z = np.sin(elevation)
    lat = np.arcsin(np.clip(m, -1.0, 1.0))
    psi = np.arctan2(t, z)
    for arr in (xs, ys, inside, m, t, z, lat, psi):
        arr.flags.writeable = False
    return xs, ys, inside, m, t, z, lat, psi


def _segment_window(frac: np.ndarray, center: float, extent: float) -> np.ndarray:
    outside = np.abs(frac - center) - extent / 2.0
    return np.exp(-0.5 * (np.maximum(outside, 0.0) / _LON_EDGE_SOFTNESS) ** 2)


def _structure_field(spec: StructureSpec, cam: CameraModel, l: int) -> np.ndarray:
    _, _, _, m, t, z, lat, psi = _sky_grids(cam)
    c, rho = _line_params(spec.lat_band, l)
    if spec.kind == "arc":
        lat_line = math.asin(c)
        profile = np.exp(-0.5 * ((lat - lat_line) / spec.thickness) ** 2)
        frac = (psi + HALF_PI) / math.pi
        return spec.intensity * profile * _segment_window(frac, spec.lon_center, spec.lon_extent)

    # Vortex: envelope around a line point, with log-spiral arm modulation.
    psi_c = (spec.lon_center - 0.5) * math.pi
    vc = np.array([c, rho * math.sin(psi_c), rho * math.cos(psi_c)])
    t1 = np.array([0.0, math.cos(psi_c), -math.sin(psi_c)])  # along the line
    t2 = np.cross(vc, t1)
    dot_c = m * vc[0] + t * vc[1] + z * vc[2]
    theta_d = np.arccos(np.clip(dot_c, -1.0, 1.0))
    sigma = _VORTEX_ENVELOPE * spec.thickness
    envelope = np.exp(-0.5 * (theta_d / sigma) ** 2)
    phi_loc = np.arctan2(
        m * t2[0] + t * t2[1] + z * t2[2],
        m * t1[0] + t * t1[1] + z * t1[2],
    )
    radial = np.log(np.maximum(theta_d, 0.25 * spec.thickness) / spec.thickness)
    arms = 0.55 + 0.45 * np.cos(2.0 * phi_loc - _VORTEX_TWIST * radial)
    return spec.intensity * envelope * arms


def _level_set_box(
    field: np.ndarray, spec: StructureSpec, cam: CameraModel, l: int
) -> RotatedBox | None:
    """Minimal rotated box (at the local deformation direction) around the
    in-disk level set of one structure's field."""
    xs, ys, inside = _sky_grids(cam)[:3]
    mask = (field >= _LEVEL_SET_FRACTION * spec.intensity) & inside
    if not mask.any():
        return None
    theta = line_direction(cam, spec.lat_band, l, spec.lon_center)
    x, y = xs[mask], ys[mask]
    ct, st = math.cos(theta), math.sin(theta)
    u = x * ct - y * st
    v = -x * st - y * ct
    mid_u = 0.5 * (u.min() + u.max())
    mid_v = 0.5 * (v.min() + v.max())
    return RotatedBox(
        cx=mid_u * ct - mid_v * st,
        cy=-mid_u * st - mid_v * ct,
        w=float(u.max() - u.min()) + 1.0,
        h=float(v.max() - v.min()) + 1.0,
        theta=theta,
    )


def render_scene(
    spec: SceneSpec, cam: CameraModel, l: int = 8
) -> tuple[np.ndarray, list[RotatedBox]]:
    """Render one scene; returns the image and per-structure ground truth.

    Structure fields accumulate additively, Gaussian pixel noise is added,
    pixels outside the FOV disk are forced to zero, and the image is
    clipped to [0, 1].  Ground-truth boxes are computed per structure from
    its own field before noise.
    """
    size = cam.image_size
    img = np.zeros((size, size))
    boxes = []
    for structure in spec.structures:
        field = _structure_field(structure, cam, l)
        img += field
        box = _level_set_box(field, structure, cam, l)
        if box is not None:
            boxes.append(box)
    if spec.noise_sigma > 0:
        img += spec.noise_sigma * gaussian_field(spec.seed, size, size)
    inside = _sky_grids(cam)[2]
    img[~inside] = 0.0
    np.clip(img, 0.0, 1.0, out=img)
    return img, boxes


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------


@dataclass
class SyntheticDataset:
    images: list[tuple[str, np.ndarray]]
    classes: dict[str, int]
    boxes: dict[str, list[RotatedBox]]
    relevance: dict[str, set[str]]
    labeled_wh: np.ndarray  # (n, 2) ground-truth box shapes, feeds the prior k-means
    scenes: dict[str, SceneSpec]


@dataclass(frozen=True)
class _ClassTemplate:
    structures: tuple[StructureSpec, ...]


def _class_template(class_id: int, n_classes: int, l: int, master_seed: int) -> _ClassTemplate:
    rng = XorShift64Star(master_seed, stream=_TEMPLATE_STREAM + class_id)
    kind = "arc" if class_id % 2 == 0 else "vortex"
    band = ((2 * class_id + 1) * l) // (2 * n_classes)
    lon_center = 0.35 + 0.3 * rng.next_u01()
    if kind == "arc":
        lon_extent = 0.3 + 0.15 * rng.next_u01()
        thickness = 0.05 + 0.04 * rng.next_u01()
    else:
        lon_extent = 0.1
        thickness = 0.06 + 0.05 * rng.next_u01()
    intensity = 0.6 + 0.25 * rng.next_u01()
    primary = StructureSpec(kind, band, lon_center, lon_extent, intensity, thickness)
    structures = [primary]
    if class_id % 3 == 0:
        band2 = (band + 3) % l
        structures.append(
            StructureSpec(
                kind="arc",
                lat_band=band2,
                lon_center=min(0.88, lon_center + 0.1),
                lon_extent=0.2,
                intensity=max(0.3, intensity * 0.7),
                thickness=thickness * 0.8,
            )
        )
    return _ClassTemplate(structures=tuple(structures))


def _jitter_structure(spec: StructureSpec, rng: XorShift64Star) -> StructureSpec:
    def pct(v: float) -> float:
        return v * (1.0 + 0.05 * (2.0 * rng.next_u01() - 1.0))

    lon_center = pct(spec.lon_center)
    lon_extent = pct(spec.lon_extent)
    half = lon_extent / 2.0
    lon_center = min(max(lon_center, half), 1.0 - half)
    intensity = spec.intensity + 0.1 * (2.0 * rng.next_u01() - 1.0)
    return StructureSpec(
        kind=spec.kind,
        lat_band=spec.lat_band,
        lon_center=lon_center,
        lon_extent=lon_extent,
        intensity=min(1.0, max(0.05, intensity)),
        thickness=pct(spec.thickness),
    )


def generate_dataset(
    n_classes: int,
    per_class: int,
    cam: CameraModel,
    master_seed: int,
    l: int = 8,
    noise_sigma: float = 0.02,
) -> SyntheticDataset:
    """Deterministic corpus of ``n_classes * per_class`` rendered scenes.

    Images of a class share a structure template; each image applies its
    own +-5% geometry jitter, +-0.1 intensity jitter, and fresh noise.
    Relevance of a query is the other images of its class.
    """
    if n_classes < 2:
        raise ValueError(f"n_classes must be >= 2, got {n_classes}")
    if per_class < 2:
        raise ValueError(f"per_class must be >= 2, got {per_class}")

    templates = [_class_template(c, n_classes, l, master_seed) for c in range(n_classes)]
    images = []
    classes: dict[str, int] = {}
    boxes: dict[str, list[RotatedBox]] = {}
    scenes: dict[str, SceneSpec] = {}
    shapes = []
    for class_id in range(n_classes):
        for j in range(per_class):
            rng = XorShift64Star(master_seed, stream=_IMAGE_STREAM + class_id * 10_000 + j)
            structures = tuple(_jitter_structure(s, rng) for s in templates[class_id].structures)
            noise_seed = (rng.next_u24() << 24) | rng.next_u24()
            scene = SceneSpec(
                class_id=class_id,
                structures=structures,
                noise_sigma=noise_sigma,
                seed=noise_seed,
            )
            image_id = f"img_{class_id:02d}_{j:03d}"
            img, gt = render_scene(scene, cam, l)
            images.append((image_id, img))
            classes[image_id] = class_id
            boxes[image_id] = gt
            scenes[image_id] = scene
            shapes.extend((b.w, b.h) for b in gt)

    by_class: dict[int, list[str]] = {}
    for image_id, class_id in classes.items():
        by_class.setdefault(class_id, []).append(image_id)
    relevance = {
        image_id: set(by_class[class_id]) - {image_id}
        for image_id, class_id in classes.items()
    }
    return SyntheticDataset(
        images=images,
        classes=classes,
        boxes=boxes,
        relevance=relevance,
        labeled_wh=np.array(shapes, dtype=np.float64),
        scenes=scenes,
    )
