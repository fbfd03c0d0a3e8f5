"""Fisheye camera model and the deformation-line anchor lattice.

Sky coordinates live on the unit hemisphere with an orthonormal frame
(e_m, e_t, e_z): e_m horizontal toward magnetic north (azimuth 0), e_t
horizontal toward magnetic east (azimuth pi/2), e_z the zenith.  The
magnetic meridian projects to a straight image diameter at angle ``phi``
from the +x axis; deformation lines are the small circles
{x . e_m = const}, which cross the meridian at right angles everywhere.

Image coordinates: x grows right, y grows down.  Angles in the image are
measured counterclockwise in the flipped-y (mathematical) frame, so a
direction ``beta`` corresponds to the pixel-space vector
(cos beta, -sin beta).

The lens follows the equidistant model r = R * theta_zenith / (pi/2), the
standard all-sky-imager assumption; elevation pi/4 maps to exactly R/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

HALF_PI = math.pi / 2.0

# Hemisphere step used for the finite-difference image tangent (arc length
# along the deformation line, radians on the unit sphere).
_TANGENT_ARC_STEP = 1e-4


class OutOfFieldError(ValueError):
    """Raised when an image point lies outside the field-of-view disk."""


def wrap_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi); in-range values pass through untouched."""
    a = float(a)
    if -math.pi <= a < math.pi:
        return a
    a = (a + math.pi) % (2.0 * math.pi) - math.pi
    if a >= math.pi:  # modulus can round up onto the boundary
        a -= 2.0 * math.pi
    return a


def wrap_direction(a: float) -> float:
    """Wrap a line direction (period pi) to [-pi/2, pi/2); identity in range."""
    a = float(a)
    if -HALF_PI <= a < HALF_PI:
        return a
    a = (a + HALF_PI) % math.pi - HALF_PI
    if a >= HALF_PI:
        a -= math.pi
    return a


@dataclass(frozen=True)
class CameraModel:
    """Circular fisheye camera: FOV disk position plus meridian offset."""

    center_x: float
    center_y: float
    rim_radius: float
    phi: float = 0.0
    image_size: int = 512

    def __post_init__(self):
        if not (self.rim_radius > 0):
            raise ValueError(f"rim_radius must be > 0, got {self.rim_radius}")
        if (
            self.center_x - self.rim_radius < 0
            or self.center_y - self.rim_radius < 0
            or self.center_x + self.rim_radius >= self.image_size
            or self.center_y + self.rim_radius >= self.image_size
        ):
            raise ValueError(
                "FOV disk (center=({}, {}), radius={}) does not fit inside "
                "[0, {})^2".format(
                    self.center_x, self.center_y, self.rim_radius, self.image_size
                )
            )
        object.__setattr__(self, "phi", wrap_angle(float(self.phi)))

    @property
    def center(self) -> "ImagePoint":
        return ImagePoint(self.center_x, self.center_y)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (
            float(self.center_x),
            float(self.center_y),
            float(self.rim_radius),
            float(self.phi),
            float(self.image_size),
        )


def default_camera(image_size: int = 512) -> CameraModel:
    """Disk centered in the frame with a 12-pixel margin to the border."""
    half = image_size / 2.0
    return CameraModel(half, half, half - 6.0, phi=0.0, image_size=image_size)


@dataclass(frozen=True)
class SkyDirection:
    """Azimuth from magnetic north toward magnetic east; elevation above horizon."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (0.0 <= self.elevation <= HALF_PI):
            raise ValueError(f"elevation must be in [0, pi/2], got {self.elevation}")
        object.__setattr__(self, "azimuth", wrap_angle(float(self.azimuth)))

    def unit_vector(self) -> np.ndarray:
        """Components in the (e_m, e_t, e_z) frame."""
        ce = math.cos(self.elevation)
        return np.array(
            [
                ce * math.cos(self.azimuth),
                ce * math.sin(self.azimuth),
                math.sin(self.elevation),
            ]
        )


@dataclass(frozen=True)
class ImagePoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"image point must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class CircularAnchor:
    """Lattice point on a deformation line with its image tangent direction."""

    point: ImagePoint
    direction: float  # radians in [-pi/2, pi/2), tangent of the line at point
    lat_index: int  # deformation line, 0 nearest magnetic north
    lon_index: int  # position along the line


def project(direction: SkyDirection, cam: CameraModel) -> ImagePoint:
    """Map a sky direction onto the image plane (equidistant model)."""
    r = cam.rim_radius * (HALF_PI - direction.elevation) / HALF_PI
    alpha = cam.phi + direction.azimuth
    return ImagePoint(
        cam.center_x + r * math.cos(alpha),
        cam.center_y - r * math.sin(alpha),
    )


def unproject(p: ImagePoint, cam: CameraModel) -> SkyDirection:
    """Inverse of :func:`project`; rejects points outside the FOV disk."""
    dx = p.x - cam.center_x
    dy = cam.center_y - p.y
    r = math.hypot(dx, dy)
    if r > cam.rim_radius * (1.0 + 1e-12):
        raise OutOfFieldError(
            f"point ({p.x}, {p.y}) lies {r - cam.rim_radius:.3g} px outside the "
            f"FOV disk of radius {cam.rim_radius}"
        )
    elevation = max(0.0, HALF_PI * (1.0 - r / cam.rim_radius))
    azimuth = wrap_angle(math.atan2(dy, dx) - cam.phi)
    return SkyDirection(azimuth=azimuth, elevation=elevation)


def _line_point(c: float, rho: float, psi: float) -> SkyDirection:
    """Hemisphere point on the small circle {x.e_m = c} at parameter psi.

    psi = 0 is the meridian crossing; psi = +-pi/2 are the horizon ends
    (east / west of the meridian respectively for psi > 0 / < 0).
    """
    m = c
    t = rho * math.sin(psi)
    z = rho * math.cos(psi)
    elevation = math.asin(min(1.0, max(-1.0, z)))
    azimuth = math.atan2(t, m)
    return SkyDirection(azimuth=azimuth, elevation=max(0.0, elevation))


def _line_params(lat_index: int, l: int) -> tuple[float, float]:
    """(c, rho) of the deformation line at the given meridian band."""
    t_k = (lat_index + 0.5) * math.pi / l
    return math.cos(t_k), math.sin(t_k)


def _image_tangent(cam: CameraModel, c: float, rho: float, psi: float) -> float:
    """Image direction of the deformation line at parameter psi.

    Central difference with hemisphere arc-length step ``_TANGENT_ARC_STEP``
    (converted to a psi step via the small-circle radius rho).
    """
    dpsi = _TANGENT_ARC_STEP / rho
    p_minus = project(_line_point(c, rho, psi - dpsi), cam)
    p_plus = project(_line_point(c, rho, psi + dpsi), cam)
    return wrap_direction(math.atan2(-(p_plus.y - p_minus.y), p_plus.x - p_minus.x))


def line_direction(cam: CameraModel, lat_index: int, l: int, fraction: float) -> float:
    """Tangent direction of deformation line ``lat_index`` at a [0, 1] fraction."""
    _check_line_args(lat_index, l)
    c, rho = _line_params(lat_index, l)
    psi = (fraction - 0.5) * math.pi
    return _image_tangent(cam, c, rho, psi)


def _check_line_args(lat_index: int, l: int) -> None:
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    if not (0 <= lat_index < l):
        raise ValueError(f"lat_index must be in [0, {l}), got {lat_index}")


def anchor_lattice(cam: CameraModel, l: int) -> list[CircularAnchor]:
    """All l^2 circular anchors of the deformation-line lattice.

    The meridian arc (magnetic-north horizon to magnetic-south horizon) is
    split into ``l`` equal sky-angle segments; each segment midpoint fixes
    one deformation line.  Every line is in turn split into ``l`` equal
    arcs, and the arc midpoints are projected into the image.  Midpoints
    (rather than endpoints) keep every anchor strictly inside the disk.
    """
    if l < 1:
        raise ValueError(f"l must be >= 1, got {l}")
    anchors = []
    for lat in range(l):
        c, rho = _line_params(lat, l)
        for lon in range(l):
            psi = -HALF_PI + (lon + 0.5) * math.pi / l
            point = project(_line_point(c, rho, psi), cam)
            direction = _image_tangent(cam, c, rho, psi)
            anchors.append(
                CircularAnchor(point=point, direction=direction, lat_index=lat, lon_index=lon)
            )
    return anchors


def deformation_line(
    cam: CameraModel, lat_index: int, l: int, n_samples: int
) -> np.ndarray:
    """Ordered image samples of one deformation line, shape (n_samples, 2).

    Samples run from the western horizon end (psi = -pi/2) to the eastern
    one (psi = +pi/2); the endpoints lie exactly on the rim.
    """
    _check_line_args(lat_index, l)
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    c, rho = _line_params(lat_index, l)
    out = np.empty((n_samples, 2))
    for i, psi in enumerate(np.linspace(-HALF_PI, HALF_PI, n_samples)):
        p = project(_line_point(c, rho, float(psi)), cam)
        out[i] = (p.x, p.y)
    return out
