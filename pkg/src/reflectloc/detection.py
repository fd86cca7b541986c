"""Bright-blob extraction and classification.

Blobs are split into the transmitter's direct light, its surface reflection,
static background (sky patches, lamps) and unknown leftovers.  The reflection
extent measured here feeds the reflection cone's half-angles.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .camera import CameraCalibration, CameraDomainError, ObserverAttitude, cam2world, compensate_attitude

DIRECT = "direct"
REFLECTION = "reflection"
BACKGROUND = "background"
UNKNOWN = "unknown"
CLASSES = (DIRECT, REFLECTION, BACKGROUND, UNKNOWN)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class DetectionError(ValueError):
    pass


@dataclass(frozen=True)
class Centroid:
    u: float
    v: float
    area: int
    peak: int
    cls: str = UNKNOWN
    bbox: tuple[int, int, int, int] | None = None  # u_min, v_min, u_max, v_max (inclusive)
    pair: int = -1  # index of the partner blob after classification

    def __post_init__(self):
        if self.area < 1:
            raise ValueError("centroid area must be >= 1")
        if self.cls not in CLASSES:
            raise ValueError(f"unknown centroid class {self.cls!r}")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass(frozen=True)
class EllipseExtent:
    center: tuple[float, float]
    p_v: tuple[float, float]
    p_h: tuple[float, float]
    threshold: int
    bbox: tuple[int, int, int, int]

    @property
    def vertical_px(self) -> float:
        return abs(self.p_v[1] - self.center[1])

    @property
    def horizontal_px(self) -> float:
        return abs(self.p_h[0] - self.center[0])


def _check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.size == 0:
        raise DetectionError("expected a non-empty 2-D grayscale image")
    return img


def binarize(img, threshold: int) -> np.ndarray:
    img = _check_image(img)
    if not 0 <= threshold <= 255:
        raise DetectionError(f"threshold {threshold} outside [0, 255]")
    return img >= threshold


def connected_components(binary, img=None) -> list[Centroid]:
    """8-connected blobs ordered by their first pixel in raster (v, u) order.

    With ``img`` the centroid is weighted by the original intensities,
    otherwise it is the plain mean of the component's pixels.
    """
    binary = _check_image(binary).astype(bool)
    labels, count = ndimage.label(binary, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    index = np.arange(1, count + 1)
    areas = ndimage.sum_labels(binary, labels, index).astype(int)
    if img is not None:
        img = _check_image(img)
        weights = img.astype(float)
        # an all-zero component would have no mass; fall back to uniform weights
        weights = np.where(binary, np.maximum(weights, 1e-9), 0.0)
        centers = ndimage.center_of_mass(weights, labels, index)
        peaks = ndimage.maximum(img, labels, index)
    else:
        centers = ndimage.center_of_mass(binary, labels, index)
        peaks = [255] * count
    slices = ndimage.find_objects(labels)
    out = []
    for (cv, cu), area, peak, sl in zip(centers, areas, peaks, slices):
        bbox = (sl[1].start, sl[0].start, sl[1].stop - 1, sl[0].stop - 1)
        out.append(Centroid(u=float(cu), v=float(cv), area=int(area), peak=int(peak), bbox=bbox))
    return out


def detect(img, threshold: int) -> list[Centroid]:
    """Binarise then label: the per-frame front end of the pipeline."""
    return connected_components(binarize(img, threshold), img)


@dataclass
class _Track:
    u: float
    v: float
    frames: int
    area_min: int
    area_max: int


@dataclass
class PersistenceRecord:
    """Per-stream memory of blobs that keep their place and size over frames."""

    k_frames: int = 30
    area_tol: float = 0.2
    match_radius_px: float = 3.0
    tracks: list[_Track] = field(default_factory=list)

    def observe(self, cs: list[Centroid]) -> list[bool]:
        """Advance one frame; return whether each centroid is persistent."""
        new_tracks: list[_Track] = []
        flags = []
        free = list(range(len(self.tracks)))
        for c in cs:
            best, best_d = None, self.match_radius_px
            for i in free:
                t = self.tracks[i]
                d = np.hypot(t.u - c.u, t.v - c.v)
                if d <= best_d:
                    best, best_d = i, d
            if best is None:
                t = _Track(c.u, c.v, 1, c.area, c.area)
            else:
                free.remove(best)
                old = self.tracks[best]
                t = _Track(c.u, c.v, old.frames + 1, min(old.area_min, c.area), max(old.area_max, c.area))
            new_tracks.append(t)
            variation = (t.area_max - t.area_min) / t.area_max
            flags.append(t.frames >= self.k_frames and variation <= self.area_tol)
        self.tracks = new_tracks
        return flags


def _azimuth_elevation(b: np.ndarray) -> tuple[float, float]:
    return float(np.arctan2(b[1], b[0])), float(np.arctan2(b[2], np.hypot(b[0], b[1])))


def classify_centroids(
    cs: list[Centroid],
    history: PersistenceRecord,
    cal: CameraCalibration,
    attitude: ObserverAttitude | None = None,
    azimuth_tol: float = np.deg2rad(2.0),
) -> list[Centroid]:
    """Assign direct / reflection / background / unknown classes.

    A reflection is a below-horizon blob whose levelled azimuth matches a
    higher blob within ``azimuth_tol``; the higher blob becomes the direct
    light.  Unpaired blobs that persist with stable area are background,
    remaining ones above the horizon are direct, below the horizon unknown.
    """
    attitude = attitude or ObserverAttitude()
    persistent = history.observe(cs)
    angles: list[tuple[float, float] | None] = []
    for c in cs:
        try:
            b = compensate_attitude(cam2world((c.u, c.v), cal), attitude)
            angles.append(_azimuth_elevation(b))
        except CameraDomainError:
            angles.append(None)

    valid = [i for i, a in enumerate(angles) if a is not None]
    partner = {}
    # highest blobs claim their reflection first
    for i in sorted(valid, key=lambda k: -angles[k][1]):
        if i in partner:
            continue
        az_i, el_i = angles[i]
        best = None
        for j in valid:
            if j == i or j in partner:
                continue
            az_j, el_j = angles[j]
            if el_j >= 0 or el_j >= el_i:
                continue
            daz = abs(np.angle(np.exp(1j * (az_j - az_i))))
            if daz > azimuth_tol:
                continue
            key = (daz, -cs[j].area)
            if best is None or key < best[0]:
                best = (key, j)
        if best is not None:
            j = best[1]
            partner[i] = j
            partner[j] = i

    out = []
    for i, c in enumerate(cs):
        if i in partner:
            cls = DIRECT if angles[i][1] > angles[partner[i]][1] else REFLECTION
            out.append(replace(c, cls=cls, pair=partner[i]))
        elif persistent[i]:
            out.append(replace(c, cls=BACKGROUND, pair=-1))
        elif angles[i] is not None and angles[i][1] >= 0:
            out.append(replace(c, cls=DIRECT, pair=-1))
        else:
            out.append(replace(c, cls=UNKNOWN, pair=-1))
    return out


def default_bbox(c: Centroid, shape: tuple[int, int], scale: float = 5.0) -> tuple[int, int, int, int]:
    """``scale`` times the component's bounding box around its centroid, clipped to the image."""
    h, w = shape
    if c.bbox is None:
        half_u = half_v = scale / 2.0
    else:
        half_u = scale * (c.bbox[2] - c.bbox[0] + 1) / 2.0
        half_v = scale * (c.bbox[3] - c.bbox[1] + 1) / 2.0
    return (
        max(0, int(np.floor(c.u - half_u))),
        max(0, int(np.floor(c.v - half_v))),
        min(w - 1, int(np.ceil(c.u + half_u))),
        min(h - 1, int(np.ceil(c.v + half_v))),
    )


def _walk(line: np.ndarray, start: int, lo: int, hi: int, sigma: int) -> tuple[int, int]:
    """Contiguous run of ``line >= sigma`` around ``start`` restricted to [lo, hi]."""
    a = start
    while a - 1 >= lo and line[a - 1] >= sigma:
        a -= 1
    b = start
    while b + 1 <= hi and line[b + 1] >= sigma:
        b += 1
    return a, b


def measure_extent(img, p_r: Centroid, sigma: int, bbox=None) -> EllipseExtent:
    """Farthest pixels above ``sigma`` from the reflection centroid, vertically and horizontally.

    The search walks outward from the centroid along its row and column and
    stops at the first pixel below ``sigma`` or at the box edge.  When the
    centroid pixel itself is below ``sigma`` both extrema collapse onto it.
    """
    img = _check_image(img)
    if bbox is None:
        bbox = default_bbox(p_r, img.shape)
    u0, v0, u1, v1 = bbox
    if not (u0 <= p_r.u <= u1 and v0 <= p_r.v <= v1):
        raise DetectionError("bounding box does not contain the reflection centroid")
    center = (p_r.u, p_r.v)
    col = int(np.clip(round(p_r.u), u0, u1))
    row = int(np.clip(round(p_r.v), v0, v1))
    if img[row, col] < sigma:
        return EllipseExtent(center, center, center, sigma, tuple(bbox))
    top, bottom = _walk(img[:, col], row, v0, v1, sigma)
    left, right = _walk(img[row, :], col, u0, u1, sigma)
    # farthest end; ties go to the lower / right end
    v_end = bottom if abs(bottom - p_r.v) >= abs(top - p_r.v) else top
    u_end = right if abs(right - p_r.u) >= abs(left - p_r.u) else left
    p_v = center if top == bottom else (p_r.u, float(v_end))
    p_h = center if left == right else (float(u_end), p_r.v)
    return EllipseExtent(center, p_v, p_h, sigma, tuple(bbox))
