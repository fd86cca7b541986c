"""Synthetic scenes: a transmitter flying over a reflective surface.

The observer sits at the origin of the levelled frame, ``observer_height``
above the surface plane.  Frames are rendered either as 8-bit images or as
the centroid lists a detector would produce, together with the ground truth.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import (
    CameraCalibration,
    CameraDomainError,
    ObserverAttitude,
    equidistant_calibration,
    in_fov,
    level_to_camera,
    load_calibration,
    world2cam,
)
from .detection import Centroid, EllipseExtent

GRAVITY = 9.81
FRESNEL_MODES = ("squared", "literal")


def fresnel_reflectance(theta_i: float, n_i: float = 1.0, n_t: float = 1.33, mode: str = "squared") -> float:
    """Reflected power fraction of unpolarised light at a planar interface.

    ``mode="squared"`` averages the squared perpendicular and parallel
    amplitude coefficients.  ``mode="literal"`` averages the unsquared
    coefficients, which cancel at normal incidence; it exists for comparison
    with the form sometimes printed in the literature.
    """
    if mode not in FRESNEL_MODES:
        raise ValueError(f"mode must be one of {FRESNEL_MODES}")
    if not 0 <= theta_i < np.pi / 2:
        raise ValueError("incidence angle must lie in [0, pi/2)")
    if n_i <= 0 or n_t <= 0:
        raise ValueError("refractive indices must be positive")
    sin_t = n_i * np.sin(theta_i) / n_t
    if sin_t >= 1.0:
        return 1.0  # total internal reflection
    cos_i = np.cos(theta_i)
    cos_t = np.sqrt(1.0 - sin_t ** 2)
    r_par = (n_t * cos_i - n_i * cos_t) / (n_i * cos_t + n_t * cos_i)
    r_perp = (n_i * cos_i - n_t * cos_t) / (n_i * cos_i + n_t * cos_t)
    if mode == "literal":
        return float(0.5 * (r_par + r_perp))
    return float(0.5 * (r_par ** 2 + r_perp ** 2))


def mirror_project(transmitter, z_o: float) -> tuple[np.ndarray, np.ndarray]:
    """Specular reflection point on ``z = -z_o`` and the observer's bearing to it."""
    t = np.asarray(transmitter, dtype=float)
    if not z_o > 0:
        raise ValueError("observer height must be positive")
    if t[2] <= -z_o:
        raise ValueError("transmitter must be above the surface")
    mirrored = np.array([t[0], t[1], -2.0 * z_o - t[2]])
    q = mirrored * (z_o / (2.0 * z_o + t[2]))
    return q, q / np.linalg.norm(q)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(times) == 0 or len(times) != len(pos):
            raise ValueError("trajectory needs matching non-empty times and positions")
        if np.any(np.diff(times) <= 0):
            raise ValueError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def hover(cls, position, duration: float) -> "Trajectory":
        return cls(np.array([0.0, duration]), np.array([position, position], dtype=float))

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(row for row in fh if not row.startswith("#"))
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["t", "x", "y", "z"]:
                raise ValueError(f"{path}: expected header t,x,y,z")
            for lineno, row in enumerate(reader, start=2):
                try:
                    rows.append([float(x) for x in row])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: {exc}") from None
                if len(rows[-1]) != 4:
                    raise ValueError(f"{path}:{lineno}: expected 4 columns")
        arr = np.array(rows, dtype=float).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1:])

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def at(self, t: float) -> np.ndarray:
        t0, t1 = self.span
        if not t0 - 1e-9 <= t <= t1 + 1e-9:
            raise ValueError(f"t={t} outside trajectory span [{t0}, {t1}]")
        return np.array([np.interp(t, self.times, self.positions[:, k]) for k in range(3)])


@dataclass(frozen=True)
class SurfaceModel:
    n_t: float = 1.33
    n_i: float = 1.0
    roughness_std: float = 0.0  # m
    wave_amplitude: float = 0.0  # m
    wave_wavelength: float = 0.05  # m
    slope_gain: float = 10.0  # surface slope per metre of roughness

    def __post_init__(self):
        if self.n_t <= 0 or self.n_i <= 0:
            raise ValueError("refractive indices must be positive")
        if self.roughness_std < 0 or self.wave_amplitude < 0 or self.wave_wavelength <= 0:
            raise ValueError("invalid surface roughness or wave parameters")

    def slope(self, x: float, t: float) -> float:
        """Effective surface slope at along-range position ``x`` and time ``t``."""
        k = 2 * np.pi / self.wave_wavelength
        omega = np.sqrt(GRAVITY * k)
        wave = self.wave_amplitude * k * abs(np.sin(k * x - omega * t))
        return self.slope_gain * self.roughness_std + wave


@dataclass(frozen=True)
class EmitterModel:
    lambert_exponent: float = 1.0
    blob_radius_px: float = 1.5  # Gaussian point-spread std
    saturation_range: float = 50.0  # distance at which the direct peak just reaches 255
    reflection_gain: float = 25.0
    horizontal_spread_ratio: float = 0.3


@dataclass(frozen=True)
class NoiseModel:
    centroid_jitter_px: float = 0.0
    dropout_prob: float = 0.0

    def __post_init__(self):
        if self.centroid_jitter_px < 0:
            raise ValueError("centroid jitter must be non-negative")
        if not 0 <= self.dropout_prob < 1:
            raise ValueError("dropout_prob must lie in [0, 1)")


@dataclass(frozen=True)
class SceneConfig:
    observer_height: float
    trajectory: Trajectory
    camera: CameraCalibration = field(default_factory=equidistant_calibration)
    surface: SurfaceModel = field(default_factory=SurfaceModel)
    emitter: EmitterModel = field(default_factory=EmitterModel)
    noise: NoiseModel = field(default_factory=NoiseModel)
    roll: float = 0.0
    pitch: float = 0.0
    exposure_ms: float = 20.0
    frame_rate: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if not self.observer_height > 0:
            raise ValueError("observer_height must be positive")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")

    @property
    def attitude(self) -> ObserverAttitude:
        return ObserverAttitude(self.roll, self.pitch, self.observer_height)

    def frame_times(self) -> np.ndarray:
        t0, t1 = self.trajectory.span
        n = int(np.floor((t1 - t0) * self.frame_rate + 1e-9)) + 1
        return t0 + np.arange(n) / self.frame_rate


@dataclass(frozen=True)
class FrameTruth:
    t: float
    transmitter_pos: np.ndarray
    direct_pixel: tuple[float, float] | None
    reflection_pixel: tuple[float, float] | None
    reflection_intensity: float
    extent_px: tuple[float, float]  # vertical, horizontal Gaussian std of the reflection blob


@dataclass
class Frame:
    t: float
    image: np.ndarray | None = None
    centroids: list[Centroid] | None = None
    extents: list[EllipseExtent | None] | None = None  # aligned with centroids


@dataclass(frozen=True)
class _Blob:
    u: float
    v: float
    std_v: float
    std_h: float
    peak: float


def _lambert(direction, exponent: float) -> float:
    d = np.asarray(direction, dtype=float)
    cos_el = np.hypot(d[0], d[1]) / np.linalg.norm(d)
    return float(cos_el ** exponent)


def _pixels_per_radian(b: np.ndarray, cal: CameraCalibration, att: ObserverAttitude) -> float:
    # local image scale for a small elevation rotation of a levelled bearing
    delta = 1e-4
    horiz = np.hypot(b[0], b[1])
    el = np.arctan2(b[2], horiz)
    az = np.arctan2(b[1], b[0])
    el2 = el + delta if el + delta < np.pi / 2 else el - delta
    b2 = np.array([np.cos(el2) * np.cos(az), np.cos(el2) * np.sin(az), np.sin(el2)])
    p1 = world2cam(level_to_camera(b, att), cal)
    p2 = world2cam(level_to_camera(b2, att), cal)
    return float(np.linalg.norm(p2 - p1) / delta)


def _project(b_level: np.ndarray, scene: SceneConfig) -> tuple[float, float] | None:
    b_cam = level_to_camera(b_level, scene.attitude)
    if not in_fov(b_cam, scene.camera):
        return None
    try:
        p = world2cam(b_cam, scene.camera)
    except CameraDomainError:
        return None
    if not scene.camera.in_image(p):
        return None
    return float(p[0]), float(p[1])


def _frame_rng(scene: SceneConfig, t: float, seed: int | None) -> np.random.Generator:
    seed = scene.seed if seed is None else seed
    return np.random.default_rng([int(seed) % 2**63, int(round(t * 1e6)) % 2**63])


def _scene_blobs(scene: SceneConfig, t: float):
    """Noise-free blobs (direct, reflection) and the frame's ground truth."""
    T = scene.trajectory.at(t)
    z_o = scene.observer_height
    em = scene.emitter
    exposure = scene.exposure_ms / 20.0
    psf = em.blob_radius_px

    direct = None
    d_pix = _project(T / np.linalg.norm(T), scene)
    if d_pix is not None:
        dist = np.linalg.norm(T)
        peak = 255.0 * exposure * _lambert(-T, em.lambert_exponent) * (em.saturation_range / dist) ** 2
        direct = _Blob(d_pix[0], d_pix[1], psf, psf, min(peak, 255.0))

    reflection = None
    r_pix = None
    intensity = 0.0
    extent = (psf, psf)
    if T[2] > -z_o:
        q, b_r = mirror_project(T, z_o)
        r_pix = _project(b_r, scene)
        if r_pix is not None:
            theta_i = float(np.arccos(z_o / np.linalg.norm(q)))
            refl = fresnel_reflectance(theta_i, scene.surface.n_i, scene.surface.n_t)
            slope = scene.surface.slope(q[0], t)
            spread_el = 2.0 * np.arctan(slope)
            spread_az = em.horizontal_spread_ratio * spread_el
            ppr = _pixels_per_radian(b_r, scene.camera, scene.attitude)
            std_v = float(np.hypot(psf, ppr * spread_el))
            std_h = float(np.hypot(psf, ppr * spread_az))
            path = np.linalg.norm(T - q) + np.linalg.norm(q)
            intensity = (exposure * _lambert(q - T, em.lambert_exponent)
                         * (em.saturation_range / path) ** 2 * refl * em.reflection_gain)
            peak = 255.0 * intensity * psf ** 2 / (std_v * std_h)
            extent = (std_v, std_h)
            reflection = _Blob(r_pix[0], r_pix[1], std_v, std_h, min(peak, 255.0))

    truth = FrameTruth(
        t=float(t),
        transmitter_pos=T,
        direct_pixel=d_pix,
        reflection_pixel=r_pix,
        reflection_intensity=float(intensity),
        extent_px=extent,
    )
    return direct, reflection, truth


def _draw(img: np.ndarray, blob: _Blob) -> None:
    h, w = img.shape
    reach_u = int(np.ceil(4 * blob.std_h)) + 1
    reach_v = int(np.ceil(4 * blob.std_v)) + 1
    u0, u1 = max(0, int(blob.u) - reach_u), min(w, int(blob.u) + reach_u + 1)
    v0, v1 = max(0, int(blob.v) - reach_v), min(h, int(blob.v) + reach_v + 1)
    if u0 >= u1 or v0 >= v1:
        return
    uu, vv = np.meshgrid(np.arange(u0, u1), np.arange(v0, v1))
    g = blob.peak * np.exp(-0.5 * (((uu - blob.u) / blob.std_h) ** 2 + ((vv - blob.v) / blob.std_v) ** 2))
    img[v0:v1, u0:u1] += g


def _level_set_radius(peak: float, std: float, threshold: float) -> float:
    if peak < threshold or threshold <= 0:
        return 0.0
    return std * np.sqrt(2.0 * np.log(peak / threshold))


def render_frame(
    scene: SceneConfig,
    t: float,
    mode: str = "image",
    seed: int | None = None,
    threshold: int = 40,
) -> tuple[Frame, FrameTruth]:
    """Render the frame at time ``t``.

    ``mode="image"`` returns an 8-bit image with Gaussian blobs.
    ``mode="centroids"`` returns detector-like centroids (class unknown) with
    jitter and dropouts applied, plus the ``threshold`` level-set extents of
    each blob.
    """
    if mode not in ("image", "centroids"):
        raise ValueError(f"unknown render mode {mode!r}")
    direct, reflection, truth = _scene_blobs(scene, t)
    blobs = [b for b in (direct, reflection) if b is not None]
    if mode == "image":
        w, h = scene.camera.resolution
        acc = np.zeros((h, w))
        for b in blobs:
            _draw(acc, b)
        img = np.clip(np.round(acc), 0, 255).astype(np.uint8)
        return Frame(t=float(t), image=img), truth

    rng = _frame_rng(scene, t, seed)
    jitter = scene.noise.centroid_jitter_px
    cal = scene.camera
    centroids, extents = [], []
    for b in blobs:
        # draw every random number up front so dropouts do not shift the stream
        dropped = rng.random() < scene.noise.dropout_prob
        noise = rng.normal(0.0, 1.0, size=4) * jitter
        if dropped or b.peak < threshold:
            continue
        u = float(np.clip(b.u + noise[0], 0, cal.width - 1))
        v = float(np.clip(b.v + noise[1], 0, cal.height - 1))
        dv = _level_set_radius(b.peak, b.std_v, threshold)
        dh = _level_set_radius(b.peak, b.std_h, threshold)
        p_v = (u, float(np.clip(v + dv + noise[2], 0, cal.height - 1)))
        p_h = (float(np.clip(u + dh + noise[3], 0, cal.width - 1)), v)
        area = max(1, int(round(np.pi * max(dv, 0.5) * max(dh, 0.5))))
        centroids.append(Centroid(u=u, v=v, area=area, peak=int(round(b.peak))))
        extents.append(EllipseExtent((u, v), p_v, p_h, threshold, (0, 0, cal.width - 1, cal.height - 1)))
    return Frame(t=float(t), centroids=centroids, extents=extents), truth


def _calibration_from(entry, base: Path) -> CameraCalibration:
    if entry is None or entry == "equidistant":
        return equidistant_calibration()
    if isinstance(entry, str):
        path = Path(entry) if Path(entry).is_absolute() else base / entry
        if not path.exists():
            raise FileNotFoundError(f"calibration file not found: {path}")
        return load_calibration(path)
    if isinstance(entry, dict) and "equidistant" in entry:
        return equidistant_calibration(**entry["equidistant"])
    raise ValueError(f"unrecognised camera specification: {entry!r}")


def scene_from_dict(d: dict, base_dir=".") -> SceneConfig:
    """Build a scene from parsed JSON; relative file paths resolve against ``base_dir``."""
    base = Path(base_dir)
    if "trajectory_csv" in d:
        path = Path(d["trajectory_csv"])
        path = path if path.is_absolute() else base / path
        if not path.exists():
            raise FileNotFoundError(f"trajectory file not found: {path}")
        traj = Trajectory.from_csv(path)
    elif "trajectory" in d:
        arr = np.asarray(d["trajectory"], dtype=float).reshape(-1, 4)
        traj = Trajectory(arr[:, 0], arr[:, 1:])
    else:
        raise ValueError("scene needs 'trajectory' or 'trajectory_csv'")
    return SceneConfig(
        observer_height=float(d["observer_height"]),
        trajectory=traj,
        camera=_calibration_from(d.get("camera"), base),
        surface=SurfaceModel(**d.get("surface", {})),
        emitter=EmitterModel(**d.get("emitter", {})),
        noise=NoiseModel(**d.get("noise", {})),
        roll=float(d.get("roll", 0.0)),
        pitch=float(d.get("pitch", 0.0)),
        exposure_ms=float(d.get("exposure_ms", 20.0)),
        frame_rate=float(d.get("frame_rate", 60.0)),
        seed=int(d.get("seed", 0)),
    )
