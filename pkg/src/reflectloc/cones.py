"""Finite elliptical cones spanned by the reflection and the direct bearing.

All coordinates are metres in the levelled observer frame (origin at the
camera, z up).  The reflective surface is the plane ``z = -z_o``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAZING_EPS = 1e-3
_RANGE_TOL = 1e-12


class ConeGeometryError(ValueError):
    """A bearing cannot produce a valid cone (no surface hit, grazing, behind camera)."""


@dataclass(frozen=True)
class SurfaceGeometry:
    z_o: float  # observer height above the surface
    z_m: float  # maximum transmitter height, measured from the observer origin
    x_m: float  # maximum forward extent of the direct cone

    def __post_init__(self):
        for name in ("z_o", "z_m", "x_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True, eq=False)
class EllipticalCone:
    """Cone ``apex + l*d + l*n_v*tan(a)*cos(g) + l*n_h*tan(u)*sin(g)``.

    ``n_v`` is the spread direction lying in the vertical plane through the
    axis and ``n_h = axis x n_v`` the horizontal one.  ``floor_z`` is set for
    reflection cones and marks the surface plane.
    """

    apex: np.ndarray
    endpoint: np.ndarray
    axis: np.ndarray
    n_v: np.ndarray
    n_h: np.ndarray
    alpha_max: float
    upsilon_max: float
    floor_z: float | None = None
    l_min: float = 0.0
    degenerate: bool = field(default=False)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.endpoint - self.apex))

    def frame(self) -> np.ndarray:
        """Rows: axis, vertical spread, horizontal spread."""
        return np.stack([self.axis, self.n_v, self.n_h])


@dataclass(frozen=True, eq=False)
class ReflectionGeometry:
    r: np.ndarray
    r_v: np.ndarray
    r_h: np.ndarray
    beta_r: float
    beta_v: float
    theta_r: float  # azimuth of the reflection, kept for diagnostics


def spread_frame(axis) -> tuple[np.ndarray, np.ndarray]:
    """Vertical and horizontal unit spread directions perpendicular to ``axis``."""
    d = np.asarray(axis, dtype=float)
    up = np.array([0.0, 0.0, 1.0])
    n_v = up - np.dot(up, d) * d
    norm = np.linalg.norm(n_v)
    if norm < 1e-9:
        # vertical axis: no vertical plane is singled out, fall back to x
        fwd = np.array([1.0, 0.0, 0.0])
        n_v = fwd - np.dot(fwd, d) * d
        norm = np.linalg.norm(n_v)
    n_v = n_v / norm
    n_h = np.cross(d, n_v)
    return n_v, n_h / np.linalg.norm(n_h)


def elevation_below_horizon(b) -> float:
    """Depression angle arctan(|z| / x) of a bearing."""
    b = np.asarray(b, dtype=float)
    return float(np.arctan2(abs(b[2]), b[0]))


def reflection_point(b_r, z_o: float, eps_z: float = GRAZING_EPS) -> np.ndarray:
    """Intersect the levelled bearing ``b_r`` with the surface plane ``z = -z_o``."""
    b = np.asarray(b_r, dtype=float)
    if not z_o > 0:
        raise ValueError("observer height must be positive")
    if b[2] >= 0:
        raise ConeGeometryError("no surface intersection: bearing at or above the horizon")
    if abs(b[2]) < eps_z:
        raise ConeGeometryError("grazing bearing: surface intersection is unbounded")
    if b[0] <= 0:
        raise ConeGeometryError("behind-camera bearing")
    k = abs(z_o) / abs(b[2])
    return np.array([k * b[0], k * b[1], -z_o])


def reflection_geometry(b_r, b_v, b_h, z_o: float) -> ReflectionGeometry:
    """Surface points of the reflection centre and its two extremal pixels."""
    b_r = np.asarray(b_r, dtype=float)
    r = reflection_point(b_r, z_o)
    r_v = reflection_point(b_v, z_o)
    r_h = reflection_point(b_h, z_o)
    return ReflectionGeometry(
        r=r,
        r_v=r_v,
        r_h=r_h,
        beta_r=elevation_below_horizon(b_r),
        beta_v=elevation_below_horizon(b_v),
        theta_r=float(np.arctan2(b_r[1], b_r[0])),
    )


def build_reflection_cone(
    geom: ReflectionGeometry,
    surf: SurfaceGeometry,
    alpha_cap: float | None = None,
) -> EllipticalCone:
    """Cone with apex at the observer's mirror image, through the reflection centre.

    The vertical half-angle is ``|beta_v - beta_r|`` (optionally capped), the
    horizontal one is the angle subtended by ``r_h`` seen from the apex in the
    x-y plane.  The end point lies on the apex-reflection line at height
    ``z_m``.
    """
    z_o = surf.z_o
    r = geom.r
    apex = np.array([0.0, 0.0, -2.0 * z_o])
    alpha = abs(geom.beta_v - geom.beta_r)
    if alpha_cap is not None:
        alpha = min(alpha, alpha_cap)
    upsilon = float(np.arctan2(np.linalg.norm((geom.r_h - r)[:2]), np.linalg.norm((r - apex)[:2])))
    if surf.z_m <= -z_o:
        raise ValueError("z_m must lie above the surface")
    # r - apex = (r_x, r_y, z_o); scale so the end point reaches z = z_m
    endpoint = apex + (r - apex) * (surf.z_m + 2.0 * z_o) / z_o
    axis = (endpoint - apex) / np.linalg.norm(endpoint - apex)
    n_v, n_h = spread_frame(axis)
    return EllipticalCone(
        apex=apex,
        endpoint=endpoint,
        axis=axis,
        n_v=n_v,
        n_h=n_h,
        alpha_max=float(alpha),
        upsilon_max=upsilon,
        floor_z=-z_o,
        l_min=float(np.linalg.norm(apex - r)),
        degenerate=(alpha == 0.0 and upsilon == 0.0),
    )


def build_direct_cone(b_d, alpha_max: float, upsilon_max: float, x_m: float) -> EllipticalCone:
    """Cone around the direct bearing, apex at the camera, truncated at ``x = x_m``."""
    b = np.asarray(b_d, dtype=float)
    b = b / np.linalg.norm(b)
    if b[0] <= 0:
        raise ConeGeometryError("behind-camera bearing")
    if not (0 <= alpha_max < np.pi / 2 and 0 <= upsilon_max < np.pi / 2):
        raise ValueError("half-apex angles must lie in [0, pi/2)")
    if not x_m > 0:
        raise ValueError("x_m must be positive")
    endpoint = np.array([x_m, x_m * b[1] / b[0], x_m * b[2] / b[0]])
    n_v, n_h = spread_frame(b)
    return EllipticalCone(
        apex=np.zeros(3),
        endpoint=endpoint,
        axis=b,
        n_v=n_v,
        n_h=n_h,
        alpha_max=float(alpha_max),
        upsilon_max=float(upsilon_max),
        degenerate=(alpha_max == 0.0 and upsilon_max == 0.0),
    )


def _check_range(name, values, lo, hi):
    values = np.asarray(values, dtype=float)
    if np.any(values < lo - _RANGE_TOL) or np.any(values > hi + _RANGE_TOL):
        raise ValueError(f"{name} outside [{lo}, {hi}]")


def cone_point(c: EllipticalCone, gamma, l, alpha, upsilon) -> np.ndarray:
    """Evaluate the cone parametrisation; scalar or array arguments broadcast."""
    _check_range("gamma", gamma, 0.0, 2 * np.pi)
    _check_range("l", l, 0.0, c.length)
    _check_range("alpha", alpha, 0.0, c.alpha_max)
    _check_range("upsilon", upsilon, 0.0, c.upsilon_max)
    gamma, l, alpha, upsilon = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (gamma, l, alpha, upsilon))
    )
    lv = (l * np.tan(alpha) * np.cos(gamma))[..., None]
    lh = (l * np.tan(upsilon) * np.sin(gamma))[..., None]
    return c.apex + l[..., None] * c.axis + lv * c.n_v + lh * c.n_h


def wireframe_segments(c: EllipticalCone, n_rays: int = 16) -> np.ndarray:
    """Line segments (x0, y0, z0, x1, y1, z1) outlining the cone."""
    gammas = np.linspace(0.0, 2 * np.pi, n_rays, endpoint=False)
    L = c.length
    rim = (c.apex + L * c.axis
           + L * np.tan(c.alpha_max) * np.cos(gammas)[:, None] * c.n_v
           + L * np.tan(c.upsilon_max) * np.sin(gammas)[:, None] * c.n_h)
    rays = np.hstack([np.broadcast_to(c.apex, rim.shape), rim])
    ring = np.hstack([rim, np.roll(rim, -1, axis=0)])
    axis = np.concatenate([c.apex, c.endpoint])[None, :]
    return np.vstack([axis, rays, ring])
