"""Omnidirectional camera model and observer attitude compensation.

Bearings are expressed in the observer body frame: x forward along the
optical axis, y to the left, z up.  Pixel coordinates are (u, v) with u to the
right and v downward.

The lens is described by two radial polynomials (ascending powers):

* ``unprojection_coeffs`` map the undistorted pixel radius to the incidence
  angle measured from the optical axis,
* ``projection_coeffs`` map the incidence angle back to the pixel radius.

A 2x2 affine matrix accounts for sensor stretch and skew, as in the usual
omnidirectional calibration toolboxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

CALIBRATION_HEADER = "# reflectloc-calibration v1"
ROUND_TRIP_TOLERANCE_PX = 0.5


class CameraDomainError(ValueError):
    """Pixel or bearing outside the image or the calibrated field of view."""


@dataclass(frozen=True)
class CameraCalibration:
    unprojection_coeffs: tuple[float, ...]
    projection_coeffs: tuple[float, ...]
    center: tuple[float, float]
    affine: tuple[tuple[float, float], tuple[float, float]]
    resolution: tuple[int, int]
    max_incidence: float  # half field of view, radians

    def __post_init__(self):
        w, h = self.resolution
        if w <= 0 or h <= 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        u0, v0 = self.center
        if not (0 <= u0 < w and 0 <= v0 < h):
            raise ValueError(f"center {self.center} outside resolution {self.resolution}")
        if not 0 < self.max_incidence < np.pi:
            raise ValueError("max_incidence must lie in (0, pi)")
        if abs(np.linalg.det(np.asarray(self.affine, dtype=float))) < 1e-12:
            raise ValueError("affine matrix is singular")

    @property
    def width(self) -> int:
        return self.resolution[0]

    @property
    def height(self) -> int:
        return self.resolution[1]

    @property
    def radius_limit(self) -> float:
        """Undistorted pixel radius of the field-of-view boundary."""
        return float(_polyval(self.projection_coeffs, self.max_incidence))

    def in_image(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return (
            (p[..., 0] >= 0) & (p[..., 0] <= self.width - 1)
            & (p[..., 1] >= 0) & (p[..., 1] <= self.height - 1)
        )

    def round_trip_error(self, grid_step: int = 8) -> float:
        """Largest pixel error of world2cam(cam2world(p)) over an in-FOV grid."""
        us = np.arange(0, self.width, grid_step, dtype=float)
        vs = np.arange(0, self.height, grid_step, dtype=float)
        uu, vv = np.meshgrid(us, vs)
        pix = np.stack([uu.ravel(), vv.ravel()], axis=-1)
        rho = np.linalg.norm(_to_plane(pix, self), axis=-1)
        pix = pix[rho <= self.radius_limit]
        if len(pix) == 0:
            return 0.0
        back = world2cam(cam2world(pix, self), self)
        return float(np.max(np.linalg.norm(back - pix, axis=-1)))


@dataclass(frozen=True)
class ObserverAttitude:
    roll: float = 0.0
    pitch: float = 0.0
    height: float = 1.0  # above the reflective surface, meters

    def __post_init__(self):
        if not abs(self.roll) < np.pi / 2:
            raise ValueError(f"|roll| must be < pi/2, got {self.roll}")
        if not abs(self.pitch) < np.pi / 2:
            raise ValueError(f"|pitch| must be < pi/2, got {self.pitch}")
        if not self.height > 0:
            raise ValueError(f"observer height must be positive, got {self.height}")


def _polyval(coeffs, x):
    # ascending powers
    return np.polynomial.polynomial.polyval(x, np.asarray(coeffs, dtype=float))


def _to_plane(p, cal: CameraCalibration) -> np.ndarray:
    a_inv = np.linalg.inv(np.asarray(cal.affine, dtype=float))
    d = np.asarray(p, dtype=float) - np.asarray(cal.center, dtype=float)
    return d @ a_inv.T


def cam2world(p, cal: CameraCalibration) -> np.ndarray:
    """Unit bearing vector(s) for pixel coordinates of shape (2,) or (N, 2)."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError("pixel coordinates must have a trailing dimension of 2")
    if not np.all(cal.in_image(p)):
        raise CameraDomainError(f"pixel outside image bounds {cal.resolution}")
    plane = _to_plane(p, cal)
    rho = np.linalg.norm(plane, axis=-1)
    if np.any(rho > cal.radius_limit + 1e-9):
        raise CameraDomainError("pixel outside the calibrated field of view")
    theta = _polyval(cal.unprojection_coeffs, rho)
    safe = np.where(rho > 0, rho, 1.0)
    cu = np.where(rho > 0, plane[..., 0] / safe, 0.0)
    cv = np.where(rho > 0, plane[..., 1] / safe, 0.0)
    s = np.sin(theta)
    b = np.stack([np.cos(theta), -s * cu, -s * cv], axis=-1)
    return b / np.linalg.norm(b, axis=-1, keepdims=True)


def world2cam(b, cal: CameraCalibration) -> np.ndarray:
    """Pixel coordinates for bearing(s) of shape (3,) or (N, 3)."""
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(b[..., 0], -1.0, 1.0))
    if np.any(theta > cal.max_incidence + 1e-12):
        raise CameraDomainError("bearing outside the calibrated field of view")
    rho = _polyval(cal.projection_coeffs, theta)
    lateral = np.hypot(b[..., 1], b[..., 2])
    safe = np.where(lateral > 0, lateral, 1.0)
    cu = np.where(lateral > 0, -b[..., 1] / safe, 0.0)
    cv = np.where(lateral > 0, -b[..., 2] / safe, 0.0)
    plane = np.stack([rho * cu, rho * cv], axis=-1)
    return plane @ np.asarray(cal.affine, dtype=float).T + np.asarray(cal.center, dtype=float)


def in_fov(b, cal: CameraCalibration) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    b = b / np.linalg.norm(b, axis=-1, keepdims=True)
    return np.arccos(np.clip(b[..., 0], -1.0, 1.0)) <= cal.max_incidence


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def attitude_matrix(att: ObserverAttitude) -> np.ndarray:
    """Camera-to-level rotation R_x(-roll) @ R_y(-pitch).

    With this convention a positive pitch tilts the optical axis upward and a
    positive roll tilts the camera's left axis downward.
    """
    return rot_x(-att.roll) @ rot_y(-att.pitch)


def compensate_attitude(b, att: ObserverAttitude) -> np.ndarray:
    """Rotate camera-frame bearing(s) into the gravity-levelled body frame."""
    if att.roll == 0.0 and att.pitch == 0.0:
        return np.array(b, dtype=float)
    return np.asarray(b, dtype=float) @ attitude_matrix(att).T


def level_to_camera(b, att: ObserverAttitude) -> np.ndarray:
    """Inverse of :func:`compensate_attitude`."""
    if att.roll == 0.0 and att.pitch == 0.0:
        return np.array(b, dtype=float)
    return np.asarray(b, dtype=float) @ attitude_matrix(att)


def equidistant_calibration(
    focal_px: float = 150.0,
    resolution: tuple[int, int] = (752, 480),
    max_incidence_deg: float = 95.0,
) -> CameraCalibration:
    """Ideal equidistant fisheye (radius = focal * incidence) with identity affine.

    The default resolution matches the 752x480 sensor used for the field trials.
    """
    w, h = resolution
    return CameraCalibration(
        unprojection_coeffs=(0.0, 1.0 / focal_px),
        projection_coeffs=(0.0, float(focal_px)),
        center=((w - 1) / 2.0, (h - 1) / 2.0),
        affine=((1.0, 0.0), (0.0, 1.0)),
        resolution=(w, h),
        max_incidence=float(np.deg2rad(max_incidence_deg)),
    )


def polynomial_calibration(
    projection_coeffs,
    resolution: tuple[int, int] = (752, 480),
    max_incidence_deg: float = 95.0,
    affine=((1.0, 0.0), (0.0, 1.0)),
    center=None,
    degree: int = 7,
) -> CameraCalibration:
    """Build a calibration from a projection polynomial, fitting its inverse."""
    max_inc = float(np.deg2rad(max_incidence_deg))
    theta = np.linspace(0.0, max_inc, 400)
    rho = _polyval(projection_coeffs, theta)
    if np.any(np.diff(rho) <= 0):
        raise ValueError("projection polynomial must be increasing over the field of view")
    unproj = np.polynomial.polynomial.polyfit(rho, theta, degree)
    w, h = resolution
    if center is None:
        center = ((w - 1) / 2.0, (h - 1) / 2.0)
    return CameraCalibration(
        unprojection_coeffs=tuple(float(c) for c in unproj),
        projection_coeffs=tuple(float(c) for c in projection_coeffs),
        center=tuple(float(c) for c in center),
        affine=tuple(tuple(float(x) for x in row) for row in affine),
        resolution=(int(w), int(h)),
        max_incidence=max_inc,
    )


def dump_calibration(cal: CameraCalibration) -> str:
    def fmt(values):
        return " ".join(repr(float(v)) for v in values)

    lines = [
        CALIBRATION_HEADER,
        f"unprojection_coeffs: {fmt(cal.unprojection_coeffs)}",
        f"projection_coeffs: {fmt(cal.projection_coeffs)}",
        f"center: {fmt(cal.center)}",
        f"affine: {fmt([*cal.affine[0], *cal.affine[1]])}",
        f"resolution: {cal.resolution[0]} {cal.resolution[1]}",
        f"max_incidence_deg: {repr(float(np.rad2deg(cal.max_incidence)))}",
    ]
    return "\n".join(lines) + "\n"


def save_calibration(cal: CameraCalibration, path) -> None:
    Path(path).write_text(dump_calibration(cal))


def parse_calibration(text: str) -> CameraCalibration:
    lines = [ln.strip() for ln in text.splitlines()]
    if not lines or lines[0] != CALIBRATION_HEADER:
        raise ValueError(f"missing calibration header {CALIBRATION_HEADER!r}")
    fields: dict[str, list[str]] = {}
    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        key, sep, value = ln.partition(":")
        if not sep:
            raise ValueError(f"malformed calibration line: {ln!r}")
        fields[key.strip()] = value.split()
    required = ("unprojection_coeffs", "projection_coeffs", "center", "affine",
                "resolution", "max_incidence_deg")
    missing = [k for k in required if k not in fields]
    if missing:
        raise ValueError(f"calibration missing keys: {', '.join(missing)}")
    aff = [float(x) for x in fields["affine"]]
    if len(aff) != 4 or len(fields["center"]) != 2 or len(fields["resolution"]) != 2:
        raise ValueError("calibration center/affine/resolution have wrong arity")
    cal = CameraCalibration(
        unprojection_coeffs=tuple(float(x) for x in fields["unprojection_coeffs"]),
        projection_coeffs=tuple(float(x) for x in fields["projection_coeffs"]),
        center=(float(fields["center"][0]), float(fields["center"][1])),
        affine=((aff[0], aff[1]), (aff[2], aff[3])),
        resolution=(int(fields["resolution"][0]), int(fields["resolution"][1])),
        max_incidence=float(np.deg2rad(float(fields["max_incidence_deg"][0]))),
    )
    try:
        err = cal.round_trip_error()
    except CameraDomainError as exc:
        raise ValueError(f"calibration round-trip self-test failed: {exc}") from None
    if err > ROUND_TRIP_TOLERANCE_PX:
        raise ValueError(
            f"calibration round-trip self-test failed: {err:.3f} px > {ROUND_TRIP_TOLERANCE_PX} px"
        )
    return cal


def load_calibration(path) -> CameraCalibration:
    return parse_calibration(Path(path).read_text())
