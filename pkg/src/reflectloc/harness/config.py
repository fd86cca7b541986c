"""Run configuration and the named parameter profiles of the field trials."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from ..sampler import MEMBERSHIP_MODES
from ..tracker import TrackerConfig


class ConfigError(ValueError):
    """Invalid or missing configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class PipelineParameters:
    n: int = 1000
    alpha_r_max: float = 3.0  # degrees, cap on the reflection cone's vertical half-angle
    alpha_d_max: float = 4.0  # degrees
    upsilon_d_max: float = 4.0  # degrees
    x_m: float = 15.0  # m
    z_m: float = 2.5  # m
    sigma: int = 60  # binarisation / extent threshold, 0-255
    exposure_ms: float = 20.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        for name in ("alpha_r_max", "alpha_d_max", "upsilon_d_max"):
            if not 0 <= getattr(self, name) < 90:
                raise ConfigError(f"{name} must lie in [0, 90) degrees")
        if self.x_m <= 0 or self.z_m <= 0 or self.exposure_ms <= 0:
            raise ConfigError("x_m, z_m and exposure_ms must be positive")
        if not 0 <= self.sigma <= 255:
            raise ConfigError("sigma must lie in [0, 255]")

    @property
    def alpha_r_max_rad(self) -> float:
        return float(np.deg2rad(self.alpha_r_max))

    @property
    def alpha_d_max_rad(self) -> float:
        return float(np.deg2rad(self.alpha_d_max))

    @property
    def upsilon_d_max_rad(self) -> float:
        return float(np.deg2rad(self.upsilon_d_max))


def _profile(n, a_r, a_d, u_d, x_m, z_m, sigma, exposure):
    return PipelineParameters(n, a_r, a_d, u_d, x_m, z_m, sigma, exposure)


PROFILES: dict[str, PipelineParameters] = {
    "indoor_1": _profile(1000, 3, 4, 4, 15, 2.5, 60, 20),
    "indoor_2": _profile(1000, 3, 4, 4, 15, 2.5, 60, 20),
    "indoor_3": _profile(1000, 3, 4, 4, 10, 2.5, 40, 20),
    "indoor_4": _profile(1000, 3, 4, 4, 10, 2.5, 40, 20),
    "outdoor_1": _profile(1000, 4, 3, 3, 40, 10, 40, 3),
    "outdoor_2": _profile(1000, 4, 3, 3, 30, 10, 40, 2),
    "outdoor_3": _profile(1000, 4, 3, 3, 40, 10, 40, 2.5),
}
PROFILE_NAMES = (*PROFILES, "custom")


@dataclass(frozen=True)
class RunConfig:
    profile: str = "indoor_1"
    parameters: PipelineParameters = field(default_factory=lambda: PROFILES["indoor_1"])
    seed: int = 0
    output_dir: str | None = None
    render_mode: str = "centroids"
    membership: str = "local"
    sampler_workers: int = 1
    azimuth_tol_deg: float = 2.0
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    scene: str | None = None  # path of the scene file, when loaded from disk

    def __post_init__(self):
        if self.profile not in PROFILE_NAMES:
            raise ConfigError(f"unknown profile {self.profile!r}; choose from {', '.join(PROFILE_NAMES)}")
        if self.render_mode not in ("centroids", "image"):
            raise ConfigError("render_mode must be 'centroids' or 'image'")
        if self.membership not in MEMBERSHIP_MODES:
            raise ConfigError(f"membership must be one of {MEMBERSHIP_MODES}")


def resolve_parameters(profile: str, overrides: dict | None = None) -> PipelineParameters:
    overrides = dict(overrides or {})
    known = {f.name for f in fields(PipelineParameters)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigError(f"unknown parameters: {', '.join(sorted(unknown))}")
    if profile == "custom":
        missing = known - set(overrides)
        if missing:
            raise ConfigError(f"custom profile must set every parameter; missing {', '.join(sorted(missing))}")
        return PipelineParameters(**overrides)
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {', '.join(PROFILE_NAMES)}")
    return replace(PROFILES[profile], **overrides)


def make_run_config(profile: str = "indoor_1", parameters: dict | None = None, **kwargs) -> RunConfig:
    tracker = kwargs.pop("tracker", None)
    if isinstance(tracker, dict):
        tracker = TrackerConfig(**tracker)
    params = resolve_parameters(profile, parameters)
    try:
        return RunConfig(profile=profile, parameters=params, tracker=tracker or TrackerConfig(), **kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_run_config(path, **overrides) -> RunConfig:
    """Read a JSON run configuration; keyword overrides win over file values."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    d.update({k: v for k, v in overrides.items() if v is not None})
    if "scene" in d and d["scene"] is not None:
        scene = Path(d["scene"])
        d["scene"] = str(scene if scene.is_absolute() else path.parent / scene)
    profile = d.pop("profile", "indoor_1")
    parameters = d.pop("parameters", None)
    return make_run_config(profile, parameters, **d)
