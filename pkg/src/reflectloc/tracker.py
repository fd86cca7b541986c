"""Constant-velocity particle filter with a Cauchy observation kernel."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .sampler import InlierSet

log = logging.getLogger(__name__)

OBSERVATION_MODES = ("centroid", "points")


class TrackerError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    particle_count: int = 500
    process_noise_pos: float = 0.5  # m / sqrt(s)
    process_noise_vel: float = 1.0  # (m/s) / sqrt(s)
    cauchy_scale: float = 1.0  # m
    resample_ess_fraction: float = 0.5
    max_speed: float = 10.0  # m/s
    observation_mode: str = "centroid"
    seed: int = 0

    def __post_init__(self):
        if self.particle_count < 1:
            raise ValueError("particle_count must be >= 1")
        if self.process_noise_pos < 0 or self.process_noise_vel < 0:
            raise ValueError("process noise must be non-negative")
        if not self.cauchy_scale > 0 or not self.max_speed > 0:
            raise ValueError("cauchy_scale and max_speed must be positive")
        if not 0 < self.resample_ess_fraction <= 1:
            raise ValueError("resample_ess_fraction must lie in (0, 1]")
        if self.observation_mode not in OBSERVATION_MODES:
            raise ValueError(f"observation_mode must be one of {OBSERVATION_MODES}")


@dataclass
class TrackState:
    particles: np.ndarray  # (N, 6): x, y, z, vx, vy, vz
    weights: np.ndarray
    estimate: np.ndarray
    spread: np.ndarray
    last_update: float
    rng: np.random.Generator = field(repr=False)

    @property
    def positions(self) -> np.ndarray:
        return self.particles[:, :3]

    @property
    def velocities(self) -> np.ndarray:
        return self.particles[:, 3:]

    def snapshot(self) -> "TrackState":
        return replace(self, particles=self.particles.copy(), weights=self.weights.copy(),
                       estimate=self.estimate.copy(), spread=self.spread.copy())


def weighted_summary(positions: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = weights @ positions
    var = weights @ (positions - mean) ** 2
    return mean, np.sqrt(np.clip(var, 0.0, None))


def effective_sample_size(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(weights ** 2))


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn by systematic resampling; weights need not be normalised."""
    w = np.asarray(weights, dtype=float)
    n = len(w)
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    positions = (rng.random() + np.arange(n)) / n
    return np.searchsorted(cdf, positions, side="right")


def _clamp_speed(vel: np.ndarray, max_speed: float) -> np.ndarray:
    speed = np.linalg.norm(vel, axis=1, keepdims=True)
    scale = np.where(speed > max_speed, max_speed / np.where(speed > 0, speed, 1.0), 1.0)
    return vel * scale


def init(obs: InlierSet, cfg: TrackerConfig, rng: np.random.Generator | None = None) -> TrackState:
    """Spawn particles on the observation points with positional jitter."""
    if obs.empty:
        raise TrackerError("cannot initialize from an empty observation")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    n = cfg.particle_count
    idx = rng.integers(0, len(obs.points), size=n)
    pos = obs.points[idx] + rng.normal(0.0, cfg.process_noise_pos, size=(n, 3))
    particles = np.hstack([pos, np.zeros((n, 3))])
    weights = np.full(n, 1.0 / n)
    est, spread = weighted_summary(pos, weights)
    return TrackState(particles, weights, est, spread, obs.timestamp, rng)


def predict(s: TrackState, dt: float, cfg: TrackerConfig) -> TrackState:
    if dt < 0:
        raise ValueError(f"negative time step {dt}")
    n = len(s.particles)
    pos = s.positions.copy()
    vel = s.velocities.copy()
    sq = np.sqrt(dt)
    pos += vel * dt
    if cfg.process_noise_pos > 0 and dt > 0:
        pos += s.rng.normal(0.0, cfg.process_noise_pos * sq, size=(n, 3))
    if cfg.process_noise_vel > 0 and dt > 0:
        vel += s.rng.normal(0.0, cfg.process_noise_vel * sq, size=(n, 3))
    vel = _clamp_speed(vel, cfg.max_speed)
    particles = np.hstack([pos, vel])
    est, spread = weighted_summary(pos, s.weights)
    return TrackState(particles, s.weights.copy(), est, spread, s.last_update + dt, s.rng)


def log_likelihood(positions: np.ndarray, obs: InlierSet, cfg: TrackerConfig) -> np.ndarray:
    """Cauchy log-kernel -log(1 + (d/c)^2) per particle."""
    c2 = cfg.cauchy_scale ** 2
    if cfg.observation_mode == "centroid":
        d2 = np.sum((positions - obs.centroid) ** 2, axis=1)
        return -np.log1p(d2 / c2)
    d2 = np.sum((positions[:, None, :] - obs.points[None, :, :]) ** 2, axis=2)
    return -np.log1p(d2 / c2).sum(axis=1)


def update(s: TrackState, obs: InlierSet, cfg: TrackerConfig) -> TrackState:
    """Reweight particles against ``obs``; an empty observation leaves the state as is."""
    if obs.empty:
        return s.snapshot()
    with np.errstate(divide="ignore"):
        logw = np.log(s.weights) + log_likelihood(s.positions, obs, cfg)
    if not np.any(np.isfinite(logw)):
        log.warning("all particle weights underflowed at t=%.3f; reinitialising", obs.timestamp)
        return init(obs, cfg, rng=s.rng)
    logw -= np.max(logw)
    w = np.exp(logw)
    w /= w.sum()
    particles = s.particles.copy()
    if effective_sample_size(w) < cfg.resample_ess_fraction * len(w):
        idx = systematic_resample(w, s.rng)
        particles = particles[idx]
        w = np.full(len(w), 1.0 / len(w))
    est, spread = weighted_summary(particles[:, :3], w)
    return TrackState(particles, w, est, spread, obs.timestamp, s.rng)
