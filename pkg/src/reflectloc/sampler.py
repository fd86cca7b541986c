"""Monte-Carlo intersection of the reflection cone with the direct cone."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cones import EllipticalCone

MEMBERSHIP_MODES = ("local", "world")


@dataclass(frozen=True)
class SamplerConfig:
    n: int = 1000
    seed: int = 0
    l_r_min: float | None = None  # None: take the feasibility bound from the cone
    workers: int = 1
    chunk_size: int = 4096
    membership: str = "local"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.chunk_size < 1 or self.workers < 1:
            raise ValueError("chunk_size and workers must be >= 1")
        if self.membership not in MEMBERSHIP_MODES:
            raise ValueError(f"membership must be one of {MEMBERSHIP_MODES}")


@dataclass
class InlierSet:
    points: np.ndarray
    total_sampled: int
    timestamp: float = 0.0
    samples: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    @property
    def centroid(self) -> np.ndarray:
        if self.empty:
            raise ValueError("empty inlier set has no centroid")
        return self.points.mean(axis=0)


def _chunk_generator(seed: int, stream: int, chunk: int) -> np.random.Generator:
    # Philox is counter based: chunk j starts at its own counter block, so the
    # draws of a chunk do not depend on which worker produced it or when.
    key = (int(seed) % 2**64) | ((int(stream) % 2**64) << 64)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, chunk, 0, 0]))


def _sample_chunk(c: EllipticalCone, l_min: float, seed: int, stream: int, chunk: int, m: int):
    u = _chunk_generator(seed, stream, chunk).random((m, 4))
    gamma = 2 * np.pi * u[:, 0]
    alpha = c.alpha_max * u[:, 1]
    upsilon = c.upsilon_max * u[:, 2]
    l = l_min + (c.length - l_min) * u[:, 3]
    return (c.apex
            + l[:, None] * c.axis
            + (l * np.tan(alpha) * np.cos(gamma))[:, None] * c.n_v
            + (l * np.tan(upsilon) * np.sin(gamma))[:, None] * c.n_h)


def sample_reflection_cone(c: EllipticalCone, cfg: SamplerConfig, stream: int = 0) -> np.ndarray:
    """Draw ``cfg.n`` points from the cone's parameter space.

    gamma ~ U(0, 2pi), alpha ~ U(0, alpha_max), upsilon ~ U(0, upsilon_max) and
    l ~ U(l_min, L).  Uniform in parameters, not in volume.  ``stream``
    separates independent draws under one seed (e.g. one per frame).
    """
    l_min = c.l_min if cfg.l_r_min is None else cfg.l_r_min
    if not 0 <= l_min <= c.length:
        raise ValueError(f"l_r_min={l_min} outside [0, {c.length}]")
    sizes = [min(cfg.chunk_size, cfg.n - start) for start in range(0, cfg.n, cfg.chunk_size)]
    jobs = [(c, l_min, cfg.seed, stream, j, m) for j, m in enumerate(sizes)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda a: _sample_chunk(*a), jobs))
    else:
        parts = [_sample_chunk(*a) for a in jobs]
    return np.concatenate(parts, axis=0)


def contains(c: EllipticalCone, p, mode: str = "local") -> np.ndarray:
    """Membership of point(s) ``p`` in the finite elliptical cone.

    ``mode="local"`` decomposes the off-axis residual along the cone's own
    spread directions.  ``mode="world"`` uses the residual's world y and z
    components against the horizontal and vertical half-angles, which is only
    accurate for axes close to the x-axis.
    """
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 1
    p = np.atleast_2d(p)
    L = c.length
    tol = 1e-9 * max(1.0, L)
    rel = p - c.apex
    proj = rel @ c.axis
    resid = rel - proj[:, None] * c.axis
    if mode == "local":
        r_v = resid @ c.n_v
        r_h = resid @ c.n_h
    elif mode == "world":
        r_v = resid[:, 2]
        r_h = resid[:, 1]
    else:
        raise ValueError(f"unknown membership mode {mode!r}")
    inside = (proj >= -tol) & (proj <= L + tol)
    semi_v = np.clip(proj, 0.0, None) * np.tan(c.alpha_max)
    semi_h = np.clip(proj, 0.0, None) * np.tan(c.upsilon_max)
    # zero-width directions accept only (numerically) zero residuals
    inside &= (semi_v > tol) | (np.abs(r_v) <= tol)
    inside &= (semi_h > tol) | (np.abs(r_h) <= tol)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        term_v = np.where(semi_v > tol, (r_v / semi_v) ** 2, 0.0)
        term_h = np.where(semi_h > tol, (r_h / semi_h) ** 2, 0.0)
    inside &= term_v + term_h <= 1.0 + 1e-9
    return bool(inside[0]) if scalar else inside


def intersect(
    reflection: EllipticalCone,
    direct: EllipticalCone,
    cfg: SamplerConfig,
    stream: int = 0,
    timestamp: float = 0.0,
    keep_samples: bool = False,
) -> InlierSet:
    """Sample the reflection cone and keep the points inside the direct cone.

    Points below the surface plane of the reflection cone are discarded.  An
    empty result is returned as-is; it signals inconsistent geometry.
    """
    xs = sample_reflection_cone(reflection, cfg, stream=stream)
    keep = contains(direct, xs, mode=cfg.membership)
    if reflection.floor_z is not None:
        keep &= xs[:, 2] >= reflection.floor_z
    return InlierSet(
        points=xs[keep],
        total_sampled=len(xs),
        timestamp=timestamp,
        samples=xs if keep_samples else None,
    )
