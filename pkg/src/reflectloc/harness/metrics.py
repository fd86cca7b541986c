"""Per-axis error statistics between an estimate series and ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .csvio import DataError


@dataclass(frozen=True)
class ErrorReport:
    mae: tuple[float, float, float]
    std: tuple[float, float, float]  # population std of the absolute errors
    sample_count: int
    availability: float

    def as_dict(self) -> dict:
        return {
            "mae": list(self.mae),
            "std": list(self.std),
            "sample_count": self.sample_count,
            "availability": self.availability,
        }

    def format(self) -> str:
        lines = [f"{'axis':<5}{'MAE [m]':>12}{'std [m]':>12}"]
        for axis, m, s in zip("xyz", self.mae, self.std):
            lines.append(f"{axis:<5}{m:>12.4f}{s:>12.4f}")
        lines.append(f"samples: {self.sample_count}  availability: {self.availability:.3f}")
        return "\n".join(lines)


def empty_report() -> ErrorReport:
    nan = float("nan")
    return ErrorReport((nan, nan, nan), (nan, nan, nan), 0, 0.0)


def frame_period(t: np.ndarray) -> float:
    if len(t) < 2:
        return np.inf
    return float(np.median(np.diff(t)))


def match_nearest(t_est: np.ndarray, t_ref: np.ndarray, max_gap: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (estimate, reference) of nearest timestamps within ``max_gap``."""
    t_est = np.asarray(t_est, dtype=float)
    t_ref = np.asarray(t_ref, dtype=float)
    if len(t_est) == 0 or len(t_ref) == 0:
        return np.array([], dtype=int), np.array([], dtype=int)
    idx = np.clip(np.searchsorted(t_ref, t_est), 1, max(1, len(t_ref) - 1))
    if len(t_ref) == 1:
        idx = np.zeros(len(t_est), dtype=int)
    else:
        left = t_ref[idx - 1]
        right = t_ref[idx]
        idx = np.where(np.abs(t_est - left) <= np.abs(right - t_est), idx - 1, idx)
    ok = np.abs(t_ref[idx] - t_est) <= max_gap + 1e-12
    return np.nonzero(ok)[0], idx[ok]


def report(estimates: np.ndarray, truth: np.ndarray) -> ErrorReport:
    """MAE and spread per axis over timestamps matched within one frame period.

    Both inputs are arrays whose first four columns are t, x, y, z.
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.atleast_2d(np.asarray(truth, dtype=float))
    if estimates.size == 0 or truth.size == 0:
        raise DataError("no overlapping timestamps between estimates and truth")
    period = frame_period(truth[:, 0])
    if not np.isfinite(period):
        period = frame_period(estimates[:, 0])
    if not np.isfinite(period):
        period = 0.0
    i_est, i_ref = match_nearest(estimates[:, 0], truth[:, 0], period)
    if len(i_est) == 0:
        raise DataError("no overlapping timestamps between estimates and truth")
    err = np.abs(estimates[i_est, 1:4] - truth[i_ref, 1:4])
    mae = err.mean(axis=0)
    std = err.std(axis=0)
    availability = min(1.0, len(np.unique(i_ref)) / len(truth))
    return ErrorReport(
        mae=tuple(float(x) for x in mae),
        std=tuple(float(x) for x in std),
        sample_count=int(len(i_est)),
        availability=float(availability),
    )
