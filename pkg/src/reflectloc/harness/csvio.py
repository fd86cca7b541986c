"""CSV formats exchanged by the harness.

Every file starts with a ``# reflectloc <kind> v1`` tag line followed by a
header row.  Floats are written with ``repr`` so values survive a
write/read cycle bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..detection import CLASSES, Centroid, EllipseExtent

FORMAT_VERSION = "v1"

CENTROID_COLUMNS = ["frame", "u", "v", "area", "peak", "class", "pair", "pv_u", "pv_v", "ph_u", "ph_v"]
ATTITUDE_COLUMNS = ["frame", "t", "roll", "pitch", "height"]
ESTIMATE_COLUMNS = ["t", "x", "y", "z", "spread_x", "spread_y", "spread_z", "n_inliers"]
TRUTH_COLUMNS = ["t", "x", "y", "z"]
OBSERVATION_COLUMNS = ["t", "x", "y", "z", "n_inliers"]
POINT_COLUMNS = ["frame", "set", "x", "y", "z"]
WIREFRAME_COLUMNS = ["frame", "cone", "x0", "y0", "z0", "x1", "y1", "z1"]


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 3)."""


def _tag(kind: str) -> str:
    return f"# reflectloc {kind} {FORMAT_VERSION}"


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_rows(path, kind: str, columns: list[str], rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(_tag(kind) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_rows(path, kind: str, columns: list[str]) -> list[tuple[int, dict[str, str]]]:
    """Rows as (line number, column dict); validates tag and header."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    lineno = 0
    if lines and lines[0].startswith("#"):
        if lines[0].strip() != _tag(kind):
            raise DataError(f"{path}:1: expected tag {_tag(kind)!r}, got {lines[0]!r}")
        lineno = 1
    if lineno >= len(lines):
        raise DataError(f"{path}: missing header row")
    header = next(csv.reader([lines[lineno]]))
    if [h.strip() for h in header] != columns:
        raise DataError(f"{path}:{lineno + 1}: expected columns {','.join(columns)}")
    out = []
    for i, row in enumerate(csv.reader(lines[lineno + 1:]), start=lineno + 2):
        if not row:
            continue
        if len(row) != len(columns):
            raise DataError(f"{path}:{i}: expected {len(columns)} fields, got {len(row)}")
        out.append((i, dict(zip(columns, row))))
    return out


def _float(path, lineno, value, name) -> float:
    try:
        return float(value)
    except ValueError:
        raise DataError(f"{path}:{lineno}: invalid {name} {value!r}") from None


def _int(path, lineno, value, name) -> int:
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{path}:{lineno}: invalid {name} {value!r}") from None


@dataclass
class FrameCentroids:
    frame: int
    centroids: list[Centroid]
    extents: list[EllipseExtent | None]


def centroid_rows(frame: int, cs: list[Centroid], extents: list[EllipseExtent | None]):
    for c, ext in zip(cs, extents):
        if ext is not None and c.cls == "reflection":
            ext_cols = [ext.p_v[0], ext.p_v[1], ext.p_h[0], ext.p_h[1]]
        else:
            ext_cols = [None] * 4
        yield [frame, c.u, c.v, c.area, c.peak, c.cls, c.pair, *ext_cols]


def read_centroid_log(path) -> dict[int, FrameCentroids]:
    rows = read_rows(path, "centroids", CENTROID_COLUMNS)
    frames: dict[int, FrameCentroids] = {}
    last = None
    for lineno, r in rows:
        frame = _int(path, lineno, r["frame"], "frame")
        if last is not None and frame < last:
            raise DataError(f"{path}:{lineno}: frame numbers must be non-decreasing")
        last = frame
        if r["class"] not in CLASSES:
            raise DataError(f"{path}:{lineno}: unknown class {r['class']!r}")
        try:
            c = Centroid(
                u=_float(path, lineno, r["u"], "u"),
                v=_float(path, lineno, r["v"], "v"),
                area=_int(path, lineno, r["area"], "area"),
                peak=_int(path, lineno, r["peak"], "peak"),
                cls=r["class"],
                pair=_int(path, lineno, r["pair"], "pair"),
            )
        except ValueError as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"{path}:{lineno}: {exc}") from None
        ext = None
        if r["pv_u"] != "":
            pv = (_float(path, lineno, r["pv_u"], "pv_u"), _float(path, lineno, r["pv_v"], "pv_v"))
            ph = (_float(path, lineno, r["ph_u"], "ph_u"), _float(path, lineno, r["ph_v"], "ph_v"))
            ext = EllipseExtent((c.u, c.v), pv, ph, 0, (0, 0, 0, 0))
        fc = frames.setdefault(frame, FrameCentroids(frame, [], []))
        fc.centroids.append(c)
        fc.extents.append(ext)
    return frames


def read_attitude_log(path) -> np.ndarray:
    """Array with columns frame, t, roll, pitch, height."""
    rows = read_rows(path, "attitude", ATTITUDE_COLUMNS)
    out = []
    for lineno, r in rows:
        vals = [_float(path, lineno, r[k], k) for k in ATTITUDE_COLUMNS]
        if out and (vals[0] <= out[-1][0] or vals[1] <= out[-1][1]):
            raise DataError(f"{path}:{lineno}: non-monotonic frame or timestamp")
        if vals[4] <= 0:
            raise DataError(f"{path}:{lineno}: observer height must be positive")
        out.append(vals)
    return np.array(out, dtype=float).reshape(-1, len(ATTITUDE_COLUMNS))


def read_series(path, kind: str, columns: list[str]) -> np.ndarray:
    rows = read_rows(path, kind, columns)
    arr = np.array([[_float(path, ln, r[k], k) for k in columns] for ln, r in rows], dtype=float)
    arr = arr.reshape(-1, len(columns))
    if len(arr) > 1 and np.any(np.diff(arr[:, 0]) <= 0):
        raise DataError(f"{path}: timestamps must be strictly increasing")
    return arr


def read_estimates(path) -> np.ndarray:
    return read_series(path, "estimates", ESTIMATE_COLUMNS)


def read_truth(path) -> np.ndarray:
    return read_series(path, "truth", TRUTH_COLUMNS)
