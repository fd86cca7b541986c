"""Frame-by-frame composition: detection -> cones -> sampling -> tracking."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import detection as det
from ..camera import CameraCalibration, CameraDomainError, ObserverAttitude, cam2world, compensate_attitude
from ..cones import (
    ConeGeometryError,
    EllipticalCone,
    SurfaceGeometry,
    build_direct_cone,
    build_reflection_cone,
    reflection_geometry,
    wireframe_segments,
)
from ..sampler import InlierSet, SamplerConfig, intersect
from ..simulator import SceneConfig, render_frame
from .. import tracker as trk
from . import csvio
from .config import PipelineParameters, RunConfig
from .metrics import ErrorReport, empty_report, report

log = logging.getLogger(__name__)


def select_pair(cs: list[det.Centroid]) -> tuple[int, int] | None:
    """Indices (direct, reflection) of the first classified pair."""
    for i, c in enumerate(cs):
        if c.cls == det.REFLECTION and 0 <= c.pair < len(cs) and cs[c.pair].cls == det.DIRECT:
            return c.pair, i
    return None


@dataclass
class FrameCones:
    reflection: EllipticalCone
    direct: EllipticalCone


def build_cones(
    direct: det.Centroid,
    extent: det.EllipseExtent,
    cal: CameraCalibration,
    att: ObserverAttitude,
    params: PipelineParameters,
) -> FrameCones:
    """Both cones for one direct/reflection pair; raises on unusable geometry."""
    def bearing(p):
        return compensate_attitude(cam2world(np.asarray(p, dtype=float), cal), att)

    geom = reflection_geometry(bearing(extent.center), bearing(extent.p_v), bearing(extent.p_h), att.height)
    surf = SurfaceGeometry(z_o=att.height, z_m=params.z_m, x_m=params.x_m)
    reflection = build_reflection_cone(geom, surf, alpha_cap=params.alpha_r_max_rad)
    direct_cone = build_direct_cone(
        bearing((direct.u, direct.v)), params.alpha_d_max_rad, params.upsilon_d_max_rad, params.x_m
    )
    return FrameCones(reflection, direct_cone)


@dataclass
class StepOutput:
    frame: int
    t: float
    inliers: InlierSet
    cones: FrameCones | None
    estimate: np.ndarray | None  # t, x, y, z, spread_x, spread_y, spread_z, n_inliers


class Localizer:
    """Everything downstream of blob classification, for one transmitter."""

    def __init__(self, run: RunConfig, cal: CameraCalibration, keep_samples: bool = False):
        self.run = run
        self.cal = cal
        self.params = run.parameters
        self.sampler_cfg = SamplerConfig(
            n=run.parameters.n,
            seed=run.seed,
            workers=run.sampler_workers,
            membership=run.membership,
        )
        self.rng = np.random.default_rng(run.seed)
        self.state: trk.TrackState | None = None
        self.keep_samples = keep_samples

    def inliers_for(self, frame: int, t: float, cs, extents, att: ObserverAttitude):
        pair = select_pair(cs)
        if pair is None:
            return InlierSet(np.empty((0, 3)), 0, t), None
        i_d, i_r = pair
        extent = extents[i_r]
        if extent is None:
            c = cs[i_r]
            extent = det.EllipseExtent((c.u, c.v), (c.u, c.v), (c.u, c.v), self.params.sigma, (0, 0, 0, 0))
        try:
            cones = build_cones(cs[i_d], extent, self.cal, att, self.params)
        except (ConeGeometryError, CameraDomainError) as exc:
            log.debug("frame %d: no cones (%s)", frame, exc)
            return InlierSet(np.empty((0, 3)), 0, t), None
        inl = intersect(cones.reflection, cones.direct, self.sampler_cfg, stream=frame,
                        timestamp=t, keep_samples=self.keep_samples)
        return inl, cones

    def step(self, frame: int, t: float, cs, extents, att: ObserverAttitude) -> StepOutput:
        inl, cones = self.inliers_for(frame, t, cs, extents, att)
        cfg = self.run.tracker
        if self.state is None:
            if not inl.empty:
                self.state = trk.init(inl, cfg, rng=self.rng)
        else:
            self.state = trk.predict(self.state, max(0.0, t - self.state.last_update), cfg)
            self.state = trk.update(self.state, inl, cfg)
        est = None
        if self.state is not None:
            s = self.state
            est = np.array([t, *s.estimate, *s.spread, len(inl)], dtype=float)
        return StepOutput(frame, t, inl, cones, est)


@dataclass
class ExperimentResult:
    estimates: np.ndarray
    observations: np.ndarray
    truth: np.ndarray
    report: ErrorReport
    centroid_rows: list = field(default_factory=list)
    attitude_rows: list = field(default_factory=list)
    steps: list[StepOutput] = field(default_factory=list, repr=False)

    @property
    def inlier_availability(self) -> float:
        """Fraction of frames whose cones produced at least one inlier."""
        if len(self.truth) == 0:
            return 0.0
        return len(self.observations) / len(self.truth)


def _report_or_empty(estimates: np.ndarray, truth: np.ndarray) -> ErrorReport:
    if len(estimates) == 0 or len(truth) == 0:
        return empty_report()
    return report(estimates, truth)


def _observation_row(step: StepOutput):
    if step.inliers.empty:
        return None
    return [step.t, *step.inliers.centroid, len(step.inliers)]


def run_experiment(
    run: RunConfig,
    scene: SceneConfig,
    out_dir=None,
    dump_points: bool = False,
    dump_cones: bool = False,
    save_images: bool = False,
    keep_steps: bool = False,
) -> ExperimentResult:
    """Simulate the scene, run the full pipeline per frame, and score it."""
    params = run.parameters
    scene = replace(scene, exposure_ms=params.exposure_ms)
    att = scene.attitude
    loc = Localizer(run, scene.camera, keep_samples=dump_points)
    history = det.PersistenceRecord()
    az_tol = np.deg2rad(run.azimuth_tol_deg)
    out = Path(out_dir) if out_dir is not None else None

    estimates, observations, truth_rows, centroid_rows, attitude_rows = [], [], [], [], []
    point_rows, wire_rows, steps = [], [], []
    for k, t in enumerate(scene.frame_times()):
        t = float(t)
        frame, truth = render_frame(scene, t, mode=run.render_mode, seed=run.seed, threshold=params.sigma)
        truth_rows.append([t, *truth.transmitter_pos])
        attitude_rows.append([k, t, att.roll, att.pitch, att.height])
        if run.render_mode == "image":
            if save_images and out is not None:
                save_pgm(frame.image, out / "frames" / f"frame_{k:05d}.pgm")
            cs = det.classify_centroids(det.detect(frame.image, params.sigma), history, scene.camera, att, az_tol)
            extents = [None] * len(cs)
            pair = select_pair(cs)
            if pair is not None:
                extents[pair[1]] = det.measure_extent(frame.image, cs[pair[1]], params.sigma)
        else:
            cs = det.classify_centroids(frame.centroids, history, scene.camera, att, az_tol)
            extents = frame.extents
        centroid_rows.extend(csvio.centroid_rows(k, cs, extents))
        step = loc.step(k, t, cs, extents, att)
        if step.estimate is not None:
            estimates.append(step.estimate)
        obs = _observation_row(step)
        if obs is not None:
            observations.append(obs)
        if dump_points and step.inliers.samples is not None:
            point_rows.extend([k, "samples", *p] for p in step.inliers.samples)
            point_rows.extend([k, "inliers", *p] for p in step.inliers.points)
        if dump_cones and step.cones is not None:
            wire_rows.extend([k, "reflection", *s] for s in wireframe_segments(step.cones.reflection))
            wire_rows.extend([k, "direct", *s] for s in wireframe_segments(step.cones.direct))
        if keep_steps:
            steps.append(step)

    est = np.array(estimates, dtype=float).reshape(-1, 8)
    obs_arr = np.array(observations, dtype=float).reshape(-1, 5)
    truth_arr = np.array(truth_rows, dtype=float).reshape(-1, 4)
    result = ExperimentResult(
        estimates=est,
        observations=obs_arr,
        truth=truth_arr,
        report=_report_or_empty(est, truth_arr),
        centroid_rows=centroid_rows,
        attitude_rows=attitude_rows,
        steps=steps,
    )
    if out is not None:
        write_outputs(out, result)
        if dump_points:
            csvio.write_rows(out / "points.csv", "points", csvio.POINT_COLUMNS, point_rows)
        if dump_cones:
            csvio.write_rows(out / "cones.csv", "cones", csvio.WIREFRAME_COLUMNS, wire_rows)
    return result


def write_outputs(out: Path, result: ExperimentResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    csvio.write_rows(out / "estimates.csv", "estimates", csvio.ESTIMATE_COLUMNS, _estimate_rows(result.estimates))
    csvio.write_rows(out / "observations.csv", "observations", csvio.OBSERVATION_COLUMNS,
                     _estimate_rows(result.observations))
    csvio.write_rows(out / "truth.csv", "truth", csvio.TRUTH_COLUMNS, result.truth.tolist())
    csvio.write_rows(out / "centroids.csv", "centroids", csvio.CENTROID_COLUMNS, result.centroid_rows)
    csvio.write_rows(out / "attitude.csv", "attitude", csvio.ATTITUDE_COLUMNS, result.attitude_rows)
    (out / "report.json").write_text(json.dumps(result.report.as_dict(), indent=2, sort_keys=True) + "\n")


def _estimate_rows(arr: np.ndarray):
    # n_inliers is a count; keep it integral in the CSV
    for row in arr:
        yield [*row[:-1].tolist(), int(row[-1])]


def _attitude_for(frames: np.ndarray, att_log: np.ndarray) -> dict[int, tuple[float, ObserverAttitude]]:
    if len(att_log) == 0:
        if len(frames):
            raise csvio.DataError("attitude log is empty but centroid log is not")
        return {}
    f = att_log[:, 0]
    out = {}
    for k in frames:
        if k < f[0] or k > f[-1]:
            raise csvio.DataError(f"frame {k} lies outside the attitude log")
        row = [float(np.interp(k, f, att_log[:, j])) for j in range(1, 5)]
        exact = np.nonzero(f == k)[0]
        if len(exact):
            row = att_log[exact[0], 1:5].tolist()
        out[int(k)] = (row[0], ObserverAttitude(row[1], row[2], row[3]))
    return out


def replay(centroid_log, attitude_log, run: RunConfig, cal: CameraCalibration, out_dir=None) -> np.ndarray:
    """Rerun the pipeline downstream of detection from logged centroids.

    Frames present in the attitude log but absent from the centroid log are
    prediction-only tracker steps.  Returns the estimate rows.
    """
    frames_log = csvio.read_centroid_log(centroid_log)
    att_log = csvio.read_attitude_log(attitude_log)
    frames = np.array(sorted(set(att_log[:, 0].astype(int).tolist()) | set(frames_log)), dtype=int)
    att_map = _attitude_for(frames, att_log)
    loc = Localizer(run, cal)
    estimates = []
    for k in frames:
        t, att = att_map[int(k)]
        fc = frames_log.get(int(k))
        cs = fc.centroids if fc else []
        extents = fc.extents if fc else []
        step = loc.step(int(k), t, cs, extents, att)
        if step.estimate is not None:
            estimates.append(step.estimate)
    est = np.array(estimates, dtype=float).reshape(-1, 8)
    if out_dir is not None:
        out = Path(out_dir)
        csvio.write_rows(out / "estimates.csv", "estimates", csvio.ESTIMATE_COLUMNS, _estimate_rows(est))
    return est


def save_pgm(img: np.ndarray, path) -> None:
    from PIL import Image

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path, format="PPM")


def load_pgm(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode != "L":
            raise csvio.DataError(f"{path}: expected an 8-bit grayscale image, got mode {im.mode}")
        return np.array(im)


def _run_one(args):
    run, scene = args
    return run_experiment(run, scene).report


def run_many(jobs: list[tuple[RunConfig, SceneConfig]], workers: int = 1) -> list[ErrorReport]:
    """Independent experiments, optionally in worker processes."""
    if workers <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))
