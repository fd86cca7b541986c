"""Command-line entry point: ``reflectloc simulate | replay | report``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..camera import equidistant_calibration, load_calibration
from ..simulator import scene_from_dict
from .config import PROFILE_NAMES, ConfigError, load_run_config, make_run_config
from .csvio import DataError, read_estimates, read_truth
from .metrics import report
from .pipeline import replay, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _load_scene(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scene file not found: {path}")
    try:
        return scene_from_dict(json.loads(path.read_text()), base_dir=path.parent)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _run_config(args):
    overrides = {"seed": args.seed, "output_dir": args.out, "profile": args.profile,
                 "render_mode": getattr(args, "mode", None)}
    if args.config:
        # file parameters stay as overrides on top of a --profile given here
        return load_run_config(args.config, **overrides)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return make_run_config(overrides.pop("profile", "indoor_1"), None, **overrides)


def cmd_simulate(args) -> int:
    run = _run_config(args)
    scene_path = args.scene or run.scene
    if scene_path is None:
        raise ConfigError("no scene given: pass --scene or set 'scene' in the run config")
    scene = _load_scene(scene_path)
    out = args.out or run.output_dir or "out"
    result = run_experiment(run, scene, out_dir=out, dump_points=args.dump_points,
                            dump_cones=args.dump_cones, save_images=args.save_images)
    print(result.report.format())
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    run = _run_config(args)
    cal = equidistant_calibration()
    if args.calibration:
        if not Path(args.calibration).exists():
            raise ConfigError(f"calibration file not found: {args.calibration}")
        try:
            cal = load_calibration(args.calibration)
        except ValueError as exc:
            raise ConfigError(f"{args.calibration}: {exc}") from None
    out = args.out or run.output_dir or "out"
    est = replay(args.centroids, args.attitude, run, cal, out_dir=out)
    print(f"{len(est)} estimates written to {Path(out) / 'estimates.csv'}")
    return EXIT_OK


def cmd_report(args) -> int:
    rep = report(read_estimates(args.estimates), read_truth(args.truth))
    if args.json:
        print(json.dumps(rep.as_dict(), indent=2, sort_keys=True))
    else:
        print(rep.format())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reflectloc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--profile", choices=PROFILE_NAMES)
        sp.add_argument("--out", help="output directory")

    sim = sub.add_parser("simulate", help="simulate a scene and run the pipeline on it")
    common(sim)
    sim.add_argument("--scene", help="JSON scene description")
    sim.add_argument("--mode", choices=("centroids", "image"))
    sim.add_argument("--dump-points", action="store_true", help="write sampled and inlier point clouds")
    sim.add_argument("--dump-cones", action="store_true", help="write cone wireframes")
    sim.add_argument("--save-images", action="store_true", help="write rendered frames as PGM (image mode)")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replay", help="rerun the pipeline from a centroid log")
    common(rep)
    rep.add_argument("--centroids", required=True)
    rep.add_argument("--attitude", required=True)
    rep.add_argument("--calibration", help="calibration file (default: built-in equidistant model)")
    rep.set_defaults(func=cmd_replay)

    met = sub.add_parser("report", help="per-axis error of estimates against truth")
    met.add_argument("--estimates", required=True)
    met.add_argument("--truth", required=True)
    met.add_argument("--json", action="store_true")
    met.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
