import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reflectloc.camera import equidistant_calibration, polynomial_calibration  # noqa: E402
from reflectloc.simulator import NoiseModel, SceneConfig, Trajectory  # noqa: E402


@pytest.fixture
def cal():
    return equidistant_calibration()


@pytest.fixture
def distorted_cal():
    # mildly compressive fisheye with a small sensor skew
    return polynomial_calibration(
        (0.0, 160.0, 0.0, -8.0), affine=((1.0, 0.002), (0.0, 0.998)), max_incidence_deg=90.0
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def hover_scene(position, z_o=2.0, frames=60, jitter=0.0, **kwargs):
    return SceneConfig(
        observer_height=z_o,
        trajectory=Trajectory.hover(position, (frames - 1) / 60.0),
        noise=NoiseModel(centroid_jitter_px=jitter),
        **kwargs,
    )


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
