import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mwglmb.models import (BirthComponent, BirthModel, Models, MotionModel,  # noqa: E402
                           SensorModel)

CRITERIA: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    CRITERIA[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        passed, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")


def small_models(n_sites=2, r_birth=0.3, p_detect=0.7, clutter_rate=2.0, p_survive=0.9,
                 region=((-100.0, 100.0), (-100.0, 100.0))):
    """Toy scenario on a small region with generous birth probability."""
    motion = MotionModel.constant_velocity(1.0, 1.0, p_survive)
    means = [(-30.0, 0.0, 0.0, 0.0), (30.0, 0.0, 0.0, 0.0), (0.0, 0.0, 30.0, 0.0)]
    birth = BirthModel(tuple(BirthComponent(i + 1, r_birth, np.array(means[i]),
                                            np.diag([25.0, 4.0, 25.0, 4.0]))
                             for i in range(n_sites)))
    H = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
    sensor = SensorModel(H, np.diag([16.0, 16.0]), p_detect, clutter_rate, region)
    return Models(motion, birth, sensor)


@pytest.fixture
def toy_models():
    return small_models()
