import numpy as np
import pytest
from hypothesis import settings

from fusetrack.geometry import Detection

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def make_det(center=(0.0, 0.0, 0.0), velocity=(0.0, 0.0, 0.0), yaw=0.0, dims=(4.0, 2.0, 1.5),
             score=0.9, class_id=0, embedding=None, dim=8):
    if embedding is None:
        embedding = np.eye(dim)[0]
    return Detection(center=center, dims=dims, yaw=yaw, velocity=velocity, score=score,
                     class_id=class_id, embedding=unit(embedding))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one line each; shown at the end of every run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
