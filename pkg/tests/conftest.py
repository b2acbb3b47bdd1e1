from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from shuttle3d.flight_sim import (
    REFERENCE_NOISE,
    FlightParams,
    RallyScript,
    Segment,
    reference_rallies,
    render_detections,
    simulate_flight,
)
from shuttle3d.geometry import default_rig


@pytest.fixture(scope="session")
def rig():
    return default_rig()


@pytest.fixture(scope="session")
def central_flight():
    """A gentle lob that never leaves the central 640x640 crop of either camera."""
    return simulate_flight(RallyScript((Segment(0.0, (0.4, 10.0, 1.8), (0.3, -5.0, 3.0)),)), FlightParams(duration=0.8))


@pytest.fixture(scope="session")
def serve_flight():
    return simulate_flight(reference_rallies()[0])


@pytest.fixture(scope="session")
def clean_streams(rig, central_flight):
    return render_detections(central_flight, rig)


@pytest.fixture(scope="session")
def reference_clips(rig):
    clips, truths = [], []
    for k, script in enumerate(reference_rallies()):
        gt = simulate_flight(script)
        truths.append(gt)
        clips.append(render_detections(gt, rig, dataclasses.replace(REFERENCE_NOISE, rng_seed=REFERENCE_NOISE.rng_seed + k)))
    return clips, truths


def with_misses(traj, frames):
    out = traj.copy()
    out.mask[list(frames)] = 0
    out.points[list(frames)] = np.nan
    return out


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
