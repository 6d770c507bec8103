"""
Shared pytest configuration and fixtures.

The project root is put on `sys.path` so that tests import the packages the
same way main.py does (`from src.scenario import ...`). Preset runs are
expensive, so each one is simulated once per session and shared.
"""

import os
import sys

import numpy as np
import pytest

# Add the project root to sys.path for module resolution
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.model import initial_state  # noqa: E402
from src.scenario import ScenarioConfig, load_preset  # noqa: E402
from src.simulation import Plant, passivity_monitor, run  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scenario():
    return ScenarioConfig()


@pytest.fixture
def plant():
    return Plant()


@pytest.fixture
def hover_state(plant):
    return initial_state(
        np.array([0.0, 0.0, -1.0]), plant.manipulator, plant.gripper, plant.obj
    )


@pytest.fixture(scope="session")
def preset_trace():
    """Run a preset by name, once per session."""
    traces = {}

    def get(name):
        if name not in traces:
            traces[name] = run(load_preset(name))
        return traces[name]

    return get


@pytest.fixture(scope="session")
def hover_trace(preset_trace):
    return preset_trace("hover")


@pytest.fixture(scope="session")
def fig3_trace(preset_trace):
    return preset_trace("fig3-mission")


@pytest.fixture(scope="session")
def fig3_report(fig3_trace):
    return passivity_monitor(fig3_trace)


@pytest.fixture(scope="session")
def passivity_suite_trace(preset_trace):
    return preset_trace("passivity-suite")
