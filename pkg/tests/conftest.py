import json
import sys
from pathlib import Path

import numpy as np
import pytest

from prandtl_lab.experiments import layer_profile
from prandtl_lab.shear_flow import ShearFlowParams, build_shear_flow

ORACLES = json.loads((Path(__file__).with_name("goldens") / "oracles.json").read_text())


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


@pytest.fixture(scope="session")
def profile():
    # shared with the experiment runners through their process cache
    return layer_profile()


@pytest.fixture(scope="session")
def default_flow():
    return build_shear_flow(ShearFlowParams())


@pytest.fixture(scope="session")
def wide_flow():
    return build_shear_flow(ShearFlowParams.wide_cap())


@pytest.fixture(scope="session")
def thin_flow():
    return build_shear_flow(ShearFlowParams.thin_cap())


@pytest.fixture(scope="session")
def tau_physical(profile):
    return complex(profile.tau_tilde / np.sqrt(2.0))


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", {})
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
