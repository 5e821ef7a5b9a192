import sys

import numpy as np
import pytest
from hypothesis import settings

from wittenlab.config import ExperimentConfig, preset
from wittenlab.derham import build_circle_complex, build_torus_complex
from wittenlab.experiments import run_duality, run_package, run_torsion
from wittenlab.trigpoly import circle_sin2, torus_sin2_product

settings.register_profile("suite", deadline=None, derandomize=True)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def circle_cx8():
    return build_circle_complex(8, circle_sin2())


@pytest.fixture(scope="session")
def torus_cx6():
    return build_torus_complex(6, torus_sin2_product())


# Long-range dichotomy runs: the decay test at the endpoint needs the
# truncation floor at t = 15 below the t = 7.5 plateau, which starts at
# 32 modes for this potential (measured; 30 modes still fails by 4x).
@pytest.fixture(scope="session")
def circle_pkg32():
    cfg = ExperimentConfig(manifold="circle", potential="sin2", modes=32,
                           t_max=15.0, t_step=0.5, k_extra=18)
    return run_package(cfg, assign=True)


@pytest.fixture(scope="session")
def torus_pkg32():
    cfg = ExperimentConfig(manifold="torus", potential="sin2-product",
                           modes=32, t_max=15.0, t_step=0.5)
    return run_package(cfg, assign=True)


@pytest.fixture(scope="session")
def circle_torsion():
    return run_torsion(preset("circle-sin2"))


@pytest.fixture(scope="session")
def torus_torsion():
    return run_torsion(preset("torus-sin2-product"))


@pytest.fixture(scope="session")
def torus_duality():
    return run_duality(preset("torus-sin2-product"))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260816)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # repeat the acceptance lines at the end of the run so the margins
    # are visible even when capture swallows the in-test prints
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", []) if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
