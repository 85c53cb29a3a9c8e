import numpy as np
import pytest

from skdelay.drifts import (
    DriftSpec,
    make_admissible_step,
    make_indicator_step,
    mollify_drift,
)
from skdelay.noise import HurstWeightSpec, sample_paths
from skdelay.solver import SolverConfig

HORIZON = 0.5
STEP = 1 / 64
DELAY = 0.5


@pytest.fixture
def spec() -> HurstWeightSpec:
    return HurstWeightSpec((0.1, 0.2), (1.0, 0.5))


@pytest.fixture
def solver_config() -> SolverConfig:
    return SolverConfig.build(T=HORIZON, dt=STEP, r=DELAY, d=2)


@pytest.fixture
def paths(spec):
    return sample_paths(spec, HORIZON, int(HORIZON / STEP), 4000, seed=11)


@pytest.fixture
def canonical_drift() -> DriftSpec:
    return DriftSpec((make_admissible_step(),))


@pytest.fixture(scope="session")
def step_drift():
    """Indicator of [0, 1] in the first coefficient and a negative step in
    the second, mollified at level 4."""
    spec = DriftSpec(
        (
            make_indicator_step(0.0, 1.0, 1.0),
            make_indicator_step(-0.5, 0.5, -0.5),
        )
    )
    return mollify_drift(spec, 4)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
