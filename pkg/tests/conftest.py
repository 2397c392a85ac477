import numpy as np
import pytest

from dcmsg.dataset import SyntheticConfig, generate_synthetic
from dcmsg.modelspec import ModelSpecification, MNL


TRUE_MNL = {"asc_B": 0.0, "asc_C": 0.0, "b_stores": 0.0, "b_transport": 0.0,
            "b_city": 0.0, "b_noise": -0.5, "b_green": 0.0, "b_cost": -0.01}


@pytest.fixture(scope="session")
def small_ds():
    """60 individuals x 4 tasks, complete data."""
    return generate_synthetic(SyntheticConfig(
        n_individuals=60, n_tasks=4, seed=5, true_params=TRUE_MNL))


@pytest.fixture(scope="session")
def medium_ds():
    """200 individuals x 4 tasks, complete data."""
    return generate_synthetic(SyntheticConfig(
        n_individuals=200, n_tasks=4, seed=9, true_params=TRUE_MNL))


@pytest.fixture(scope="session")
def missing_ds():
    """Covariate cells knocked out at a 5% rate."""
    return generate_synthetic(SyntheticConfig(
        n_individuals=60, n_tasks=4, seed=5, true_params=TRUE_MNL,
        missing_rate=0.05))


def spec_json(**overrides):
    """Telemetry-field JSON for a full linear MNL, with overrides."""
    base = ModelSpecification(MNL, asc=True).to_json()
    base.update(overrides)
    return base


@pytest.fixture
def rng():
    return np.random.default_rng(123)
