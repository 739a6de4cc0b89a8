import numpy as np
import pytest

import crossdyn as cd

LANDAU_SEED = 20260808
UNIMODAL_SEED = 11


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def landau_data():
    """Double-well ground truth: 5000 samples, fixed seed."""
    return cd.sample_landau(cd.LandauSpec(a=3.0, b=1.0, n=5000, seed=LANDAU_SEED))


@pytest.fixture(scope="session")
def landau_fit(landau_data):
    """Full fit on the raw (unstandardized) double-well sample."""
    return cd.fit_model(landau_data.values, standardize_data=False)


@pytest.fixture(scope="session")
def landau_table(landau_fit):
    return cd.ForceTable(landau_fit.model.landscape)


@pytest.fixture(scope="session")
def unimodal_fit():
    """Single-well cohort fit (standardized), n = 2000."""
    data = cd.sample_landau(cd.LandauSpec(a=-3.0, b=0.1, n=2000, seed=UNIMODAL_SEED))
    return cd.fit_model(data.values, standardize_data=True)
