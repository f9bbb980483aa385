import pytest

from qht.measurement import NoiseConfig
from qht.patterns import build_table


@pytest.fixture(scope="session")
def table_cache():
    """Memoized pattern-table builder shared across the whole session."""
    cache = {}

    def get(N, eta, Q=4096, tol=1e-12, t_cutoff=None):
        key = (N, eta, Q, tol, t_cutoff)
        if key not in cache:
            cache[key] = build_table(N, NoiseConfig(eta), Q=Q, tol=tol, t_cutoff=t_cutoff)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def catalog_states():
    from qht.states import StateModel

    return [
        StateModel.vacuum(),
        StateModel.single_photon(),
        StateModel.coherent(3.0),
        StateModel.thermal(0.25),
        StateModel.cat(3.0),
    ]
