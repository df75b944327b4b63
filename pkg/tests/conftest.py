import numpy as np
import pytest

from ckn4.params import validate_params

# the five working parameter pairs exercised across the suite
PARAM_SETS = [(5, 1.0), (5, 0.5), (6, -1.0), (3, 1.5), (7, -2.0)]


@pytest.fixture(scope="session")
def param_sets():
    return [validate_params(N, a) for N, a in PARAM_SETS]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def random_valid_params(rng, n=20):
    out = []
    while len(out) < n:
        N = int(rng.integers(3, 13))
        lo, hi = 4 - N, 2
        a = float(rng.uniform(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo)))
        out.append(validate_params(N, a))
    return out


@pytest.fixture(scope="session")
def spectrum_51():
    """Shared mode-0 eigen data at (5, 1)."""
    from ckn4.spectrum import mode_eigenvalues

    p = validate_params(5, 1.0)
    return p, mode_eigenvalues(p, 0, n_eigs=5, nodes=160)
