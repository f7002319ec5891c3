import math

import pytest

from cavity_dw.core import ModelParams, make_grid

KAPPA = 500.0


def kappa_params(**kw):
    """Model parameters with rates given in units of kappa = 500 omega."""
    base = dict(delta_c=1.0, u0=0.01, eta=0.0, delta_x=0.5)
    base.update(kw)
    extra = {k: base.pop(k) for k in ("g_coll", "n_atoms", "barrier_offset") if k in base}
    return ModelParams.from_kappa_units(KAPPA, **base, **extra)


@pytest.fixture(scope="session")
def grid():
    return make_grid(1024, 12.0)


@pytest.fixture(scope="session")
def fig3():
    return kappa_params(u0=0.01)


@pytest.fixture(scope="session")
def fig4():
    return kappa_params(u0=0.005, eta=25.0)


@pytest.fixture(scope="session")
def fig10():
    a_ho = math.sqrt(1.054571817e-34 / (87 * 1.66053906660e-27 * 2 * math.pi * 1.3e6 / 500))
    return kappa_params(u0=0.2, eta=2.0, delta_x=1e-7 / a_ho, n_atoms=50)
