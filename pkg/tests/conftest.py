import numpy as np
import pytest
from hypothesis import settings

from carnot.algebra import engel, euclidean, free_step2, g_rank2_step4, heisenberg

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

CATALOG = {
    "euclidean(3)": euclidean(3),
    "heisenberg": heisenberg(),
    "free_step2(3)": free_step2(3),
    "engel": engel(),
    "g_rank2_step4": g_rank2_step4(),
}


@pytest.fixture(params=list(CATALOG), ids=list(CATALOG))
def group(request):
    return CATALOG[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
