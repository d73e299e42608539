import pytest
from hypothesis import HealthCheck, settings

from ammzones.amm_core import FeeSchedule, PoolState

settings.register_profile(
    "default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

REF_X = 997348.0
REF_Y = 3751882.0
REF_SIGMA = 0.0027


@pytest.fixture
def ref_fees():
    return FeeSchedule.from_gammas(0.997, 1.0)


@pytest.fixture
def ref_pool(ref_fees):
    return PoolState.uniswap(REF_X, REF_Y, ref_fees)
