import time

import pytest

from ipdtune import NORMALIZED_PLANT, PiGains, tune

# Known normalized optimum to four decimals, and the reference comparison
# points used across the suite.
KNOWN_OPTIMUM = PiGains(0.4614, 0.0793)
IAE_HALF = PiGains(0.8289, 0.2015)
ITAE_HALF = PiGains(0.7532, 0.1916)


@pytest.fixture(scope="session")
def tuned():
    """Full-budget spectral tune of the normalized plant, run once per session.

    Returns (gains, pole_set, elapsed_seconds).
    """
    t0 = time.perf_counter()
    gains, poles = tune(NORMALIZED_PLANT)
    elapsed = time.perf_counter() - t0
    return gains, poles, elapsed
