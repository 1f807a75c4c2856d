import warnings

import numpy as np
import pytest

# numba probes for TBB on import of a parallel kernel; the fallback is fine
warnings.filterwarnings("ignore", message=".*TBB.*")

from latomo.phantom import default_disk, unit_disk  # noqa: E402
from latomo.recon import ReconSpec  # noqa: E402

PHI = np.pi / 4


@pytest.fixture
def disk():
    return default_disk()


@pytest.fixture
def udisk():
    return unit_disk()


@pytest.fixture
def spec00():
    return ReconSpec.make(0, PHI, 0, 128.0)
