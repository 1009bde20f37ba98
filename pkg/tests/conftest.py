import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from radiomapper.environment import AccessPoint, Environment, Region


@pytest.fixture
def square_region_env():
    """One 10x10 room with three non-collinear APs."""
    region = Region(id=1, polygon=np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]))
    aps = [
        AccessPoint(id=1, position=np.array([2.0, 2.0])),
        AccessPoint(id=2, position=np.array([8.0, 3.0])),
        AccessPoint(id=3, position=np.array([5.0, 8.0])),
    ]
    return Environment(regions=[region], aps=aps, walls=[], rp_spacing=0.5)


@pytest.fixture
def three_room_env():
    """Three 8x6 rooms side by side, one AP each, no walls."""
    regions = []
    aps = []
    for j in range(3):
        x0 = 8.0 * j
        regions.append(
            Region(id=j + 1, polygon=np.array([[x0, 0.0], [x0 + 8, 0.0], [x0 + 8, 6.0], [x0, 6.0]]))
        )
        aps.append(AccessPoint(id=j + 1, position=np.array([x0 + 4.0, 3.0])))
    return Environment(regions=regions, aps=aps, walls=[], rp_spacing=0.5)
