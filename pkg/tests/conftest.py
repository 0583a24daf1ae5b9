from __future__ import annotations

import pytest

from dwptload import INDOT, EvParams


@pytest.fixture
def cfg():
    """Test-track roadway used by most tests."""
    return INDOT


@pytest.fixture
def truck(cfg):
    """Full-demand 1.83 m receiver at the posted segment speed."""
    return EvParams(
        rx_len_m=1.83,
        peak_demand_kw=cfg.power_density_kw_per_m * 1.83,
        speed_mps=24.6,
    )
