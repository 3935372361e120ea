import numpy as np
import pytest

from mimolab.config import LabConfig


def tiny_config(horizon=300, antennas=16, kr=6.0, radius=200.0, total_ues=30,
                scenario=1, ce=(16, 4, 4)) -> LabConfig:
    """Small, fast configuration for unit tests."""
    cfg = LabConfig()
    cfg.system.horizon_ttis = horizon
    cfg.system.antennas = antennas
    cfg.system.avg_concurrent_ues = kr
    cfg.system.ue_slots = max(2, int(2 * kr))
    cfg.system.cell_radius_m = radius
    cfg.system.total_ues = total_ues
    cfg.traffic.scenario = scenario
    cfg.ce.candidates, cfg.ce.elites, cfg.ce.iterations = ce
    cfg.ddpg.hidden = [16, 16]
    cfg.ddpg.batch_size = 32
    cfg.ddpg.buffer_size = 2000
    cfg.ddpg.dropout = 0.0
    return cfg.validate()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
