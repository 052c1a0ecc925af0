import pytest

from src.protocol.schema import NoiseParams, QECCycleConfig
from src.services.channel import transform_kraus
from src.services.kl import build_pair
from src.services.recovery import error_bases

# 8 dB de compresión
R_8DB = 0.921


@pytest.fixture(scope="session")
def pair_8db():
    return build_pair("ours", 1, R_8DB, "plus")


@pytest.fixture(scope="session")
def noise_8db():
    return NoiseParams.from_ratio(1.0, 8.5, 0.01)


@pytest.fixture(scope="session")
def kraus_8db(pair_8db, noise_8db):
    return transform_kraus(pair_8db, noise_8db)


@pytest.fixture(scope="session")
def bases_8db(pair_8db, kraus_8db):
    return error_bases(pair_8db, kraus_8db)


@pytest.fixture
def cycle_cfg():
    return QECCycleConfig(kappa=1.0, kappa_phi=1.0 / 8.5, tau_w=0.01, cycles=3)
