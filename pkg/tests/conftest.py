import numpy as np
import pytest

from dfrcsim import PathLossModel, RadarScene, SystemConfig


@pytest.fixture
def desk_cfg():
    return SystemConfig()  # M_T=16, M_R=8, N_RF=4, K=2, d_s=1


@pytest.fixture
def desk_scene():
    return RadarScene(theta_0=0.0, theta_j=np.deg2rad([-30.0, 30.0]),
                      sigma0_sq=10.0, sigmaC_sq=100.0)


@pytest.fixture
def path_loss():
    return PathLossModel()


def complex_randn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_channels(rng, K, M_U, M_T):
    """Unstructured random channel matrices for block-update oracles."""
    return [complex_randn(rng, M_U, M_T) for _ in range(K)]


def small_cfg(**kw):
    base = dict(M_T=4, M_R=4, N_RF_t=2, N_RF_r=2, K=2, M_U=2, d_s=1,
                P_T=4.0, sigma2_user=0.5, sigma2_radar=1.0)
    base.update(kw)
    return SystemConfig(**base)
