# Physical model: array geometry, mmWave multipath channels, radar scene.

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SystemConfig:
    """Array sizes, RF-chain counts, user counts, and power/noise levels.

    Powers are linear watts; angles elsewhere in the library are radians.
    """

    M_T: int = 16            # transmit antennas at the BS
    M_R: int = 8             # receive (radar) antennas at the BS
    N_RF_t: int = 4          # transmit RF chains
    N_RF_r: int = 4          # receive RF chains
    K: int = 2               # users
    M_U: int = 2             # antennas per user
    d_s: int = 1             # data streams per user
    P_T: float = 10.0        # total transmit power budget, W
    sigma2_user: float = 1e-12   # per-user noise power, W (-90 dBm)
    sigma2_radar: float = 0.1    # radar receiver noise power, W
    wavelength: float = 1.0      # carrier wavelength; only d/wavelength matters
    spacing: float | None = None  # antenna spacing, default wavelength/2

    def __post_init__(self):
        if self.spacing is None:
            object.__setattr__(self, "spacing", self.wavelength / 2.0)
        counts = {
            "M_T": self.M_T, "M_R": self.M_R, "N_RF_t": self.N_RF_t,
            "N_RF_r": self.N_RF_r, "K": self.K, "M_U": self.M_U, "d_s": self.d_s,
        }
        for name, v in counts.items():
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if not (self.N_s <= self.N_RF_t <= self.M_T):
            raise ValueError(
                f"need N_s <= N_RF_t <= M_T, got N_s={self.N_s}, "
                f"N_RF_t={self.N_RF_t}, M_T={self.M_T}")
        if self.d_s > self.M_U:
            raise ValueError(f"d_s={self.d_s} exceeds user antennas M_U={self.M_U}")
        for name in ("P_T", "sigma2_user", "sigma2_radar", "wavelength", "spacing"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def N_s(self) -> int:
        """Total number of data streams."""
        return self.K * self.d_s


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss with lognormal shadowing (NLoS mmWave fit)."""

    alpha: float = 72.0        # intercept, dB
    beta: float = 2.92         # distance exponent
    sigma_shadow: float = 8.7  # shadowing standard deviation, dB

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.sigma_shadow < 0:
            raise ValueError("sigma_shadow must be >= 0")


@dataclass(frozen=True)
class RadarScene:
    """Target and clutter geometry with reflection power statistics."""

    theta_0: float                     # target angle, rad
    theta_j: np.ndarray                # clutter angles, rad, shape (J,)
    sigma0_sq: float                   # target reflection power, linear
    sigmaC_sq: float                   # per-clutterer reflection power, linear

    def __post_init__(self):
        object.__setattr__(self, "theta_j", np.atleast_1d(np.asarray(self.theta_j, dtype=float)))
        self.theta_j.setflags(write=False)
        angles = np.concatenate(([self.theta_0], self.theta_j))
        if np.any(np.abs(angles) >= np.pi / 2):
            raise ValueError("all angles must lie in (-pi/2, pi/2)")
        if self.sigma0_sq <= 0:
            raise ValueError("sigma0_sq must be > 0")
        if self.sigmaC_sq < 0:
            raise ValueError("sigmaC_sq must be >= 0")

    @property
    def num_clutter(self) -> int:
        return len(self.theta_j)


@dataclass(frozen=True)
class ChannelSet:
    """Per-user downlink channel matrices with the multipath metadata behind them.

    H[k] has shape (M_U, M_T). path_gain[k], aod[k], aoa[k] have length L[k].
    pl_db[k] includes the per-realization shadowing draw.
    """

    H: tuple[np.ndarray, ...]
    path_gain: tuple[np.ndarray, ...]
    aod: tuple[np.ndarray, ...]
    aoa: tuple[np.ndarray, ...]
    L: tuple[int, ...]
    distance: tuple[float, ...]
    pl_db: tuple[float, ...]

    def __post_init__(self):
        shapes = {h.shape for h in self.H}
        if len(shapes) != 1:
            raise ValueError(f"inconsistent channel shapes: {shapes}")
        for h in self.H:
            if not np.all(np.isfinite(h)):
                raise ValueError("channel matrix contains non-finite entries")
            h.setflags(write=False)

    @property
    def num_users(self) -> int:
        return len(self.H)


def steering_vector(angle: float, num_antennas: int, cfg: SystemConfig) -> np.ndarray:
    """Unit-norm ULA response vector at the given angle (radians)."""
    if num_antennas < 1:
        raise ValueError("num_antennas must be >= 1")
    m = np.arange(num_antennas)
    phase = -2j * np.pi / cfg.wavelength * cfg.spacing * m * np.sin(angle)
    return np.exp(phase) / np.sqrt(num_antennas)


def response_matrix(theta: float, cfg: SystemConfig) -> np.ndarray:
    """Two-way array response a_r(theta) a_t(theta)^T, shape (M_R, M_T).

    Plain transpose on the transmit vector, not conjugate transpose: the echo
    traverses the transmit array in the same propagation direction.
    """
    a_r = steering_vector(theta, cfg.M_R, cfg)
    a_t = steering_vector(theta, cfg.M_T, cfg)
    return np.outer(a_r, a_t)


def path_loss_db(distance: float, model: PathLossModel, shadowing: float = 0.0) -> float:
    """Path loss in dB at the given distance (m), plus a shadowing sample (dB)."""
    if distance <= 0:
        raise ValueError(f"distance must be > 0, got {distance}")
    return model.alpha + 10.0 * model.beta * np.log10(distance) + shadowing


def generate_channel(
    cfg: SystemConfig,
    model: PathLossModel,
    distances: float | Sequence[float],
    num_paths: int | Sequence[int],
    rng: np.random.Generator,
) -> ChannelSet:
    """Draw one multipath channel realization for all K users.

    Each user gets an independent substream spawned from `rng`, so increasing
    K leaves the channels of existing users untouched. Per user the draw order
    is: shadowing, AoDs, AoAs, complex path gains (real/imag each with half
    the total variance). Departure and arrival angles are uniform on
    [-pi/2, pi/2]; the path-gain variance is 10^(-PL/10) with PL including
    the shadowing sample.
    """
    dist = np.broadcast_to(np.asarray(distances, dtype=float), (cfg.K,))
    paths = np.broadcast_to(np.asarray(num_paths, dtype=int), (cfg.K,))
    if np.any(paths < 1):
        raise ValueError("every user needs at least one path")

    streams = rng.spawn(cfg.K)
    H, gains, aods, aoas, pls = [], [], [], [], []
    for k, sub in enumerate(streams):
        L = int(paths[k])
        shadow = sub.normal(0.0, model.sigma_shadow) if model.sigma_shadow > 0 else 0.0
        pl = path_loss_db(dist[k], model, shadow)
        var = 10.0 ** (-0.1 * pl)
        aod = sub.uniform(-np.pi / 2, np.pi / 2, size=L)
        aoa = sub.uniform(-np.pi / 2, np.pi / 2, size=L)
        alpha = np.sqrt(var / 2.0) * (sub.standard_normal(L) + 1j * sub.standard_normal(L))
        h = np.zeros((cfg.M_U, cfg.M_T), dtype=complex)
        for l in range(L):
            a_r = steering_vector(aoa[l], cfg.M_U, cfg)
            a_t = steering_vector(aod[l], cfg.M_T, cfg)
            h += alpha[l] * np.outer(a_r, a_t.conj())
        h *= np.sqrt(cfg.M_T * cfg.M_U / L)
        H.append(h)
        gains.append(alpha)
        aods.append(aod)
        aoas.append(aoa)
        pls.append(float(pl))

    return ChannelSet(
        H=tuple(H),
        path_gain=tuple(gains),
        aod=tuple(aods),
        aoa=tuple(aoas),
        L=tuple(int(p) for p in paths),
        distance=tuple(float(d) for d in dist),
        pl_db=tuple(pls),
    )
