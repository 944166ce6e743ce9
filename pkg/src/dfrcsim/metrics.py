# Performance quantities: sum-rate, MSE, radar SCNR, beampattern, detection
# probability, power consumption, and energy efficiency.

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, RadarScene, SystemConfig

ARCHITECTURES = ("RS", "PC", "DPC", "FC", "FD")


@dataclass(frozen=True)
class PowerModel:
    """Static circuit power of the transceiver components, watts."""

    P_BB: float = 0.2    # baseband processing
    P_RF: float = 0.3    # per RF chain
    P_PS: float = 0.05   # per phase shifter
    P_SW: float = 0.005  # per switch

    def __post_init__(self):
        for name in ("P_BB", "P_RF", "P_PS", "P_SW"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class BeamformerSet:
    """All beamformer blocks of one design, plus the splitting auxiliaries.

    T_RF: (M_T, N_RF_t) analog precoder; T_D: (N_RF_t, N_s) digital precoder
    partitioned into K blocks of d_s columns; U[k]: (M_U, d_s) user combiners;
    W_RF: (M_R, N_RF_r), W_D: (N_RF_r, N_s) radar receive stages.
    T_aux[k]: (M_T, d_s) equivalent fully-digital precoders; W_aux: (M_R, N_s)
    equivalent fully-digital receive filter.
    """

    T_RF: np.ndarray
    T_D: np.ndarray
    U: tuple[np.ndarray, ...]
    W_RF: np.ndarray
    W_D: np.ndarray
    T_aux: tuple[np.ndarray, ...]
    W_aux: np.ndarray

    def __post_init__(self):
        for a in (self.T_RF, self.T_D, self.W_RF, self.W_D, self.W_aux, *self.U, *self.T_aux):
            np.asarray(a).setflags(write=False)

    def tx_block(self, k: int, cfg: SystemConfig) -> np.ndarray:
        """Digital precoder columns of user k."""
        return self.T_D[:, k * cfg.d_s:(k + 1) * cfg.d_s]

    def tx_effective(self, k: int, cfg: SystemConfig) -> np.ndarray:
        """Physical precoder T_RF @ T_D,k of user k, shape (M_T, d_s)."""
        return self.T_RF @ self.tx_block(k, cfg)

    def validate(self, cfg: SystemConfig, arch: str | None = None) -> None:
        """Check dimensions, the power budget, and (for RS) the switch structure."""
        if self.T_RF.shape != (cfg.M_T, cfg.N_RF_t):
            raise ValueError(f"T_RF shape {self.T_RF.shape} != {(cfg.M_T, cfg.N_RF_t)}")
        if self.T_D.shape != (cfg.N_RF_t, cfg.N_s):
            raise ValueError(f"T_D shape {self.T_D.shape} != {(cfg.N_RF_t, cfg.N_s)}")
        if self.W_RF.shape != (cfg.M_R, cfg.N_RF_r):
            raise ValueError(f"W_RF shape {self.W_RF.shape} != {(cfg.M_R, cfg.N_RF_r)}")
        if self.W_D.shape != (cfg.N_RF_r, cfg.N_s):
            raise ValueError(f"W_D shape {self.W_D.shape} != {(cfg.N_RF_r, cfg.N_s)}")
        if self.W_aux.shape != (cfg.M_R, cfg.N_s):
            raise ValueError(f"W_aux shape {self.W_aux.shape} != {(cfg.M_R, cfg.N_s)}")
        if len(self.U) != cfg.K or any(u.shape != (cfg.M_U, cfg.d_s) for u in self.U):
            raise ValueError("user combiner dimensions inconsistent with config")
        if len(self.T_aux) != cfg.K or any(t.shape != (cfg.M_T, cfg.d_s) for t in self.T_aux):
            raise ValueError("auxiliary precoder dimensions inconsistent with config")
        power = np.linalg.norm(self.T_RF @ self.T_D) ** 2
        if power > cfg.P_T * (1 + 1e-9):
            raise ValueError(f"transmit power {power:.9g} exceeds budget {cfg.P_T}")
        if arch == "RS":
            check_switched_structure(self.T_RF)
            check_switched_structure(self.W_RF)


def check_switched_structure(analog: np.ndarray, tol: float = 1e-9) -> None:
    """Require exactly one unit-modulus entry per row (switched subarrays)."""
    nonzero = np.abs(analog) > tol
    counts = nonzero.sum(axis=1)
    if not np.all(counts == 1):
        raise ValueError("analog matrix must have exactly one nonzero per row")
    moduli = np.abs(analog[nonzero])
    if np.max(np.abs(moduli - 1.0)) > tol:
        raise ValueError("nonzero analog entries must have unit modulus")


# ---------------------------------------------------------------------------
# Communication metrics
# ---------------------------------------------------------------------------

def _effective_precoders(channels: ChannelSet, bf: BeamformerSet, cfg: SystemConfig,
                         use_aux: bool) -> list[np.ndarray]:
    if use_aux:
        return list(bf.T_aux)
    return [bf.tx_effective(k, cfg) for k in range(cfg.K)]


def sum_rate(channels: ChannelSet, bf: BeamformerSet, cfg: SystemConfig,
             use_aux: bool = False) -> float:
    """Downlink sum-rate in bits/s/Hz with the combiners stored in `bf`.

    Raises LinAlgError when the per-user interference-plus-noise matrix is
    singular while the desired signal is nonzero.
    """
    T = _effective_precoders(channels, bf, cfg, use_aux)
    total = 0.0
    for k in range(cfg.K):
        Hk, Uk = channels.H[k], bf.U[k]
        sig = Uk.conj().T @ Hk @ T[k]
        if not np.any(sig):
            continue
        cov = cfg.sigma2_user * np.eye(cfg.M_U, dtype=complex)
        for i in range(cfg.K):
            if i != k:
                HT = Hk @ T[i]
                cov += HT @ HT.conj().T
        Rk = Uk.conj().T @ cov @ Uk
        sign, logdet_r = np.linalg.slogdet(Rk)
        if sign.real <= 0 or not np.isfinite(logdet_r):
            raise np.linalg.LinAlgError("singular interference-plus-noise matrix")
        _, logdet_full = np.linalg.slogdet(Rk + sig @ sig.conj().T)
        total += (logdet_full - logdet_r) / math.log(2.0)
    return float(total)


def mse_matrix(k: int, channels: ChannelSet, bf: BeamformerSet, cfg: SystemConfig,
               use_aux: bool = False) -> np.ndarray:
    """Symbol-estimate error covariance of user k, shape (d_s, d_s), Hermitian PSD."""
    T = _effective_precoders(channels, bf, cfg, use_aux)
    Hk, Uk = channels.H[k], bf.U[k]
    cross = Uk.conj().T @ Hk @ T[k]
    E = np.eye(cfg.d_s, dtype=complex) - cross - cross.conj().T
    E += cfg.sigma2_user * (Uk.conj().T @ Uk)
    for i in range(cfg.K):
        UHT = Uk.conj().T @ Hk @ T[i]
        E += UHT @ UHT.conj().T
    return E


# ---------------------------------------------------------------------------
# Radar metrics
# ---------------------------------------------------------------------------

def clutter_noise_covariance(T: np.ndarray, scene: RadarScene, cfg: SystemConfig) -> np.ndarray:
    """Clutter-plus-noise covariance at the receive array, shape (M_R, M_R).

    T is the physical transmit matrix of shape (M_T, N_s).
    """
    from .model import response_matrix

    cov = cfg.sigma2_radar * np.eye(cfg.M_R, dtype=complex)
    for theta in scene.theta_j:
        AT = response_matrix(theta, cfg) @ T
        cov += scene.sigmaC_sq * (AT @ AT.conj().T)
    return cov


def scnr_full(bf: BeamformerSet, scene: RadarScene, cfg: SystemConfig) -> float:
    """Radar SCNR from the full matrix quadratic forms (physical beamformers)."""
    from .model import response_matrix

    T = bf.T_RF @ bf.T_D
    W = bf.W_RF @ bf.W_D
    if not np.any(W):
        raise ValueError("receive beamformer is zero; SCNR undefined")
    A0T = response_matrix(scene.theta_0, cfg) @ T
    sig_cov = scene.sigma0_sq * (A0T @ A0T.conj().T)
    cn_cov = clutter_noise_covariance(T, scene, cfg)
    num = np.trace(W.conj().T @ sig_cov @ W).real
    den = np.trace(W.conj().T @ cn_cov @ W).real
    return float(num / den)


def stack_columns(T: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(T).reshape(-1, order="F")


def unstack_columns(t: np.ndarray, rows: int) -> np.ndarray:
    return np.asarray(t).reshape(rows, -1, order="F")


def stacked_clutter_noise_covariance(t: np.ndarray, scene: RadarScene,
                                     cfg: SystemConfig) -> np.ndarray:
    """Clutter-plus-noise covariance of the stacked receive filter, (M_R*N_s)^2."""
    from .model import response_matrix

    T = unstack_columns(t, cfg.M_T)
    n = cfg.M_R * T.shape[1]
    cov = cfg.sigma2_radar * np.eye(n, dtype=complex)
    for theta in scene.theta_j:
        v = stack_columns(response_matrix(theta, cfg) @ T)
        cov += scene.sigmaC_sq * np.outer(v, v.conj())
    return cov


def scnr_vectorized(t: np.ndarray, w: np.ndarray, scene: RadarScene,
                    cfg: SystemConfig) -> float:
    """Radar SCNR in the stacked (vectorized) convention.

    t stacks the per-user transmit columns (length M_T*N_s); w stacks the
    receive filter (length M_R*N_s). Equals `scnr_full` for single-stream
    designs; for N_s > 1 it is the ratio the receive-filter optimization works
    with.
    """
    from .model import response_matrix

    if not np.any(w):
        raise ValueError("receive vector is zero; SCNR undefined")
    T = unstack_columns(t, cfg.M_T)
    a0t = stack_columns(response_matrix(scene.theta_0, cfg) @ T)
    num = scene.sigma0_sq * abs(np.vdot(w, a0t)) ** 2
    cov = stacked_clutter_noise_covariance(t, scene, cfg)
    den = np.real(np.vdot(w, cov @ w))
    return float(num / den)


def beampattern(w: np.ndarray, t: np.ndarray, theta_grid: np.ndarray,
                cfg: SystemConfig) -> np.ndarray:
    """Receive-transmit beampattern |w^H A(theta) t|^2 in dB, peak-normalized.

    Evaluated in the stacked convention; the grid maximum maps to 0 dB.
    """
    from .model import response_matrix

    theta_grid = np.atleast_1d(np.asarray(theta_grid, dtype=float))
    if theta_grid.size == 0:
        raise ValueError("theta_grid must be nonempty")
    T = unstack_columns(t, cfg.M_T)
    p = np.empty(theta_grid.size)
    for i, theta in enumerate(theta_grid):
        v = stack_columns(response_matrix(theta, cfg) @ T)
        p[i] = abs(np.vdot(w, v)) ** 2
    peak = p.max()
    if peak <= 0:
        raise ValueError("beampattern is identically zero")
    floor = peak * 1e-30
    return 10.0 * np.log10(np.maximum(p, floor) / peak)


# ---------------------------------------------------------------------------
# Detection probability
# ---------------------------------------------------------------------------

# The series is exact to rtol while e^{-b^2/2} stays in range and the Poisson
# center stays enumerable; outside that the normal-tail asymptote takes over
# (absolute error <~1e-3 at the boundary corner, vanishing for larger args).
_MARCUM_MAX_U = 700.0
_MARCUM_MAX_X = 1e7


def marcum_q1(a: float, b: float, rtol: float = 1e-10) -> float:
    """First-order Marcum Q function Q_1(a, b).

    Poisson-weighted chi-square tail series started at the Poisson mode, with
    a crossover to the normal-tail asymptote for arguments beyond the series
    domain.
    """
    if a < 0 or b < 0:
        raise ValueError("arguments must be nonnegative")
    if b == 0:
        return 1.0
    x = 0.5 * a * a   # Poisson intensity
    u = 0.5 * b * b   # chi-square threshold
    if x > _MARCUM_MAX_X or u > _MARCUM_MAX_U:
        tail = 0.5 * math.erfc((b - a) / math.sqrt(2.0))
        if a > 0:
            tail += math.exp(-0.5 * (b - a) ** 2) / (2.0 * math.sqrt(2.0 * math.pi * a * b))
        return min(max(tail, 0.0), 1.0)
    if x == 0.0:
        return math.exp(-u)

    # Poisson pmf terms p_n = e^-x x^n / n!, chi-square tails
    # g_n = e^-u sum_{j<=n} u^j / j!; Q = sum_n p_n g_n.
    n0 = int(x)
    log_p0 = n0 * math.log(x) - x - math.lgamma(n0 + 1)
    p_center = math.exp(log_p0)

    # cumulative tail weight g_{n0}; terms past u + O(sqrt(u)) are negligible
    j_cut = int(u + 60.0 * math.sqrt(u) + 60.0)
    q = math.exp(-u)
    g = q
    for j in range(1, min(n0, j_cut) + 1):
        q *= u / j
        g += q
    if n0 > j_cut:
        g = 1.0
        q = 0.0
    g = min(g, 1.0)
    q_up = q  # e^-u u^{min(n0, j_cut)} / (min(n0, j_cut))!

    total = p_center * g
    # upward sweep
    p, g_up, q_j, n = p_center, g, q_up, n0
    while True:
        n += 1
        p *= x / n
        q_j *= u / n
        g_up = min(g_up + q_j, 1.0)
        term = p * g_up
        total += term
        # remaining Poisson mass is < p * (n+1)/(n+1-x) once n exceeds x
        if n > x and term < rtol * total * 1e-2:
            break
        if n > n0 + 10_000_000:  # pragma: no cover
            break
    # downward sweep
    p, g_dn, q_j = p_center, g, q_up
    for n in range(n0, 0, -1):
        g_dn -= q_j
        q_j *= n / u
        p *= n / x
        term = p * max(g_dn, 0.0)
        total += term
        if term < rtol * total * 1e-2:
            break
    return min(max(total, 0.0), 1.0)


def detection_probability(scnr: float, p_fa: float) -> float:
    """Radar detection probability at the given SCNR and false-alarm rate."""
    if scnr < 0:
        raise ValueError("scnr must be >= 0")
    if not (0.0 < p_fa < 1.0):
        raise ValueError("p_fa must lie in (0, 1)")
    a = math.sqrt(2.0 * scnr)
    b = math.sqrt(-2.0 * math.log(p_fa))
    return marcum_q1(a, b)


# ---------------------------------------------------------------------------
# Power and energy efficiency
# ---------------------------------------------------------------------------

def total_power(arch: str, cfg: SystemConfig, pm: PowerModel) -> float:
    """Total power draw of the given transceiver architecture, watts."""
    n_rf = cfg.N_RF_t + cfg.N_RF_r
    n_ant = cfg.M_T + cfg.M_R
    base = cfg.P_T + pm.P_BB
    if arch == "RS":
        return base + n_rf * pm.P_RF + n_ant * pm.P_PS + n_ant * pm.P_SW
    if arch == "PC":
        return base + n_rf * pm.P_RF + n_ant * pm.P_PS
    if arch == "DPC":
        return base + n_rf * pm.P_RF + 2 * n_ant * pm.P_PS
    if arch == "FC":
        return base + n_rf * pm.P_RF + (cfg.M_T * cfg.N_RF_t + cfg.M_R * cfg.N_RF_r) * pm.P_PS
    if arch == "FD":
        return base + n_ant * pm.P_RF
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")


def energy_efficiency(rate: float, arch: str, cfg: SystemConfig, pm: PowerModel) -> float:
    """Per-user rate per watt: rate / (K * total power)."""
    if rate < 0:
        raise ValueError("rate must be >= 0")
    return rate / (cfg.K * total_power(arch, cfg, pm))
