# Block-diagonal (persistently connected) variant of the beamforming design:
# fixed antenna-to-chain wiring, per-element analog phases in closed form, and
# a norm-constrained ridge least-squares digital stage solved by bisection.

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcStructure:
    """Fixed block-diagonal wiring: chain n owns antennas [n*M, (n+1)*M)."""

    num_antennas: int
    num_chains: int

    def __post_init__(self):
        if self.num_chains < 1 or self.num_antennas < 1:
            raise ValueError("antenna and chain counts must be >= 1")
        if self.num_antennas % self.num_chains:
            raise ValueError(
                f"antenna count {self.num_antennas} not divisible by "
                f"{self.num_chains} chains")

    @property
    def block_size(self) -> int:
        return self.num_antennas // self.num_chains

    def assignment(self) -> np.ndarray:
        return np.arange(self.num_antennas) // self.block_size

    def check(self, analog: np.ndarray, tol: float = 1e-9) -> None:
        """Require the exact block-diagonal zero pattern with unit-modulus blocks."""
        if analog.shape != (self.num_antennas, self.num_chains):
            raise ValueError(f"analog shape {analog.shape} != "
                             f"{(self.num_antennas, self.num_chains)}")
        expected = self.assignment()
        for m in range(self.num_antennas):
            row = analog[m]
            outside = np.delete(row, expected[m])
            if np.any(outside != 0):
                raise ValueError(f"row {m} has nonzeros outside its block")
            if abs(abs(row[expected[m]]) - 1.0) > tol:
                raise ValueError(f"row {m} block entry is not unit modulus")


def pc_fit_analog(target: np.ndarray, digital: np.ndarray,
                  num_chains: int) -> tuple[np.ndarray, "SubarrayMap"]:
    """Per-element optimal phases on the fixed block-diagonal support.

    Minimizes ||target - analog @ digital||_F over the phases only; the
    phase of element (m, n) is the argument of target(m,:) digital(n,:)^H,
    zero by convention when that product vanishes.
    """
    from .pdd import SubarrayMap

    structure = PcStructure(target.shape[0], num_chains)
    assign = structure.assignment()
    analog = np.zeros((target.shape[0], num_chains), dtype=complex)
    for m in range(target.shape[0]):
        n = assign[m]
        c = target[m] @ digital[n].conj()
        phase = float(np.angle(c)) if c != 0 else 0.0
        analog[m, n] = np.exp(1j * phase)
    return analog, SubarrayMap(assignment=assign, num_chains=num_chains)


def ridge_norm(evals: np.ndarray, row_sq: np.ndarray, lam: float) -> float:
    """Squared norm of the ridge solution at regularizer lam."""
    return float(np.sum(row_sq / (evals + lam) ** 2))


def ridge_ls_with_norm(
    gram: np.ndarray,
    rhs: np.ndarray,
    target_norm_sq: float,
    *,
    lam_tol: float = 1e-10,
    norm_rtol: float = 1e-8,
    max_iter: int = 300,
) -> tuple[np.ndarray, float, str]:
    """Solve min ||rhs - gram^(1/2)...|| style ridge system with a norm equality.

    Returns the matrix (gram + lam I)^{-1} rhs whose squared Frobenius norm
    equals `target_norm_sq`, the multiplier lam (which may be negative but
    stays above -lambda_min(gram)), and a flag: "ok", "zero_rhs", or
    "norm_unreachable". The squared norm is strictly decreasing in lam, so a
    bisection on a bracketing interval suffices.
    """
    if target_norm_sq <= 0:
        raise ValueError("target_norm_sq must be > 0")
    gram = 0.5 * (gram + gram.conj().T)
    evals, vecs = np.linalg.eigh(gram)
    B = vecs.conj().T @ rhs
    row_sq = np.sum(np.abs(B) ** 2, axis=1)
    if not np.any(row_sq > 0):
        return np.zeros_like(rhs), 0.0, "zero_rhs"

    lam_min = float(evals[0])
    scale = max(1.0, float(abs(evals).max()))
    lo = -lam_min + 1e-12 * scale
    if ridge_norm(evals, row_sq, lo) < target_norm_sq:
        # the norm cannot reach the sphere even at the PD boundary; return the
        # boundary solution scaled onto it
        sol = vecs @ (B / (evals + lo)[:, None])
        sol *= math.sqrt(target_norm_sq) / np.linalg.norm(sol)
        return sol, lo, "norm_unreachable"

    hi = max(lo + scale, 1.0)
    while ridge_norm(evals, row_sq, hi) > target_norm_sq:
        hi = 2.0 * hi + scale

    lam = 0.5 * (lo + hi)
    for _ in range(max_iter):
        lam = 0.5 * (lo + hi)
        val = ridge_norm(evals, row_sq, lam)
        if abs(val - target_norm_sq) <= norm_rtol * target_norm_sq:
            break
        if val > target_norm_sq:
            lo = lam
        else:
            hi = lam
        if hi - lo <= lam_tol * max(1.0, abs(lam)):
            break
    sol = vecs @ (B / (evals + lam)[:, None])
    return sol, float(lam), "ok"


def pc_digital_stage(analog: np.ndarray, target: np.ndarray,
                     target_norm_sq: float) -> tuple[np.ndarray, float, str]:
    """Digital stage under the block-diagonal analog wiring with an exact
    power equality on the digital matrix."""
    gram = analog.conj().T @ analog
    rhs = analog.conj().T @ target
    return ridge_ls_with_norm(gram, rhs, target_norm_sq)


def pc_solve(cfg, channels, scene, gamma, **kwargs):
    """Full design under the block-diagonal architecture."""
    from .pdd import solve

    return solve(cfg, channels, scene, gamma, arch="PC", **kwargs)
