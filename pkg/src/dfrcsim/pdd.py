# Penalty-dual-decomposition optimizer for the joint communication/sensing
# beamforming design, with switched-subarray (RS), block-diagonal (PC), and
# fully digital (FD) transceiver modes.
#
# The inner loop is a block-coordinate sweep over: equivalent receive filter,
# equivalent per-user precoders (one convex cone program per successive-
# convex-approximation round), user combiners, MMSE weights, analog stages,
# digital stages. The outer loop runs the dual/penalty schedule on the
# factorization constraints until the splitting violation falls below
# tolerance.

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .conic import SocConstraint, SocpProblem, solve_socp
from .metrics import (
    BeamformerSet,
    clutter_noise_covariance,
    scnr_vectorized,
    stack_columns,
    stacked_clutter_noise_covariance,
    sum_rate,
    unstack_columns,
)
from .model import ChannelSet, RadarScene, SystemConfig, response_matrix


class GammaInfeasibleError(RuntimeError):
    """The sensing constraint cannot be met within the power budget."""

    def __init__(self, best: float, gamma: float):
        super().__init__(f"sensing constraint infeasible: best achievable "
                         f"{best:.6g} < required {gamma:.6g}")
        self.best = best
        self.gamma = gamma


class SolverFailureError(RuntimeError):
    """The cone-program backend returned a non-optimal status."""

    def __init__(self, status: str, raw_status: str):
        super().__init__(f"cone solver failed with status {status!r} ({raw_status})")
        self.status = status
        self.raw_status = raw_status


@dataclass
class PddState:
    """Penalty parameter, dual matrices, and loop tolerances of one solve."""

    rho: float
    D: list[np.ndarray]          # per-user duals, each (M_T, d_s)
    D_tilde: np.ndarray          # receive-side dual, (M_R, N_s)
    eta: float = math.inf        # violation threshold; inf makes the first
                                 # outer step a dual update
    shrink: float = 0.6          # penalty reduction factor
    inner_tol: float = 1e-4
    outer_tol: float = 1e-4
    max_inner: int = 30

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")
        if not (0.0 < self.shrink < 1.0):
            raise ValueError("shrink must lie in (0, 1)")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")


@dataclass(frozen=True)
class SubarrayMap:
    """Antenna-to-RF-chain assignment; every antenna feeds exactly one chain."""

    assignment: np.ndarray
    num_chains: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        object.__setattr__(self, "assignment", a)
        a.setflags(write=False)
        if a.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        if a.size and (a.min() < 0 or a.max() >= self.num_chains):
            raise ValueError("chain index out of range")

    def subsets(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == n) for n in range(self.num_chains)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_chains)

    @property
    def num_empty(self) -> int:
        return int(np.sum(self.sizes() == 0))


@dataclass
class OuterRecord:
    rho: float
    h: float
    objective: float
    sum_rate: float
    scnr: float
    inner_sweeps: int
    sweep_objectives: list[float] = field(default_factory=list)


@dataclass
class SolveResult:
    beamformers: BeamformerSet
    converged: bool
    status: str                  # converged | max_outer | infeasible_gamma
    trace: list[OuterRecord]
    sum_rate: float
    scnr_constraint: float       # sensing quadratic at the physical precoders
    scnr_stacked: float          # stacked-form SCNR with the matched MVDR filter
    outer_iterations: int
    diagnostics: dict


# ---------------------------------------------------------------------------
# Complex-to-real lifting (interleaved re/im layout)
# ---------------------------------------------------------------------------

def lift_vector(v: np.ndarray) -> np.ndarray:
    out = np.empty(2 * v.size)
    out[0::2] = v.real
    out[1::2] = v.imag
    return out


def unlift_vector(x: np.ndarray) -> np.ndarray:
    return x[0::2] + 1j * x[1::2]


def lift_matrix(M: np.ndarray) -> np.ndarray:
    r, n = M.shape
    out = np.zeros((2 * r, 2 * n))
    out[0::2, 0::2] = M.real
    out[0::2, 1::2] = -M.imag
    out[1::2, 0::2] = M.imag
    out[1::2, 1::2] = M.real
    return out


# ---------------------------------------------------------------------------
# Closed-form block updates
# ---------------------------------------------------------------------------

def _h_list(channels) -> list[np.ndarray]:
    return list(channels.H) if isinstance(channels, ChannelSet) else list(channels)


def mvdr_receive_filter(t: np.ndarray, scene: RadarScene, cfg: SystemConfig) -> np.ndarray:
    """Distortionless stacked receive filter maximizing the stacked SCNR."""
    t = np.asarray(t)
    if not np.any(t):
        raise ValueError("transmit vector is zero; receive filter undefined")
    T = unstack_columns(t, cfg.M_T)
    a0t = stack_columns(response_matrix(scene.theta_0, cfg) @ T)
    cov = stacked_clutter_noise_covariance(t, scene, cfg)
    y = np.linalg.solve(cov, a0t)
    denom = np.real(np.vdot(a0t, y))
    return y / denom


def sensing_gain_matrix(t_prev: np.ndarray, scene: RadarScene, cfg: SystemConfig) -> np.ndarray:
    """Quadratic-form matrix of the post-MVDR sensing gain, (M_T, M_T), PSD.

    The clutter-plus-noise covariance is rebuilt from the supplied previous
    iterate, making the matrix iterate-dependent.
    """
    T = unstack_columns(np.asarray(t_prev), cfg.M_T)
    cov = clutter_noise_covariance(T, scene, cfg)
    A0 = response_matrix(scene.theta_0, cfg)
    X = np.linalg.solve(cov, A0)
    phi = scene.sigma0_sq * (A0.conj().T @ X)
    return 0.5 * (phi + phi.conj().T)


def sensing_quadratic(T_list: Sequence[np.ndarray], phi: np.ndarray) -> float:
    """sum_k tr(T_k^H Phi T_k), the constrained sensing quantity."""
    return float(sum(np.trace(Tk.conj().T @ phi @ Tk).real for Tk in T_list))


def mmse_combiners(channels, T_list: Sequence[np.ndarray], cfg: SystemConfig,
                   sigma2: float | None = None) -> list[np.ndarray]:
    """Per-user MMSE receive combiners for the given equivalent precoders."""
    H = _h_list(channels)
    s2 = cfg.sigma2_user if sigma2 is None else sigma2
    out = []
    for k in range(cfg.K):
        Hk = H[k]
        J = s2 * np.eye(Hk.shape[0], dtype=complex)
        for Ti in T_list:
            HT = Hk @ Ti
            J += HT @ HT.conj().T
        out.append(np.linalg.solve(J, Hk @ T_list[k]))
    return out


def mse_weights(channels, T_list: Sequence[np.ndarray],
                U: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Weighting matrices G_k = (I - U_k^H H_k T_k)^{-1}.

    Raises LinAlgError when the residual MSE matrix is singular.
    """
    H = _h_list(channels)
    out = []
    for k, (Hk, Uk, Tk) in enumerate(zip(H, U, T_list)):
        E = np.eye(Tk.shape[1], dtype=complex) - Uk.conj().T @ Hk @ Tk
        try:
            out.append(np.linalg.inv(E))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"singular MSE matrix for user {k}") from exc
    return out


def fit_switched_analog(target: np.ndarray, digital: np.ndarray) -> tuple[np.ndarray, SubarrayMap]:
    """Best switched-subarray analog stage for ||target - analog @ digital||_F.

    Each antenna row independently picks the chain and phase minimizing its
    residual; with one unit-modulus entry per row the row-wise choice is the
    global minimizer. Ties go to the lowest chain index; antennas with an
    all-zero target row go to the currently smallest subarray.
    """
    M = target.shape[0]
    n_chains = digital.shape[0]
    cross = target @ digital.conj().T                    # (M, n_chains)
    dig_norm = np.sum(np.abs(digital) ** 2, axis=1)      # per-chain row energy
    score = 2.0 * np.abs(cross) - dig_norm[None, :]
    row_zero = ~np.any(target, axis=1)

    analog = np.zeros((M, n_chains), dtype=complex)
    assign = np.zeros(M, dtype=int)
    counts = np.zeros(n_chains, dtype=int)
    for m in range(M):
        if row_zero[m]:
            n = int(np.argmin(counts))
            phase = 0.0
        else:
            n = int(np.argmax(score[m]))
            c = cross[m, n]
            phase = float(np.angle(c)) if c != 0 else 0.0
        analog[m, n] = np.exp(1j * phase)
        assign[m] = n
        counts[n] += 1
    return analog, SubarrayMap(assignment=assign, num_chains=n_chains)


def ls_digital_stage(analog: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Least-squares digital stage: pinv(analog) @ target.

    Switched and block-diagonal analog stages have disjoint column supports,
    so the Gram matrix is diagonal and the pseudo-inverse reduces to per-chain
    averaging; empty (all-zero) chains yield zero rows.
    """
    gram = analog.conj().T @ analog
    diag = np.abs(np.diag(gram))
    off = gram - np.diag(np.diag(gram))
    if np.max(np.abs(off), initial=0.0) <= 1e-12 * max(1.0, float(diag.max())):
        out = np.zeros((analog.shape[1], target.shape[1]), dtype=complex)
        nz = diag > 1e-300
        out[nz] = (analog[:, nz].conj().T @ target) / diag[nz, None]
        return out
    return np.linalg.lstsq(analog, target, rcond=None)[0]


def constraint_violation(bf: BeamformerSet, cfg: SystemConfig) -> float:
    """Largest Frobenius gap between the auxiliaries and their factorizations."""
    h = 0.0
    for k in range(cfg.K):
        h = max(h, float(np.linalg.norm(bf.T_aux[k] - bf.tx_effective(k, cfg))))
    h = max(h, float(np.linalg.norm(bf.W_aux - bf.W_RF @ bf.W_D)))
    return h


def outer_update(state: PddState, bf: BeamformerSet, cfg: SystemConfig) -> PddState:
    """One dual/penalty step: duals move when the violation is under the
    threshold, otherwise the penalty parameter shrinks; either way the
    threshold becomes 0.8x the current violation."""
    h = constraint_violation(bf, cfg)
    if h <= state.eta:
        D = [state.D[k] + (bf.T_aux[k] - bf.tx_effective(k, cfg)) / state.rho
             for k in range(cfg.K)]
        D_tilde = state.D_tilde + (bf.W_aux - bf.W_RF @ bf.W_D) / state.rho
        rho = state.rho
    else:
        D = [d.copy() for d in state.D]
        D_tilde = state.D_tilde.copy()
        rho = state.shrink * state.rho
    return replace(state, rho=rho, D=D, D_tilde=D_tilde, eta=0.8 * h)


# ---------------------------------------------------------------------------
# Equivalent-precoder step (cone program with successive convex approximation)
# ---------------------------------------------------------------------------

def update_precoders(
    channels,
    U: Sequence[np.ndarray],
    G: Sequence[np.ndarray],
    phi: np.ndarray,
    gamma: float | None,
    cfg: SystemConfig,
    *,
    rho: float | None = None,
    anchors: Sequence[np.ndarray] | None = None,
    t_init: Sequence[np.ndarray],
    sigma2: float | None = None,
    sca_max_rounds: int = 10,
    sca_rtol: float = 1e-5,
    socp_tol: float = 1e-7,
    bootstrap_max: int = 5,
) -> tuple[list[np.ndarray], dict]:
    """Solve the convexified equivalent-precoder subproblem.

    Minimizes the weighted-MSE part of the penalized objective plus (when
    `rho` is given) the proximity term pulling each precoder toward its
    anchor, subject to the power ball and (when `gamma` is given) the
    linearized sensing constraint, iterating the linearization point.
    Raises GammaInfeasibleError when no feasible expansion point exists and
    SolverFailureError on backend failure.
    """
    if (rho is None) != (anchors is None):
        raise ValueError("rho and anchors must be given together")
    H = _h_list(channels)
    K, M_T, d_s = cfg.K, cfg.M_T, cfg.d_s
    blk = M_T * d_s          # complex length of one user's precoder
    n_t = 2 * blk * K
    n_a = K * K
    with_pen = rho is not None
    n = n_t + n_a + (K if with_pen else 0)

    def t_cols(k: int) -> slice:
        return slice(2 * blk * k, 2 * blk * (k + 1))

    # objective
    c = np.zeros(n)
    for k in range(K):
        r_k = stack_columns(H[k].conj().T @ U[k] @ G[k])
        c[t_cols(k)] = -2.0 * lift_vector(r_k)
    c[n_t:n_t + n_a] = 1.0
    if with_pen:
        c[n_t + n_a:] = 1.0 / (2.0 * rho)

    # static cones: power ball, interference epigraphs, proximity epigraphs
    cones_static: list[SocConstraint] = []
    A_pow = np.zeros((n_t, n))
    A_pow[:, :n_t] = np.eye(n_t)
    cones_static.append(SocConstraint(A=A_pow, b=np.zeros(n_t), c=np.zeros(n),
                                      d=math.sqrt(cfg.P_T)))

    eye_ds = np.eye(d_s)
    for k in range(K):
        P_k = H[k].conj().T @ U[k] @ G[k] @ U[k].conj().T @ H[k]
        P_k = 0.5 * (P_k + P_k.conj().T)
        evals, vecs = np.linalg.eigh(P_k)
        root = (vecs * np.sqrt(np.clip(evals, 0.0, None))) @ vecs.conj().T
        S_k = lift_matrix(np.kron(eye_ds, root))
        for i in range(K):
            a_idx = n_t + k * K + i
            A = np.zeros((2 * blk + 1, n))
            A[:2 * blk, t_cols(i)] = S_k
            A[2 * blk, a_idx] = 0.5
            b = np.zeros(2 * blk + 1)
            b[-1] = -0.5
            cvec = np.zeros(n)
            cvec[a_idx] = 0.5
            cones_static.append(SocConstraint(A=A, b=b, c=cvec, d=0.5))

    if with_pen:
        for k in range(K):
            b_idx = n_t + n_a + k
            A = np.zeros((2 * blk + 1, n))
            A[:2 * blk, t_cols(k)] = np.eye(2 * blk)
            A[2 * blk, b_idx] = 0.5
            b = np.zeros(2 * blk + 1)
            b[:2 * blk] = -lift_vector(stack_columns(anchors[k]))
            b[-1] = -0.5
            cvec = np.zeros(n)
            cvec[b_idx] = 0.5
            cones_static.append(SocConstraint(A=A, b=b, c=cvec, d=0.5))

    def quad(T_list: Sequence[np.ndarray]) -> float:
        return sensing_quadratic(T_list, phi)

    # feasible expansion point for the sensing constraint
    T_bar = [np.array(t, dtype=complex) for t in t_init]
    info = {"bootstrap_rounds": 0, "sca_rounds": 0, "early_stop": False}
    if gamma is not None and quad(T_bar) < gamma:
        for _ in range(bootstrap_max):
            V = [phi @ Tk for Tk in T_bar]
            vnorm = math.sqrt(sum(np.linalg.norm(v) ** 2 for v in V))
            if vnorm <= 0:
                # current point is orthogonal to the gain matrix; restart the
                # ascent from its dominant eigenvector
                evals, vecs = np.linalg.eigh(phi)
                top = vecs[:, -1]
                V = [np.tile(top[:, None], (1, d_s)) for _ in range(K)]
                vnorm = math.sqrt(sum(np.linalg.norm(v) ** 2 for v in V))
            scale = math.sqrt(cfg.P_T) / vnorm
            T_bar = [scale * v for v in V]
            info["bootstrap_rounds"] += 1
            if quad(T_bar) >= gamma:
                break
        if quad(T_bar) < gamma:
            raise GammaInfeasibleError(best=quad(T_bar), gamma=gamma)

    T_cur = T_bar
    prev_obj = None
    for rnd in range(sca_max_rounds):
        cones = list(cones_static)
        if gamma is not None:
            cvec = np.zeros(n)
            const = 0.0
            for k in range(K):
                v_k = stack_columns(phi @ T_bar[k])
                cvec[t_cols(k)] = 2.0 * lift_vector(v_k)
                const += float(np.real(np.vdot(stack_columns(T_bar[k]), v_k)))
            cones.append(SocConstraint(A=np.zeros((0, n)), b=np.zeros(0),
                                       c=cvec, d=-(gamma + const)))
        problem = SocpProblem(objective=c, cones=tuple(cones))
        sol = solve_socp(problem, tol=socp_tol)
        if sol.status != "optimal":
            if rnd == 0:
                if sol.status == "infeasible":
                    raise GammaInfeasibleError(best=quad(T_bar), gamma=gamma or 0.0)
                raise SolverFailureError(sol.status, sol.raw_status)
            info["early_stop"] = True
            break
        t_cplx = unlift_vector(sol.x[:n_t])
        T_cur = [unstack_columns(t_cplx[blk * k: blk * (k + 1)], M_T) for k in range(K)]
        info["sca_rounds"] = rnd + 1
        if prev_obj is not None and abs(sol.objective_value - prev_obj) <= \
                sca_rtol * max(1.0, abs(prev_obj)):
            break
        prev_obj = sol.objective_value
        T_bar = T_cur

    info["constraint_value"] = quad(T_cur)
    return T_cur, info


# ---------------------------------------------------------------------------
# Objective bookkeeping
# ---------------------------------------------------------------------------

def weighted_mse_objective(channels, T_list: Sequence[np.ndarray],
                           U: Sequence[np.ndarray], G: Sequence[np.ndarray],
                           cfg: SystemConfig, sigma2: float | None = None) -> float:
    """sum_k Re tr(G_k E_k) - ln det G_k with the equivalent precoders."""
    H = _h_list(channels)
    s2 = cfg.sigma2_user if sigma2 is None else sigma2
    total = 0.0
    for k in range(cfg.K):
        Hk, Uk, Gk = H[k], U[k], G[k]
        cross = Uk.conj().T @ Hk @ T_list[k]
        E = np.eye(cfg.d_s, dtype=complex) - cross - cross.conj().T
        E += s2 * (Uk.conj().T @ Uk)
        for Ti in T_list:
            UHT = Uk.conj().T @ Hk @ Ti
            E += UHT @ UHT.conj().T
        total += float(np.trace(Gk @ E).real)
        total -= float(np.linalg.slogdet(Gk)[1])
    return total


def augmented_objective(channels, bf: BeamformerSet, G: Sequence[np.ndarray],
                        state: PddState | None, cfg: SystemConfig,
                        sigma2: float | None = None) -> float:
    """Penalized inner-loop objective; `state=None` drops the penalty terms."""
    total = weighted_mse_objective(channels, bf.T_aux, bf.U, G, cfg, sigma2)
    if state is not None:
        pen = 0.0
        for k in range(cfg.K):
            pen += np.linalg.norm(
                bf.T_aux[k] - bf.tx_effective(k, cfg) + state.rho * state.D[k]) ** 2
        pen += np.linalg.norm(
            bf.W_aux - bf.W_RF @ bf.W_D + state.rho * state.D_tilde) ** 2
        total += pen / (2.0 * state.rho)
    return float(total)


# ---------------------------------------------------------------------------
# Full solve
# ---------------------------------------------------------------------------

def _matched_filter_targets(H: Sequence[np.ndarray], cfg: SystemConfig) -> list[np.ndarray]:
    out = []
    for Hk in H:
        _, _, vh = np.linalg.svd(Hk)
        out.append(vh[:cfg.d_s].conj().T)  # (M_T, d_s) dominant right singular vecs
    return out


def _random_switched_analog(M: int, n_chains: int, rng: np.random.Generator) -> np.ndarray:
    analog = np.zeros((M, n_chains), dtype=complex)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=M)
    analog[np.arange(M), np.arange(M) % n_chains] = np.exp(1j * phases)
    return analog


def _block_diag_analog(M: int, n_chains: int, rng: np.random.Generator) -> np.ndarray:
    block = M // n_chains
    analog = np.zeros((M, n_chains), dtype=complex)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=M)
    analog[np.arange(M), np.arange(M) // block] = np.exp(1j * phases)
    return analog


def solve(
    cfg: SystemConfig,
    channels: ChannelSet,
    scene: RadarScene,
    gamma: float,
    arch: str = "RS",
    *,
    rng: np.random.Generator | int | None = 0,
    rho0: float = 1.0,
    shrink: float = 0.6,
    inner_tol: float = 1e-4,
    outer_tol: float = 1e-4,
    max_inner: int = 30,
    max_outer: int = 400,
    sca_max_rounds: int = 10,
    sca_rtol: float = 1e-5,
    socp_tol: float = 1e-8,
    reinit_attempts: int = 1,
    init_style: str = "round_robin",
    gamma_margin: float = 1e-3,
) -> SolveResult:
    """Run the double-loop beamforming design.

    `gamma` is the linear sensing-gain requirement. The solver targets
    `gamma * (1 + gamma_margin)` internally so the requirement still holds at
    the returned physical beamformers after the factorization residual and
    the iterate-dependent refresh of the sensing gain matrix. FD mode skips
    the analog/digital factorization blocks and the penalty terms, returning
    the equivalent precoders directly (the returned config-level analog
    stages are identities). `init_style` selects the initial
    switched-subarray wiring for RS ("round_robin" or "block"); see
    `solve_best` for the multi-start driver. Deterministic for a fixed `rng`
    seed and inputs.
    """
    if arch not in ("RS", "PC", "FD"):
        raise ValueError(f"arch must be RS, PC, or FD, got {arch!r}")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if arch == "PC" and (cfg.M_T % cfg.N_RF_t or cfg.M_R % cfg.N_RF_r):
        raise ValueError("PC architecture needs antenna counts divisible by RF chains")
    if init_style not in ("round_robin", "block"):
        raise ValueError(f"unknown init_style {init_style!r}")
    if init_style == "block" and (cfg.M_T % cfg.N_RF_t or cfg.M_R % cfg.N_RF_r):
        init_style = "round_robin"
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)

    runner = _Runner(cfg, channels, scene, gamma * (1.0 + gamma_margin), arch,
                     rng, rho0, shrink, inner_tol, outer_tol, max_inner,
                     max_outer, sca_max_rounds, sca_rtol, socp_tol, init_style)
    attempts = 0
    while True:
        try:
            return runner.run()
        except GammaInfeasibleError as exc:
            attempts += 1
            runner.diagnostics["reinits"] = attempts
            if attempts > reinit_attempts:
                return runner.infeasible_result(exc)


def solve_best(
    cfg: SystemConfig,
    channels: ChannelSet,
    scene: RadarScene,
    gamma: float,
    arch: str = "RS",
    *,
    rng: np.random.Generator | int | None = 0,
    n_starts: int = 1,
    **kwargs,
) -> SolveResult:
    """Multi-start driver: run `solve` from `n_starts` initializations and keep
    the converged run with the highest sum-rate.

    For the RS architecture the second start uses the block wiring (the PC
    layout is a feasible RS point, so its basin becomes reachable); remaining
    starts redraw the random phases. Falls back to the first result when no
    start converges.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    streams = rng.spawn(n_starts)
    best = None
    first = None
    for j, sub in enumerate(streams):
        style = "block" if (arch == "RS" and j == 1) else "round_robin"
        result = solve(cfg, channels, scene, gamma, arch, rng=sub,
                       init_style=style, **kwargs)
        if first is None:
            first = result
        if result.converged and (best is None or result.sum_rate > best.sum_rate):
            best = result
    return best if best is not None else first


class _Runner:
    """One solve attempt; separated out so reinitialization can retry cleanly."""

    def __init__(self, cfg, channels, scene, gamma, arch, rng, rho0, shrink,
                 inner_tol, outer_tol, max_inner, max_outer,
                 sca_max_rounds, sca_rtol, socp_tol, init_style="round_robin"):
        self.init_style = init_style
        self.cfg = cfg
        self.channels = channels
        self.scene = scene
        self.gamma = gamma
        self.arch = arch
        self.fd = arch == "FD"
        self.rng = rng
        self.rho0 = rho0
        self.shrink = shrink
        self.inner_tol = inner_tol
        self.outer_tol = outer_tol
        self.max_inner = max_inner
        self.max_outer = max_outer
        self.sca_max_rounds = sca_max_rounds
        self.sca_rtol = sca_rtol
        self.socp_tol = socp_tol
        self.out_cfg = cfg if not self.fd else replace(cfg, N_RF_t=cfg.M_T,
                                                       N_RF_r=cfg.M_R)

        # Channel pre-scaling: path loss makes raw entries ~1e-7; scaling H and
        # the noise power together leaves rates, weights, and the precoder
        # subproblem invariant while conditioning the cone programs.
        self.H_raw = list(channels.H)
        c2 = np.mean([np.linalg.norm(h) ** 2 for h in self.H_raw]) / (cfg.M_T * cfg.M_U)
        if c2 <= 0 or not math.isfinite(c2):
            raise ValueError("degenerate channel set (zero or non-finite energy)")
        self.c_scale = math.sqrt(c2)
        self.H = [h / self.c_scale for h in self.H_raw]
        self.sigma2 = cfg.sigma2_user / c2
        self.diagnostics = {"empty_subarrays": 0, "socp_rounds": 0, "reinits": 0,
                            "channel_scale": self.c_scale}

    # -- initialization ----------------------------------------------------

    def initialize(self):
        cfg, rng = self.cfg, self.rng
        targets = _matched_filter_targets(self.H, cfg)
        X = np.hstack(targets)
        if self.fd:
            T_RF = np.eye(cfg.M_T, dtype=complex)
            T_D = X * (math.sqrt(cfg.P_T) / np.linalg.norm(X))
            W_RF = np.eye(cfg.M_R, dtype=complex)
        elif self.arch == "RS":
            make = (_block_diag_analog if self.init_style == "block"
                    else _random_switched_analog)
            T_RF = make(cfg.M_T, cfg.N_RF_t, rng)
            T_D = ls_digital_stage(T_RF, X)
            s = np.linalg.norm(T_RF @ T_D)
            if s < 1e-12:
                T_D = rng.standard_normal(T_D.shape) + 1j * rng.standard_normal(T_D.shape)
                s = np.linalg.norm(T_RF @ T_D)
            T_D = T_D * (math.sqrt(cfg.P_T) / s)
            W_RF = make(cfg.M_R, cfg.N_RF_r, rng)
        else:  # PC
            T_RF = _block_diag_analog(cfg.M_T, cfg.N_RF_t, rng)
            T_D = ls_digital_stage(T_RF, X)
            if np.linalg.norm(T_D) < 1e-12:
                T_D = rng.standard_normal(T_D.shape) + 1j * rng.standard_normal(T_D.shape)
            T_D = T_D * (math.sqrt(cfg.N_RF_t * cfg.P_T / cfg.M_T) / np.linalg.norm(T_D))
            W_RF = _block_diag_analog(cfg.M_R, cfg.N_RF_r, rng)
        T_list = [T_RF @ T_D[:, k * cfg.d_s:(k + 1) * cfg.d_s] for k in range(cfg.K)]
        W_aux = unstack_columns(
            mvdr_receive_filter(stack_columns(np.hstack(T_list)), self.scene, cfg),
            cfg.M_R)
        W_D = ls_digital_stage(W_RF, W_aux)
        U = mmse_combiners(self.H, T_list, cfg, self.sigma2)
        G = mse_weights(self.H, T_list, U)
        return T_list, W_aux, U, G, T_RF, T_D, W_RF, W_D

    def _bf(self, T_list, W_aux, U, T_RF, T_D, W_RF, W_D) -> BeamformerSet:
        cfg = self.cfg
        if self.fd:
            T_RF = np.eye(cfg.M_T, dtype=complex)
            T_D = np.hstack(T_list)
            W_RF = np.eye(cfg.M_R, dtype=complex)
            W_D = W_aux
        return BeamformerSet(T_RF=T_RF, T_D=T_D, U=tuple(U), W_RF=W_RF, W_D=W_D,
                             T_aux=tuple(np.array(t) for t in T_list), W_aux=W_aux)

    def infeasible_result(self, exc: GammaInfeasibleError) -> SolveResult:
        T_list, W_aux, U, G, T_RF, T_D, W_RF, W_D = self.initialize()
        bf = self._bf(T_list, W_aux, U, T_RF, T_D, W_RF, W_D)
        return SolveResult(
            beamformers=bf, converged=False, status="infeasible_gamma",
            trace=[], sum_rate=float("nan"), scnr_constraint=exc.best,
            scnr_stacked=float("nan"), outer_iterations=0,
            diagnostics=self.diagnostics)

    # -- main loop ----------------------------------------------------------

    def run(self) -> SolveResult:
        cfg, scene, gamma = self.cfg, self.scene, self.gamma
        fd = self.fd
        T_list, W_aux, U, G, T_RF, T_D, W_RF, W_D = self.initialize()
        state = PddState(
            rho=self.rho0,
            D=[np.zeros((cfg.M_T, cfg.d_s), dtype=complex) for _ in range(cfg.K)],
            D_tilde=np.zeros((cfg.M_R, cfg.N_s), dtype=complex),
            shrink=self.shrink, inner_tol=self.inner_tol,
            outer_tol=self.outer_tol, max_inner=self.max_inner)

        def tx_blocks():
            return [T_RF @ T_D[:, k * cfg.d_s:(k + 1) * cfg.d_s] for k in range(cfg.K)]

        def objective():
            total = weighted_mse_objective(self.H, T_list, U, G, cfg, self.sigma2)
            if not fd:
                pen = 0.0
                prods = tx_blocks()
                for k in range(cfg.K):
                    pen += np.linalg.norm(T_list[k] - prods[k] + state.rho * state.D[k]) ** 2
                pen += np.linalg.norm(W_aux - W_RF @ W_D + state.rho * state.D_tilde) ** 2
                total += pen / (2.0 * state.rho)
            return total

        trace: list[OuterRecord] = []
        status, converged = "max_outer", False
        last_quad = float("nan")

        for _outer in range(self.max_outer):
            sweep_objs: list[float] = []
            prev_obj = None
            # sensing quadratic rebuilt from the current physical precoders
            # once per outer iteration; holding it fixed across the inner
            # sweeps keeps the feasible set fixed, so every block update is a
            # true descent step of the penalized objective
            phi_src = stack_columns(np.hstack(T_list)) if fd \
                else stack_columns(T_RF @ T_D)
            phi = sensing_gain_matrix(phi_src, scene, cfg)
            for _sweep in range(self.max_inner):
                # receive-filter block: MVDR direction with the free complex
                # scale set to minimize the splitting penalty; since this is
                # the one block that is not a descent step of the penalized
                # objective, the move is kept only when it does not worsen
                # the penalty term
                t_stack = stack_columns(np.hstack(T_list))
                w = mvdr_receive_filter(t_stack, scene, cfg)
                W_new = unstack_columns(w, cfg.M_R)
                if not fd:
                    B = W_RF @ W_D - state.rho * state.D_tilde
                    scale = np.vdot(W_new, B) / (np.linalg.norm(W_new) ** 2)
                    if np.isfinite(scale) and abs(scale) > 1e-14:
                        W_new = scale * W_new
                    if np.linalg.norm(W_new - B) > np.linalg.norm(W_aux - B):
                        W_new = W_aux
                W_aux = W_new

                anchors = None if fd else [prod - state.rho * state.D[k]
                                           for k, prod in enumerate(tx_blocks())]
                T_list, info = update_precoders(
                    self.H, U, G, phi, gamma, cfg,
                    rho=None if fd else state.rho, anchors=anchors, t_init=T_list,
                    sigma2=self.sigma2, sca_max_rounds=self.sca_max_rounds,
                    sca_rtol=self.sca_rtol, socp_tol=self.socp_tol)
                self.diagnostics["socp_rounds"] += info["sca_rounds"]
                last_quad = info["constraint_value"]

                U = mmse_combiners(self.H, T_list, cfg, self.sigma2)
                G = mse_weights(self.H, T_list, U)

                if not fd:
                    from .pc import pc_fit_analog, ridge_ls_with_norm

                    Z = np.hstack([T_list[k] + state.rho * state.D[k]
                                   for k in range(cfg.K)])
                    Q = W_aux + state.rho * state.D_tilde
                    if self.arch == "RS":
                        T_RF, tx_map = fit_switched_analog(Z, T_D)
                        W_RF, rx_map = fit_switched_analog(Q, W_D)
                        T_D = ls_digital_stage(T_RF, Z)
                        W_D = ls_digital_stage(W_RF, Q)
                    else:  # PC
                        T_RF, tx_map = pc_fit_analog(Z, T_D, cfg.N_RF_t)
                        W_RF, rx_map = pc_fit_analog(Q, W_D, cfg.N_RF_r)
                        T_D, _, _ = ridge_ls_with_norm(
                            T_RF.conj().T @ T_RF, T_RF.conj().T @ Z,
                            cfg.N_RF_t * cfg.P_T / cfg.M_T)
                        W_D = ls_digital_stage(W_RF, Q)
                    self.diagnostics["empty_subarrays"] += tx_map.num_empty + rx_map.num_empty

                obj = objective()
                sweep_objs.append(obj)
                if prev_obj is not None and \
                        abs(obj - prev_obj) <= self.inner_tol * max(1.0, abs(prev_obj)):
                    break
                prev_obj = obj

            bf = self._bf(T_list, W_aux, U, T_RF, T_D, W_RF, W_D)
            h = 0.0 if fd else constraint_violation(bf, cfg)
            rate = float(sum(np.linalg.slogdet(Gk)[1] for Gk in G)) / math.log(2.0)
            trace.append(OuterRecord(rho=state.rho, h=h, objective=sweep_objs[-1],
                                     sum_rate=rate, scnr=last_quad,
                                     inner_sweeps=len(sweep_objs),
                                     sweep_objectives=sweep_objs))
            if fd:
                status, converged = "converged", True
                break
            state = outer_update(state, bf, cfg)
            if h < self.outer_tol:
                status, converged = "converged", True
                break

        # finalize: hard power projection, combiners re-fit on raw channels
        if fd:
            t_norm = math.sqrt(sum(np.linalg.norm(t) ** 2 for t in T_list))
            if t_norm > math.sqrt(cfg.P_T):
                T_list = [t * (math.sqrt(cfg.P_T) / t_norm) for t in T_list]
            prods = list(T_list)
        else:
            power = np.linalg.norm(T_RF @ T_D)
            if power > math.sqrt(cfg.P_T):
                T_D = T_D * (math.sqrt(cfg.P_T) / power)
            prods = [T_RF @ T_D[:, k * cfg.d_s:(k + 1) * cfg.d_s] for k in range(cfg.K)]
        U_final = mmse_combiners(self.H_raw, prods, cfg)
        bf = self._bf(T_list, W_aux, U_final, T_RF, T_D, W_RF, W_D)

        t_phys = stack_columns(np.hstack(prods))
        phi_final = sensing_gain_matrix(t_phys, scene, cfg)
        scnr_constraint = sensing_quadratic(prods, phi_final)
        scnr_stacked = scnr_vectorized(
            t_phys, mvdr_receive_filter(t_phys, scene, cfg), scene, cfg)
        rate_final = sum_rate(self.channels, bf, self.out_cfg)

        return SolveResult(
            beamformers=bf, converged=converged, status=status, trace=trace,
            sum_rate=rate_final, scnr_constraint=scnr_constraint,
            scnr_stacked=scnr_stacked, outer_iterations=len(trace),
            diagnostics=self.diagnostics)
