"""Hybrid beamforming design and evaluation for mmWave dual-function
radar-communication systems: channel and radar models, a penalty-dual-
decomposition optimizer for switched-subarray / block-diagonal / fully
digital transceivers, and a Monte-Carlo experiment harness."""

from .model import (
    ChannelSet,
    PathLossModel,
    RadarScene,
    SystemConfig,
    generate_channel,
    path_loss_db,
    response_matrix,
    steering_vector,
)
from .metrics import (
    BeamformerSet,
    PowerModel,
    beampattern,
    detection_probability,
    energy_efficiency,
    marcum_q1,
    mse_matrix,
    scnr_full,
    scnr_vectorized,
    sum_rate,
    total_power,
)
from .conic import SocConstraint, SocpProblem, SocpSolution, solve_socp
from .pdd import (
    GammaInfeasibleError,
    PddState,
    SolveResult,
    SolverFailureError,
    SubarrayMap,
    constraint_violation,
    fit_switched_analog,
    ls_digital_stage,
    mmse_combiners,
    mse_weights,
    mvdr_receive_filter,
    outer_update,
    sensing_gain_matrix,
    sensing_quadratic,
    solve,
    update_precoders,
)
from .pc import PcStructure, pc_digital_stage, pc_fit_analog, pc_solve, ridge_ls_with_norm

__version__ = "0.1.0"

__all__ = [
    "BeamformerSet", "ChannelSet", "GammaInfeasibleError", "PathLossModel",
    "PcStructure", "PddState", "PowerModel", "RadarScene", "SocConstraint",
    "SocpProblem", "SocpSolution", "SolveResult", "SolverFailureError",
    "SubarrayMap", "SystemConfig", "beampattern", "constraint_violation",
    "detection_probability", "energy_efficiency", "fit_switched_analog",
    "generate_channel", "ls_digital_stage", "marcum_q1", "mmse_combiners",
    "mse_matrix", "mse_weights", "mvdr_receive_filter", "outer_update",
    "path_loss_db", "pc_digital_stage", "pc_fit_analog", "pc_solve",
    "response_matrix", "ridge_ls_with_norm", "scnr_full", "scnr_vectorized",
    "sensing_gain_matrix", "sensing_quadratic", "solve", "solve_socp",
    "steering_vector", "sum_rate", "total_power", "update_precoders",
    "__version__",
]
