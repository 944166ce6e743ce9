# Backend-neutral second-order cone program carrier and solver entry point.
#
# Complex-valued modelling upstream is lifted to reals before it reaches this
# module: every complex scalar becomes an interleaved (re, im) pair, and a
# complex vector norm becomes one SOC over the interleaved reals.

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

import clarabel

DEFAULT_TOL = 1e-7

_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
    "MaxIterations": "max_iters",
    "MaxTime": "max_iters",
    "NumericalError": "max_iters",
    "InsufficientProgress": "max_iters",
}


@dataclass(frozen=True)
class SocConstraint:
    """||A x + b|| <= c . x + d.

    A with zero rows degenerates to the affine inequality 0 <= c . x + d.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float

    def violation(self, x: np.ndarray) -> float:
        lhs = np.linalg.norm(self.A @ x + self.b) if self.A.shape[0] else 0.0
        return float(lhs - (self.c @ x + self.d))


@dataclass(frozen=True)
class SocpProblem:
    """min objective . x over SOC, equality, and nonnegativity constraints."""

    objective: np.ndarray
    cones: tuple[SocConstraint, ...]
    eq_A: np.ndarray | None = None
    eq_b: np.ndarray | None = None
    nonneg: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        n = len(self.objective)
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective must be finite")
        for cone in self.cones:
            if cone.A.shape[0] and cone.A.shape[1] != n:
                raise ValueError("cone matrix width inconsistent with objective")
            if len(cone.c) != n or len(cone.b) != cone.A.shape[0]:
                raise ValueError("cone constraint dimensions inconsistent")
        if (self.eq_A is None) != (self.eq_b is None):
            raise ValueError("equality matrix and rhs must be given together")
        if self.eq_A is not None and (self.eq_A.shape[1] != n or
                                      self.eq_A.shape[0] != len(self.eq_b)):
            raise ValueError("equality constraint dimensions inconsistent")
        if any(i < 0 or i >= n for i in self.nonneg):
            raise ValueError("nonnegativity index out of range")

    @property
    def num_vars(self) -> int:
        return len(self.objective)


@dataclass(frozen=True)
class SocpSolution:
    x: np.ndarray
    status: str          # optimal | infeasible | unbounded | max_iters
    objective_value: float
    raw_status: str
    iterations: int


def solve_socp(problem: SocpProblem, tol: float = DEFAULT_TOL) -> SocpSolution:
    """Solve the cone program with an interior-point backend.

    Infeasible and unbounded problems are reported through the status field,
    never raised.
    """
    n = problem.num_vars
    blocks, rhs, cones = [], [], []

    if problem.eq_A is not None and problem.eq_A.shape[0]:
        blocks.append(sparse.csc_matrix(problem.eq_A))
        rhs.append(np.asarray(problem.eq_b, dtype=float))
        cones.append(clarabel.ZeroConeT(problem.eq_A.shape[0]))

    lin_rows, lin_rhs = [], []
    for i in problem.nonneg:
        row = np.zeros(n)
        row[i] = -1.0
        lin_rows.append(row)
        lin_rhs.append(0.0)
    for cone in problem.cones:
        if cone.A.shape[0] == 0:  # affine inequality: -c.x <= d
            lin_rows.append(-cone.c)
            lin_rhs.append(cone.d)
    if lin_rows:
        blocks.append(sparse.csc_matrix(np.array(lin_rows)))
        rhs.append(np.array(lin_rhs))
        cones.append(clarabel.NonnegativeConeT(len(lin_rows)))

    for cone in problem.cones:
        if cone.A.shape[0] == 0:
            continue
        # s = [c.x + d; A x + b] in the SOC, via b_clarabel - A_clarabel x = s
        mat = np.vstack([-cone.c[None, :], -cone.A])
        blocks.append(sparse.csc_matrix(mat))
        rhs.append(np.concatenate([[cone.d], cone.b]))
        cones.append(clarabel.SecondOrderConeT(cone.A.shape[0] + 1))

    A = sparse.vstack(blocks, format="csc") if blocks else sparse.csc_matrix((0, n))
    b = np.concatenate(rhs) if rhs else np.zeros(0)

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_rel = tol
    settings.tol_gap_abs = tol
    settings.tol_feas = min(tol, 1e-8)

    solver = clarabel.DefaultSolver(
        sparse.csc_matrix((n, n)), np.asarray(problem.objective, dtype=float),
        A, b, cones, settings)
    result = solver.solve()

    raw = str(result.status)
    status = _STATUS_MAP.get(raw, "max_iters")
    x = np.asarray(result.x, dtype=float)
    obj = float(problem.objective @ x) if status == "optimal" else float("nan")
    return SocpSolution(x=x, status=status, objective_value=obj,
                        raw_status=raw, iterations=int(result.iterations))
