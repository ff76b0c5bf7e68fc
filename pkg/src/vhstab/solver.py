"""Successive approximation u_{k+1} = A(u_k) with weighted-norm stopping."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .grid import Field3D, bielecki_norm, zeros
from .operator import apply_A
from .problem import ProblemInstance

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200


class NotConverged(RuntimeError):
    def __init__(self, report: "SolveReport"):
        super().__init__(
            f"no convergence after {report.iterations} iterations "
            f"(last step {report.residual_history[-1]:.3e}, tol {report.tol:.3e})"
        )
        self.report = report


class QOutOfRange(ValueError):
    pass


@dataclass
class SolveReport:
    u_star: Field3D
    iterations: int
    residual_history: list[float] = field(default_factory=list)
    observed_ratios: list[float] = field(default_factory=list)
    converged: bool = False
    tol: float = DEFAULT_TOL

    @property
    def max_ratio(self) -> float:
        return max(self.observed_ratios, default=0.0)


def solve(
    p: ProblemInstance,
    u0: Field3D | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    strict: bool = False,
) -> SolveReport:
    """Iterate A from ``u0`` (zero by default) until ||u_{k+1} - u_k||_tau <= tol.

    The report is returned whether or not the iteration converged; with
    ``strict=True`` a non-converged run raises NotConverged carrying it.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    u = zeros(p.domain) if u0 is None else u0
    history: list[float] = []
    converged = False
    for k in range(max_iter):
        u_next = apply_A(p, u)
        step = bielecki_norm(u_next - u)
        history.append(step)
        u = u_next
        log.debug("iteration %d: step %.3e", k + 1, step)
        if step <= tol:
            converged = True
            break
    ratios = [
        history[i + 1] / history[i] if history[i] > 0 else 0.0
        for i in range(len(history) - 1)
    ]
    report = SolveReport(u, len(history), history, ratios, converged, tol)
    if strict and not converged:
        raise NotConverged(report)
    return report


def a_priori_bound(q: float, first_step: float, k: int) -> float:
    """q^k / (1 - q) * ||u_1 - u_0||, the distance bound from u_k to the fixed point."""
    if not 0 <= q < 1:
        raise QOutOfRange(f"contraction factor must lie in [0, 1), got {q}")
    return q ** k * first_step / (1.0 - q)
