"""Projected-gradient descent on the geometry of a fixed-topology flow."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import OptimizerError
from ..measure_core import PolygonalFlow, validate_flow
from ..potential import RegularizedKernelSpec
from .config import Constraints, OptimizerConfig
from .objective import Evaluation, FlowObjective

logger = logging.getLogger(__name__)

TRACE_CSV_HEADER = ("iter", "total", "P", "E", "boundary", "grad_norm", "move")
_MAX_STEP = 1e6
# a stalled line search counts as converged within this multiple of grad_tol
STALL_FACTOR = 10.0


@dataclass(frozen=True)
class TraceRow:
    iter: int
    total: float
    P: float
    E: float
    boundary: float
    grad_norm: float
    move: str

    def as_row(self) -> tuple:
        return (self.iter, self.total, self.P, self.E, self.boundary, self.grad_norm, self.move)


@dataclass
class Trace:
    """Per-step record of an optimization run."""

    rows: List[TraceRow] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    def append(self, row: TraceRow) -> None:
        self.rows.append(row)

    def extend(self, other: "Trace") -> None:
        offset = self.rows[-1].iter + 1 if self.rows else 0
        for row in other.rows:
            self.rows.append(TraceRow(row.iter + offset, row.total, row.P, row.E,
                                      row.boundary, row.grad_norm, row.move))

    @property
    def final(self) -> Optional[TraceRow]:
        return self.rows[-1] if self.rows else None

    def is_monotone(self, tol: float = 0.0) -> bool:
        """Accepted steps never increase the objective."""
        steps = [r.total for r in self.rows if r.move in ("init", "step")]
        return all(b <= a + tol for a, b in zip(steps, steps[1:]))

    def csv_rows(self) -> List[tuple]:
        return [row.as_row() for row in self.rows]


class OptimizerSession:
    """
    One optimization run owning its flow, variables and trace.

    Steps are Barzilai-Borwein trial steps, projected and then shortened
    by backtracking until the Armijo condition holds.
    """

    def __init__(self, flow: PolygonalFlow, cfg: Optional[OptimizerConfig] = None,
                 constraints: Optional[Constraints] = None,
                 spec: Optional[RegularizedKernelSpec] = None):
        self.cfg = cfg or OptimizerConfig()
        report = validate_flow(flow, rooted=True)
        if not report.ok:
            raise OptimizerError("Invalid initial flow: " + "; ".join(
                v.describe() for v in report.violations))
        self.cfg.check_regularization(flow.eps)
        self.objective = FlowObjective(flow, constraints, spec)
        self.trace = Trace()
        x0, ok = self.objective.project(self.objective.pack())
        if not ok:
            raise OptimizerError("Initial times violate the minimum edge duration")
        self.x = x0
        self.current = self.objective.evaluate(self.x, with_gradient=True)
        self.step_size = self.cfg.init_step
        self._prev: Optional[Tuple[np.ndarray, np.ndarray]] = None
        self._record(0, "init")

    def _projected_gradient_norm(self) -> float:
        if len(self.x) == 0:
            return 0.0
        alpha = self.step_size
        target, ok = self.objective.project(self.x - alpha * self.current.gradient)
        if not ok:
            alpha = min(alpha, self.cfg.init_step) * 1e-3
            target, _ = self.objective.project(self.x - alpha * self.current.gradient)
        return float(np.max(np.abs(self.x - target))) / alpha

    def _record(self, it: int, move: str) -> None:
        ev = self.current
        self.trace.append(TraceRow(it, ev.total, ev.P, ev.E, ev.boundary,
                                   self._projected_gradient_norm(), move))

    def _trial_step(self) -> float:
        if self._prev is None:
            return self.step_size
        s = self.x - self._prev[0]
        y = self.current.gradient - self._prev[1]
        sy = float(s @ y)
        if sy <= 0.0:
            return self.step_size
        return float(min(max(float(s @ s) / sy, 1e-12), _MAX_STEP))

    def step(self, it: int) -> bool:
        """One Armijo-accepted step; False when no step decreases the objective."""
        g = self.current.gradient
        alpha = self._trial_step()
        for _ in range(self.cfg.max_backtracks):
            candidate, ok = self.objective.project(self.x - alpha * g)
            if ok:
                ev = self.objective.evaluate(candidate)
                decrease = float(g @ (candidate - self.x))
                if (math.isfinite(ev.total)
                        and ev.total <= self.current.total + self.cfg.armijo_c * decrease
                        and ev.total <= self.current.total):
                    self._prev = (self.x, g)
                    self.x = candidate
                    self.current = self.objective.evaluate(candidate, with_gradient=True)
                    self.step_size = alpha
                    self._record(it, "step")
                    return True
            alpha *= self.cfg.backtrack
        return False

    def run(self) -> Tuple[PolygonalFlow, Trace]:
        if len(self.x) == 0:
            self.trace.converged = True
            return self.objective.to_flow(self.x), self.trace
        for it in range(1, self.cfg.max_iters + 1):
            if self.trace.final.grad_norm <= self.cfg.grad_tol:
                self.trace.converged = True
                break
            if not self.step(it):
                # no descent left at machine precision
                self.trace.converged = self.trace.final.grad_norm <= STALL_FACTOR * self.cfg.grad_tol
                logger.debug("Line search stalled at iteration %d", it)
                break
            self.trace.iterations = it
        else:
            self.trace.converged = self.trace.final.grad_norm <= self.cfg.grad_tol
        if not self.trace.converged:
            logger.warning("Optimizer stopped after %d iterations with projected gradient %.3g",
                           self.trace.iterations, self.trace.final.grad_norm)
        return self.objective.to_flow(self.x), self.trace

    @property
    def evaluation(self) -> Evaluation:
        return self.current


def optimize_positions(flow: PolygonalFlow, cfg: Optional[OptimizerConfig] = None,
                       constraints: Optional[Constraints] = None,
                       spec: Optional[RegularizedKernelSpec] = None) -> Tuple[PolygonalFlow, Trace]:
    """
    Minimize 𝓔 over the free geometry of a fixed-topology rooted flow.

    Args:
        flow: Valid rooted flow
        cfg: Optimizer settings
        constraints: Active constraints (fix-boundary, fix-root, mass-simplex,
            zero-barycenter, box)
        spec: Kernel of the boundary norm

    Returns:
        (optimized flow, trace); trace.converged tells whether grad_tol was met
    """
    session = OptimizerSession(flow, cfg, constraints, spec)
    return session.run()


def objective_value(flow: PolygonalFlow, spec: Optional[RegularizedKernelSpec] = None) -> float:
    """𝓔 of a valid rooted flow (all variables fixed)."""
    objective = FlowObjective(flow, Constraints(), spec)
    return objective.evaluate(objective.pack()).total
