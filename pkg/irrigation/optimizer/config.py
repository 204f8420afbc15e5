from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, Optional

from ..errors import OptimizerError


class StepRule(Enum):
    BACKTRACKING_ARMIJO = "backtracking-armijo"


class Constraint(Enum):
    FIX_BOUNDARY = "fix-boundary"
    FIX_ROOT = "fix-root"
    MASS_SIMPLEX = "mass-simplex"
    ZERO_BARYCENTER = "zero-barycenter"
    BOX = "box"


@dataclass(frozen=True)
class OptimizerConfig:
    """
    Settings of the projected-gradient optimizer and the topology search.

    Attributes:
        max_iters: Iteration cap of one optimize_positions run
        step_rule: Line-search rule
        init_step: First trial step
        grad_tol: Sup-norm tolerance of the projected gradient
        merge_tol: Space-time distance below which nodes are coalesced
        topology_moves: Whether optimize runs the topology search after the
            position optimizer (sweeps always search)
        moves_per_round: Candidate moves evaluated per search round
        max_rounds: Search rounds
        seed: Seed of every random choice
    """

    max_iters: int = 2000
    step_rule: StepRule = StepRule.BACKTRACKING_ARMIJO
    init_step: float = 1e-2
    grad_tol: float = 1e-7
    merge_tol: float = 1e-3
    topology_moves: bool = False
    moves_per_round: int = 8
    max_rounds: int = 10
    seed: int = 0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        object.__setattr__(self, "step_rule", StepRule(self.step_rule))
        for name in ("init_step", "grad_tol", "merge_tol", "armijo_c"):
            if getattr(self, name) <= 0.0:
                raise OptimizerError(f"{name} must be positive, got {getattr(self, name)}")
        if self.max_iters < 0 or self.moves_per_round < 1 or self.max_rounds < 0:
            raise OptimizerError("Iteration and move counts must be nonnegative")
        if not (0.0 < self.backtrack < 1.0):
            raise OptimizerError(f"backtrack must lie in (0, 1), got {self.backtrack}")

    @classmethod
    def from_dict(cls, config: Optional[Dict] = None) -> "OptimizerConfig":
        config = config or {}
        return cls(max_iters=int(config.get("max_iters", 2000)),
                   step_rule=StepRule(config.get("step_rule", "backtracking-armijo")),
                   init_step=float(config.get("init_step", 1e-2)),
                   grad_tol=float(config.get("grad_tol", 1e-7)),
                   merge_tol=float(config.get("merge_tol", 1e-3)),
                   topology_moves=bool(config.get("topology_moves", False)),
                   moves_per_round=int(config.get("moves_per_round", 8)),
                   max_rounds=int(config.get("max_rounds", 10)),
                   seed=int(config.get("seed", 0)))

    def check_regularization(self, eps: float) -> None:
        """merge_tol must stay below the leaf radius of flows with a boundary term."""
        if eps > 0.0 and self.merge_tol >= eps:
            raise OptimizerError(f"merge_tol {self.merge_tol} must be below ε = {eps}")


@dataclass(frozen=True)
class Constraints:
    """Active constraint set; `box_half_width` bounds positions when BOX is set."""

    active: frozenset = frozenset()
    box_half_width: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "active", frozenset(Constraint(c) for c in self.active))
        if Constraint.FIX_BOUNDARY in self.active:
            for other in (Constraint.MASS_SIMPLEX, Constraint.ZERO_BARYCENTER):
                if other in self.active:
                    raise OptimizerError(
                        f"Constraints {Constraint.FIX_BOUNDARY.value} and {other.value} conflict")
        if Constraint.BOX in self.active and not (self.box_half_width or 0.0) > 0.0:
            raise OptimizerError("Box constraint needs a positive half width")

    @classmethod
    def of(cls, *names, box_half_width: Optional[float] = None) -> "Constraints":
        return cls(frozenset(Constraint(n) for n in names), box_half_width)

    @classmethod
    def from_names(cls, names: Iterable[str],
                   box_half_width: Optional[float] = None) -> "Constraints":
        return cls.of(*names, box_half_width=box_half_width)

    def __contains__(self, item) -> bool:
        return Constraint(item) in self.active

    def names(self):
        return sorted(c.value for c in self.active)
