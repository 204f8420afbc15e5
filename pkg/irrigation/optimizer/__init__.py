from .competitor import ShrinkReport, shrink_competitor, shrink_competitor_test, shrink_sweep
from .config import Constraint, Constraints, OptimizerConfig, StepRule
from .landscape import (FIRST_VARIATION_CV, AprioriDiagnostics, LandscapeValues, ResidualStats,
                        apriori_diagnostics, first_variation_residual, landscape)
from .objective import Evaluation, FlowObjective, path_incidence, project_shifted_simplex
from .position_optimizer import (TRACE_CSV_HEADER, OptimizerSession, Trace, TraceRow,
                                 objective_value, optimize_positions)
from .sweep import (SWEEP_CSV_HEADER, RTSweep, SweepRow, SweepTable, collapsed_seed,
                    construct_seed, extend_horizon, random_seed, rt_sweep)
from .topology_search import TopologySearch, topology_search

__all__ = [
    'ShrinkReport', 'shrink_competitor', 'shrink_competitor_test', 'shrink_sweep',
    'Constraint', 'Constraints', 'OptimizerConfig', 'StepRule',
    'FIRST_VARIATION_CV', 'AprioriDiagnostics', 'LandscapeValues', 'ResidualStats',
    'apriori_diagnostics', 'first_variation_residual', 'landscape',
    'Evaluation', 'FlowObjective', 'path_incidence', 'project_shifted_simplex',
    'TRACE_CSV_HEADER', 'OptimizerSession', 'Trace', 'TraceRow', 'objective_value',
    'optimize_positions',
    'SWEEP_CSV_HEADER', 'RTSweep', 'SweepRow', 'SweepTable', 'collapsed_seed',
    'construct_seed', 'extend_horizon', 'random_seed', 'rt_sweep',
    'TopologySearch', 'topology_search',
]
