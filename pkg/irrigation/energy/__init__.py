from .breakdown import (CSV_HEADER, EnergyBreakdown, energy_breakdown, internal_energy, kinetic_rate,
                        perimeter_rate, rate_profile, total_energy)
from .diagnostics import (CONCENTRATION_CUTOFF, SubsystemEquipartition,
                          concentration_bound, concentration_threshold,
                          equipartition_residual, first_moment_diagnostic,
                          subsystem_equipartition)

__all__ = [
    'CSV_HEADER', 'EnergyBreakdown', 'energy_breakdown', 'internal_energy', 'kinetic_rate',
    'perimeter_rate', 'rate_profile', 'total_energy',
    'CONCENTRATION_CUTOFF', 'SubsystemEquipartition', 'concentration_bound',
    'concentration_threshold', 'equipartition_residual', 'first_moment_diagnostic',
    'subsystem_equipartition',
]
