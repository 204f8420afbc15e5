from .holder import (SHELL_CSV_HEADER, HolderPairs, HolderReport, ahlfors_norm_ratio,
                     holder_quotient, linf_ratio, sample_holder_pairs, spread_mass_ratio)
from .kernel import (KernelMode, RegularizedKernelSpec, disk_potential, disk_potential_slope,
                     disk_self_energy, pair_interaction)
from .riesz_potential import (hminus_half_norm_sq, leaf_potentials, monte_carlo_norm_sq,
                              monte_carlo_self_energy, norm_gradient, potential_at,
                              potential_gradients_at, potentials_at)

__all__ = [
    'KernelMode', 'RegularizedKernelSpec', 'disk_potential', 'disk_potential_slope',
    'disk_self_energy', 'pair_interaction',
    'potential_at', 'potentials_at', 'potential_gradients_at', 'hminus_half_norm_sq',
    'leaf_potentials', 'norm_gradient', 'monte_carlo_self_energy', 'monte_carlo_norm_sq',
    'HolderPairs', 'HolderReport', 'SHELL_CSV_HEADER', 'sample_holder_pairs',
    'holder_quotient', 'linf_ratio', 'ahlfors_norm_ratio', 'spread_mass_ratio',
]
