from .dyadic_builder import (MAX_LEVELS, ConstructionConfig, DyadicBuilder, bound_ratio,
                             coarse_level, dyadic_interpolation, merge_durations,
                             square_to_dirac, uniform_grid_measure)

__all__ = [
    'ConstructionConfig', 'DyadicBuilder', 'MAX_LEVELS', 'coarse_level', 'merge_durations',
    'dyadic_interpolation', 'square_to_dirac', 'uniform_grid_measure', 'bound_ratio',
]
