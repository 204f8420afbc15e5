from .ahlfors import (CURVE_CSV_HEADER, CenterMode, GlobalRadiusCheck, RegularityAnalyzer,
                      RegularityReport, ahlfors_constant, default_fit_window,
                      dimension_estimate, dyadic_radii, global_radius_check, max_ball_mass,
                      regularity_report)
from .synthetic import CANTOR_DIMENSION, cantor_product, uniform_segment, uniform_square_grid

__all__ = [
    'CenterMode', 'ahlfors_constant', 'max_ball_mass', 'dyadic_radii', 'default_fit_window',
    'dimension_estimate', 'RegularityReport', 'regularity_report', 'GlobalRadiusCheck',
    'global_radius_check', 'RegularityAnalyzer', 'CURVE_CSV_HEADER',
    'CANTOR_DIMENSION', 'uniform_square_grid', 'uniform_segment', 'cantor_product',
]
