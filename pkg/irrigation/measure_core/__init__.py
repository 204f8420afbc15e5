from .atomic_measure import AtomicMeasure, barycenter, spreading_scale
from .polygonal_flow import FlowEdge, FlowNode, PolygonalFlow
from .transforms import (Direction, PiecewiseAffinePath, barycenter_path,
                         barycenter_shift, barycenter_velocity, boundary_measure,
                         complement_flow, dilate_space, dilate_time,
                         extract_subsystem, refine_at_times, shrink, slice_flow,
                         subsystem_fluxes, translate)
from .validation import ValidationReport, Violation, ViolationKind, validate_flow

__all__ = [
    'AtomicMeasure', 'barycenter', 'spreading_scale',
    'FlowEdge', 'FlowNode', 'PolygonalFlow',
    'Direction', 'PiecewiseAffinePath', 'barycenter_path', 'barycenter_shift',
    'barycenter_velocity', 'boundary_measure', 'complement_flow', 'dilate_space',
    'dilate_time', 'extract_subsystem', 'refine_at_times', 'shrink', 'slice_flow',
    'subsystem_fluxes', 'translate',
    'ValidationReport', 'Violation', 'ViolationKind', 'validate_flow',
]
