"""Exception hierarchy shared by all irrigation subpackages."""


class IrrigationError(ValueError):
    """Base class for invalid inputs and failed preconditions."""


class MeasureError(IrrigationError):
    """Empty or malformed atomic measure."""


class FlowError(IrrigationError):
    """Invalid flow, unknown node id or bad time interval."""


class FlowFormatError(IrrigationError):
    """Malformed flow or measure file."""


class TransportError(IrrigationError):
    """Mass mismatch or problem too large for the exact solver."""


class PotentialError(IrrigationError):
    """Singular potential evaluation or unsupported kernel request."""


class RegularityError(IrrigationError):
    """Empty radius list or degenerate fit window."""


class ConstructionError(IrrigationError):
    """Construction inputs out of range."""


class OptimizerError(IrrigationError):
    """Invalid initial flow or inconsistent constraint set."""
