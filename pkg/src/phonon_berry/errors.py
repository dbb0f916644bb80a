"""Exception hierarchy shared by all modules."""


class PhononBerryError(Exception):
    """Base class; ``code`` is the machine-readable tag printed by the CLI."""

    code = "ERROR"


class DomainError(PhononBerryError, ValueError):
    code = "DOMAIN"


class AxisSingularity(PhononBerryError, ValueError):
    """A momentum sample lies on the gauge string of the connection (the polar axis)."""

    code = "AXIS_SINGULARITY"


class ZeroMomentum(PhononBerryError, ValueError):
    code = "ZERO_MOMENTUM"


class NotClosed(PhononBerryError, ValueError):
    code = "NOT_CLOSED"


class NotTransverse(PhononBerryError, ValueError):
    code = "NOT_TRANSVERSE"


class AntipodalSegment(PhononBerryError, ValueError):
    code = "ANTIPODAL_SEGMENT"


class ResolutionError(PhononBerryError, ValueError):
    code = "RESOLUTION"


class StillSingular(PhononBerryError, ValueError):
    code = "STILL_SINGULAR"


class StepSizeUnderflow(PhononBerryError, RuntimeError):
    code = "STEP_UNDERFLOW"


class DegenerateMomentum(PhononBerryError, ValueError):
    code = "DEGENERATE_MOMENTUM"


class ParseError(PhononBerryError, ValueError):
    code = "CONFIG_PARSE"


class ValidationError(PhononBerryError, ValueError):
    code = "CONFIG_VALIDATION"
