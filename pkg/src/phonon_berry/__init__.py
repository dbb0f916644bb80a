"""Berry-phase effects in transverse-phonon polarization transport.

Submodules:

``medium``      analytic inhomogeneous media and the shear-wave speed
``berry``       momentum-space connection, curvature and Rytov-angle estimators
``raytrace``    helicity-dependent semiclassical ray tracing and the Hall shift
``noise``       Rytov angle under white momentum noise, Monte Carlo ensembles
``validation``  the built-in acceptance suite
``cli``         the ``phonon-berry`` command
"""

from .berry import (
    MomentumPath,
    PhaseResult,
    circle_path,
    connection,
    curvature,
    rotate_gauge,
    rytov_line_integral,
    rytov_solid_angle,
    transport_polarization,
)
from .errors import PhononBerryError
from .medium import MediumModel, adiabaticity, speed_gradient, transverse_speed
from .noise import (
    NoiseModel,
    PrescribedPath,
    delta_gamma_exact,
    delta_gamma_linearized,
    run_ensemble,
    variance_prediction,
)
from .raytrace import PhononState, TraceConfig, Trajectory, hall_shift, helicity_splitting, integrate, ray_rhs

__version__ = "0.1.0"
