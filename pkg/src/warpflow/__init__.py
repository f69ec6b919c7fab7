"""Volume-preserving flow of graphical hypersurfaces in warped products.

Modules
-------
warping         warping functions phi, primitives and the Q conditions
base            sphere and flat-torus grids with their operators
hypersurface    extrinsic geometry of a graph r = rho(p)
flow            RK4 time stepping of the flow
diagnostics     identity residuals, records and decay fits
isoperimetric   isoperimetric profile of the slices
config, cli     config grammar and the ``warpflow`` command
experiments     standard runs and refinement studies
"""

from .base import SphereGrid, TorusGrid, parse_base
from .config import RunConfig, load_config, parse_config
from .diagnostics import DecayFit, DiagnosticsRecord, decay_fit, record, run_summary
from .errors import (ConditionsViolated, ConfigError, InsufficientData, InsufficientWindow,
                     NonFinite, OutOfBand, OutOfRange, ParseError, Unsupported,
                     ValidationError, WarpflowError)
from .flow import FlowConfig, Termination, Trajectory, run, stable_dt, step
from .hypersurface import GraphState, area, enclosed_volume, extrinsic, speed
from .isoperimetric import IsoProfile, build_profile
from .warping import (WarpingProfile, check_conditions, make_profile, photon_sphere_roots,
                      stability_check)

__version__ = "0.1.0"

__all__ = [
    "SphereGrid", "TorusGrid", "parse_base",
    "RunConfig", "load_config", "parse_config",
    "DecayFit", "DiagnosticsRecord", "decay_fit", "record", "run_summary",
    "ConditionsViolated", "ConfigError", "InsufficientData", "InsufficientWindow",
    "NonFinite", "OutOfBand", "OutOfRange", "ParseError", "Unsupported",
    "ValidationError", "WarpflowError",
    "FlowConfig", "Termination", "Trajectory", "run", "stable_dt", "step",
    "GraphState", "area", "enclosed_volume", "extrinsic", "speed",
    "IsoProfile", "build_profile",
    "WarpingProfile", "check_conditions", "make_profile", "photon_sphere_roots",
    "stability_check",
]
