"""Desk-scale numerical laboratory for a fully parabolic chemotaxis system
with signal-dependent sensitivity: parameter admissibility machinery plus a
conservative finite-volume solver with monitoring diagnostics.
"""

from .admissibility import (
    AdmissibilityCertificate,
    EtaEstimate,
    Ladder,
    LadderRung,
    build_ladder,
    c_const,
    certify,
    compute_eta,
    discriminant_Dr,
    gn_exponent,
    heat_kernel_tail,
    interval_Ip,
    r0,
    select_p_eps,
    smoothing_admissible,
    threshold_K,
)
from .diagnostics import Monitor, MonitorSample, RunReport
from .errors import KslabError, ValidationError
from .kernels import BACKEND as KERNEL_BACKEND
from .sensitivity import (
    EnergyParams,
    F_phi,
    H_eps,
    SensitivityParams,
    chi_upper,
    g,
    phi,
)
from .solver import Grid, SimState, SolverConfig, run, step

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "KERNEL_BACKEND",
    "SensitivityParams",
    "EnergyParams",
    "chi_upper",
    "g",
    "phi",
    "F_phi",
    "H_eps",
    "EtaEstimate",
    "AdmissibilityCertificate",
    "Ladder",
    "LadderRung",
    "heat_kernel_tail",
    "compute_eta",
    "threshold_K",
    "select_p_eps",
    "r0",
    "discriminant_Dr",
    "interval_Ip",
    "smoothing_admissible",
    "build_ladder",
    "gn_exponent",
    "c_const",
    "certify",
    "Grid",
    "SimState",
    "SolverConfig",
    "step",
    "run",
    "Monitor",
    "MonitorSample",
    "RunReport",
    "KslabError",
    "ValidationError",
]
