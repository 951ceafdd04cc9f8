"""Monitored quantities and inequality residuals computed from simulation
states: mass, norms, the signal floor margin, the weighted density
functional and its dissipation-inequality residual, and blow-up flags.
"""

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from .errors import DomainError, ValidationError
from .sensitivity import EnergyParams, SensitivityParams, phi

__all__ = [
    "MonitorSample",
    "BlowupLimits",
    "Monitor",
    "RunReport",
    "mass",
    "lp_norm",
    "min_field",
    "linf",
    "max_face_gradient",
    "energy_functional",
    "energy_rhs",
    "energy_residual",
    "residual_series",
    "lower_bound_check",
    "blow_up_suspect",
]

# relative slack on the v >= eta precondition of the weighted functional
_FLOOR_SLACK = 1e-12


def mass(u, grid) -> float:
    """Total discrete mass sum(u) * cellvol."""
    return float(np.sum(u)) * grid.cellvol


def lp_norm(u, grid, p: float) -> float:
    """(sum |u|^p cellvol)^(1/p) for p >= 1."""
    if not p >= 1.0:
        raise ValidationError("lp_norm requires p >= 1")
    return float((np.sum(np.abs(u) ** p) * grid.cellvol) ** (1.0 / p))


def min_field(v) -> float:
    return float(np.min(v))


def linf(u) -> float:
    return float(np.max(np.abs(u)))


def max_face_gradient(v, grid) -> float:
    """Largest interior-face gradient magnitude (boundary faces are zero
    by the no-flux condition)."""
    hx, hy = grid.h2d
    best = 0.0
    gx = np.diff(v, axis=0)
    if gx.size:
        best = max(best, float(np.max(np.abs(gx))) / hx)
    gy = np.diff(v, axis=1)
    if gy.size:
        best = max(best, float(np.max(np.abs(gy))) / hy)
    return best


def _check_signal_floor(v, eta: float):
    lo = float(np.min(v))
    if lo < eta * (1.0 - _FLOOR_SLACK):
        raise DomainError(
            f"signal minimum {lo} fell below the floor eta={eta}: "
            "either a pre-spin-up evaluation or an eta overestimate"
        )


def energy_functional(u, v, grid, ep: EnergyParams, sp: SensitivityParams) -> float:
    """Weighted functional sum(u^p * phi(v)) * cellvol; requires v >= eta."""
    _check_signal_floor(v, ep.eta)
    return float(np.sum(u**ep.p * phi(v, ep, sp))) * grid.cellvol


def energy_rhs(u, v, grid, ep: EnergyParams, sp: SensitivityParams, c_const: float) -> float:
    """Dissipation bound c * E - r * sum(u^(p+1) phi(v) / (a+v)^k) * cellvol."""
    _check_signal_floor(v, ep.eta)
    w = phi(v, ep, sp)
    energy = float(np.sum(u**ep.p * w)) * grid.cellvol
    sink = float(np.sum(u ** (ep.p + 1.0) * w / (sp.a + v) ** sp.k)) * grid.cellvol
    return c_const * energy - ep.r * sink


def residual_series(ts: Sequence[float], energies: Sequence[float], rhss: Sequence[float]) -> np.ndarray:
    """Centered-difference dissipation residuals per sample.

    residual_j = dE/dt|_centered(t_j) - rhs_j for interior samples; the
    first and last entries are NaN. Requires at least three samples.
    """
    ts = np.asarray(ts, dtype=float)
    energies = np.asarray(energies, dtype=float)
    rhss = np.asarray(rhss, dtype=float)
    if ts.size < 3:
        raise ValidationError("residual_series requires at least three samples")
    out = np.full(ts.size, np.nan)
    dE = energies[2:] - energies[:-2]
    dt2 = ts[2:] - ts[:-2]
    out[1:-1] = dE / dt2 - rhss[1:-1]
    return out


def energy_residual(states, grid, ep: EnergyParams, sp: SensitivityParams, c_const: float) -> np.ndarray:
    """Residuals for a window of (t, u, v) state snapshots (>= 3)."""
    states = list(states)
    if len(states) < 3:
        raise ValidationError("energy_residual requires at least three states")
    ts = [s[0] for s in states]
    energies = [energy_functional(s[1], s[2], grid, ep, sp) for s in states]
    rhss = [energy_rhs(s[1], s[2], grid, ep, sp, c_const) for s in states]
    return residual_series(ts, energies, rhss)


def lower_bound_check(v, eta: float) -> float:
    """Margin min(v) - eta; nonnegative when the floor estimate holds."""
    return min_field(v) - eta


@dataclass(frozen=True)
class MonitorSample:
    t: float
    mass: float
    min_v: float
    linf_u: float
    lp_u: float
    energy: float
    residual: float
    dt: float
    max_grad_v: float = math.nan


@dataclass(frozen=True)
class BlowupLimits:
    """Absolute thresholds resolved at run start."""

    linf_max: float
    grad_max: float
    dt_min: float


def blow_up_suspect(sample: MonitorSample, limits: BlowupLimits) -> bool:
    """True iff the sample crosses a threshold or the step size underflowed."""
    if not (math.isfinite(sample.linf_u) and math.isfinite(sample.mass)):
        return True
    if sample.linf_u > limits.linf_max:
        return True
    if math.isfinite(sample.max_grad_v) and sample.max_grad_v > limits.grad_max:
        return True
    if 0.0 < sample.dt < limits.dt_min:
        return True
    return False


class Monitor:
    """Collects monitor rows from simulation states at a step cadence.

    When energy parameters are supplied, each row also carries the weighted
    functional and (after :meth:`finalize`) the centered-difference
    dissipation residual.
    """

    def __init__(
        self,
        cadence: int = 10,
        p: float = 2.0,
        energy: Optional[EnergyParams] = None,
        sp: Optional[SensitivityParams] = None,
        c_const: Optional[float] = None,
    ):
        if cadence < 1:
            raise ValidationError("cadence must be >= 1")
        if energy is not None and (sp is None or c_const is None):
            raise ValidationError("energy monitoring needs sp and c_const")
        self.cadence = cadence
        self.p = p
        self.energy = energy
        self.sp = sp
        self.c_const = c_const
        self._rows: List[MonitorSample] = []
        self._rhss: List[float] = []

    def record(self, state) -> MonitorSample:
        grid = state.grid
        u, v = state.u, state.v
        if self.energy is not None:
            e = energy_functional(u, v, grid, self.energy, self.sp)
            rhs = energy_rhs(u, v, grid, self.energy, self.sp, self.c_const)
            p_norm = lp_norm(u, grid, self.energy.p)
        else:
            e = math.nan
            rhs = math.nan
            p_norm = lp_norm(u, grid, self.p)
        sample = MonitorSample(
            t=state.t,
            mass=mass(u, grid),
            min_v=min_field(v),
            linf_u=linf(u),
            lp_u=p_norm,
            energy=e,
            residual=math.nan,
            dt=state.dt,
            max_grad_v=max_face_gradient(v, grid),
        )
        self._rows.append(sample)
        self._rhss.append(rhs)
        return sample

    def finalize(self) -> List[MonitorSample]:
        rows = self._rows
        if self.energy is None or len(rows) < 3:
            return list(rows)
        res = residual_series(
            [s.t for s in rows], [s.energy for s in rows], self._rhss
        )
        return [replace(s, residual=float(r)) for s, r in zip(rows, res)]


@dataclass
class RunReport:
    """Outcome of a simulation run: monitor series plus termination status."""

    samples: List[MonitorSample]
    status: str  # "completed" | "blow-up-suspected" | "error"
    detail: Optional[str]
    steps: int
    wall_time_s: float
    final_state: object = None
    threads: int = 1
