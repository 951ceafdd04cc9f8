"""Conservative finite-volume integration of

    u_t = div(grad u) - div(u chi(v) grad v)
    v_t = div(grad v) + u - v

with zero-flux boundaries on 1D intervals and 2D rectangles.

Discretization: cell-centered uniform grid; drift flux by first-order
upwinding on faces (positivity), diffusion and the -v + u reaction by
implicit Euler solved with conjugate gradients, drift explicit. The
implicit density update is re-expressed in flux form so that discrete mass
is conserved to round-off regardless of the linear-solver tolerance.

Fields are float64 arrays of shape (nx, ny); 1D grids use ny = 1.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .diagnostics import BlowupLimits, Monitor, RunReport, blow_up_suspect, linf
from .errors import (
    DomainError,
    DtUnderflowError,
    LinearSolverError,
    SolverError,
    ValidationError,
)
from .sensitivity import SensitivityParams

__all__ = [
    "Grid",
    "SimState",
    "SolverConfig",
    "StepStats",
    "laplacian_neumann",
    "chemotactic_flux",
    "flux_divergence",
    "step",
    "run",
]

FLUX_SCHEMES = ("upwind", "central")
V_STEPPINGS = ("implicit-euler",)
U_DIFFUSION_STEPPINGS = ("implicit-euler", "explicit")


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered rectangle: dim in {1, 2}, >= 8 cells per axis."""

    dim: int
    extents: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.cells) != self.dim:
            raise ValidationError("extents/cells length must equal dim")
        if any(not e > 0.0 for e in self.extents):
            raise ValidationError("extents must be positive")
        if any(c < 8 for c in self.cells):
            raise ValidationError("need at least 8 cells per axis")
        object.__setattr__(self, "extents", tuple(float(e) for e in self.extents))
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))

    @property
    def h(self) -> Tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extents, self.cells))

    @property
    def shape(self) -> Tuple[int, int]:
        nx = self.cells[0]
        ny = self.cells[1] if self.dim == 2 else 1
        return (nx, ny)

    @property
    def h2d(self) -> Tuple[float, float]:
        h = self.h
        return (h[0], h[1] if self.dim == 2 else 1.0)

    @property
    def cellvol(self) -> float:
        return math.prod(self.h)

    @property
    def diameter(self) -> float:
        return math.sqrt(sum(e * e for e in self.extents))

    def centers(self, axis: int) -> np.ndarray:
        h = self.h[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self):
        """Cell-center coordinate arrays broadcast to the field shape."""
        x = self.centers(0)[:, None]
        if self.dim == 1:
            return (np.broadcast_to(x, self.shape).copy(),)
        y = self.centers(1)[None, :]
        return (
            np.broadcast_to(x, self.shape).copy(),
            np.broadcast_to(y, self.shape).copy(),
        )

    def field(self, fill: float = 0.0) -> np.ndarray:
        return np.full(self.shape, float(fill))


@dataclass(frozen=True)
class StepStats:
    max_w: float
    cg_iters_v: int
    cg_iters_u: int


@dataclass(frozen=True)
class SimState:
    grid: Grid
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0
    dt: float = 0.0
    stats: Optional[StepStats] = None

    def __post_init__(self):
        for name in ("u", "v"):
            arr = getattr(self, name)
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            if arr.shape != self.grid.shape:
                raise ValidationError(
                    f"{name} has shape {arr.shape}, grid expects {self.grid.shape}"
                )
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class SolverConfig:
    sp: SensitivityParams
    cfl_diff: float = 0.9
    cfl_adv: float = 0.25
    dt_max: float = 0.01
    dt_min: float = 1e-12
    flux_scheme: str = "upwind"
    v_stepping: str = "implicit-euler"
    u_diffusion_stepping: str = "implicit-euler"
    cg_tol: float = 1e-10
    cg_max_iter: int = 100_000
    debug_checks: bool = False  # per-step conservation/positivity assertions

    def __post_init__(self):
        if not 0.0 < self.cfl_diff <= 1.0 or not 0.0 < self.cfl_adv <= 1.0:
            raise ValidationError("cfl factors must lie in (0, 1]")
        if not self.dt_min < self.dt_max:
            raise ValidationError("dt_min must be < dt_max")
        if self.flux_scheme not in FLUX_SCHEMES:
            raise ValidationError(f"flux_scheme must be one of {FLUX_SCHEMES}")
        if self.v_stepping not in V_STEPPINGS:
            raise ValidationError(f"v_stepping must be one of {V_STEPPINGS}")
        if self.u_diffusion_stepping not in U_DIFFUSION_STEPPINGS:
            raise ValidationError(
                f"u_diffusion_stepping must be one of {U_DIFFUSION_STEPPINGS}"
            )


def laplacian_neumann(field_arr: np.ndarray, grid: Grid) -> np.ndarray:
    """Flux-form Neumann Laplacian (3-point in 1D, 5-point in 2D)."""
    f = np.ascontiguousarray(field_arr, dtype=np.float64)
    if f.shape != grid.shape:
        raise ValidationError("field not conformal to grid")
    hx, hy = grid.h2d
    return kernels.laplacian(f, hx, hy)


def chemotactic_flux(u, v, grid: Grid, sp: SensitivityParams, scheme: str = "upwind"):
    """Face fluxes of the drift term u chi(v) grad(v).

    Returns (Fx, Fy) with shapes (nx+1, ny) and (nx, ny+1); the boundary
    slots are zero. Face velocity is chi(face mean of v) times the face
    gradient; upwinding takes u from the donor cell.
    """
    if scheme not in FLUX_SCHEMES:
        raise ValidationError(f"scheme must be one of {FLUX_SCHEMES}")
    u = np.ascontiguousarray(u, dtype=np.float64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    hx, hy = grid.h2d
    nx, ny = grid.shape
    if sp.a == 0.0 and sp.K > 0.0 and float(np.min(v)) <= 0.0:
        raise DomainError("singular sensitivity: v must stay positive when a = 0")

    def face_flux(vl, vr, ul, ur, h):
        grad = (vr - vl) / h
        vf = 0.5 * (vl + vr)
        w = np.zeros_like(grad) if sp.K == 0.0 else sp.K / (sp.a + vf) ** sp.k * grad
        if scheme == "central":
            return w * 0.5 * (ul + ur)
        return w * np.where(w > 0.0, ul, ur)

    Fx = np.zeros((nx + 1, ny))
    Fx[1:-1] = face_flux(v[:-1], v[1:], u[:-1], u[1:], hx)
    Fy = np.zeros((nx, ny + 1))
    if ny > 1:
        Fy[:, 1:-1] = face_flux(v[:, :-1], v[:, 1:], u[:, :-1], u[:, 1:], hy)
    return Fx, Fy


def flux_divergence(Fx, Fy, grid: Grid) -> np.ndarray:
    """Divergence of face fluxes: (Fx_e - Fx_w)/hx + (Fy_n - Fy_s)/hy."""
    hx, hy = grid.h2d
    div = (Fx[1:] - Fx[:-1]) / hx
    if Fy.shape[1] > 1:
        div = div + (Fy[:, 1:] - Fy[:, :-1]) / hy
    return div


def _select_dt(state: SimState, config: SolverConfig, max_w: float) -> float:
    grid = state.grid
    h_min = min(grid.h)
    dt = config.dt_max
    if config.u_diffusion_stepping == "explicit":
        dt = min(dt, config.cfl_diff * h_min * h_min / (2.0 * grid.dim))
    if max_w > 0.0:
        dt = min(dt, config.cfl_adv * h_min / max_w)
    if dt < config.dt_min:
        raise DtUnderflowError(
            f"stability step {dt} fell below dt_min={config.dt_min} at t={state.t}"
        )
    return dt


def _cg(b, x0, alpha, cx, cy, config: SolverConfig, what: str):
    x, iters, relres = kernels.cg_solve(
        b, x0, alpha, cx, cy, rel_tol=config.cg_tol, max_iter=config.cg_max_iter
    )
    if iters < 0:
        raise LinearSolverError(
            f"{what} solve stalled at relative residual {relres}"
        )
    return x, iters


def step(state: SimState, config: SolverConfig, t_cap: Optional[float] = None) -> SimState:
    """Advance one time step (signal solve first, then density update).

    The step size comes from the face speeds of the pre-update signal;
    ``t_cap`` (remaining time to the horizon) may clamp it below dt_min on
    the final step only.
    """
    grid = state.grid
    sp = config.sp
    hx, hy = grid.h2d
    u, v = state.u, state.v

    max_w0, _ = kernels.max_face_speed(v, sp.K, sp.k, sp.a, hx, hy)
    dt = _select_dt(state, config, max_w0)
    if t_cap is not None:
        dt = min(dt, t_cap)

    cx, cy = dt / (hx * hx), dt / (hy * hy)
    v_new, it_v = _cg(v + dt * u, v, 1.0 + dt, cx, cy, config, "signal")

    if sp.K > 0.0:
        if sp.a == 0.0 and float(np.min(v_new)) <= 0.0:
            raise SolverError("signal lost positivity with singular sensitivity (a=0)")
        scheme = (
            kernels.SCHEME_CENTRAL
            if config.flux_scheme == "central"
            else kernels.SCHEME_UPWIND
        )
        div, max_w, _ = kernels.upwind_flux_divergence(
            u, v_new, sp.K, sp.k, sp.a, hx, hy, scheme
        )
        u_star = u - dt * div
    else:
        u_star = u.copy()
        max_w = 0.0

    if config.u_diffusion_stepping == "implicit-euler":
        u_mid, it_u = _cg(u_star, u_star, 1.0, cx, cy, config, "density")
        # flux-form recompute: conserves mass to round-off independent of
        # the CG tolerance, while staying within it of the implicit solve
        u_new = u_star + dt * kernels.laplacian(u_mid, hx, hy)
    else:
        u_new = u_star + dt * kernels.laplacian(u, hx, hy)
        it_u = 0

    if config.debug_checks:
        m_old = float(np.sum(u))
        m_new = float(np.sum(u_new))
        if abs(m_new - m_old) > 1e-12 * max(abs(m_old), 1e-300):
            raise SolverError(
                f"debug: mass drifted by {abs(m_new / m_old - 1.0)} in one step"
            )
        floor = -1e-9 * max(float(np.max(np.abs(u_new))), 1e-300)
        if config.flux_scheme == "upwind" and float(np.min(u_new)) < floor:
            raise SolverError(f"debug: density went negative ({np.min(u_new)})")
        if not np.all(np.isfinite(u_new)) or not np.all(np.isfinite(v_new)):
            raise SolverError("debug: non-finite field values")

    return SimState(
        grid=grid,
        u=u_new,
        v=v_new,
        t=state.t + dt,
        dt=dt,
        stats=StepStats(max_w=max_w if sp.K > 0.0 else max_w0, cg_iters_v=it_v, cg_iters_u=it_u),
    )


def _validate_initial(state: SimState, sp: SensitivityParams):
    u, v = state.u, state.v
    if float(np.min(u)) < 0.0:
        raise ValidationError("initial density must be nonnegative")
    if not float(np.max(u)) > 0.0:
        raise ValidationError("initial density must not vanish identically")
    if sp.a == 0.0:
        if not float(np.min(v)) > 0.0:
            raise ValidationError("initial signal must be strictly positive when a = 0")
    else:
        if float(np.min(v)) < 0.0 or not float(np.max(v)) > 0.0:
            raise ValidationError(
                "initial signal must be nonnegative and not identically zero"
            )


def run(
    initial: SimState,
    config: SolverConfig,
    horizon: float,
    monitor: Optional[Monitor] = None,
    blowup_linf_factor: float = 1e6,
    blowup_grad_factor: float = 1e6,
) -> RunReport:
    """Advance to the horizon, sampling monitors at their cadence.

    Terminates early with status "blow-up-suspected" on dt underflow or
    threshold crossings, and with "error" on solver failures.
    """
    if not horizon > 0.0:
        raise ValidationError("horizon must be positive")
    _validate_initial(initial, config.sp)
    if monitor is None:
        monitor = Monitor()
    t_start = time.perf_counter()

    first = monitor.record(initial)
    limits = BlowupLimits(
        linf_max=blowup_linf_factor * max(first.linf_u, 1e-300),
        grad_max=blowup_grad_factor * max(first.max_grad_v, 1.0),
        dt_min=config.dt_min,
    )

    state = initial
    steps = 0
    status = "completed"
    detail = None
    t_end = horizon * (1.0 - 1e-12)
    while state.t < t_end:
        try:
            state = step(state, config, t_cap=horizon - state.t)
        except DtUnderflowError as exc:
            status = "blow-up-suspected"
            detail = str(exc)
            break
        except (SolverError, DomainError) as exc:
            status = "error"
            detail = str(exc)
            break
        steps += 1
        if steps % monitor.cadence == 0 or state.t >= t_end:
            try:
                sample = monitor.record(state)
            except DomainError as exc:
                status = "error"
                detail = str(exc)
                break
            if blow_up_suspect(sample, limits):
                status = "blow-up-suspected"
                detail = (
                    f"threshold crossed at t={sample.t}: "
                    f"linf_u={sample.linf_u}, max_grad_v={sample.max_grad_v}"
                )
                break
    else:
        # horizon reached; make sure the last state is sampled
        if monitor._rows and monitor._rows[-1].t < state.t:
            monitor.record(state)

    return RunReport(
        samples=monitor.finalize(),
        status=status,
        detail=detail,
        steps=steps,
        wall_time_s=time.perf_counter() - t_start,
        final_state=state,
        threads=1,
    )
