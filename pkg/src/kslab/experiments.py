"""Experiment orchestration: config files (TOML or JSON), initial-data
presets, single runs with persisted artifacts, parameter sweeps, and
convergence studies.
"""

import concurrent.futures
import copy
import hashlib
import json
import math
import statistics
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import admissibility, diagnostics, solver
from .admissibility import AdmissibilityCertificate, c_const, certify, compute_eta
from .diagnostics import Monitor, RunReport
from .errors import KslabError, ValidationError
from .sensitivity import EnergyParams, SensitivityParams
from .solver import Grid, SimState, SolverConfig

__all__ = [
    "InitialSpec",
    "ExperimentConfig",
    "SweepSpec",
    "OrderReport",
    "parse_config",
    "config_from_dict",
    "config_digest",
    "initial_data",
    "run_experiment",
    "parse_sweep",
    "run_sweep",
    "convergence_study",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("t", "mass", "min_v", "linf_u", "lp_u", "energy", "residual", "dt")

PRESETS = ("uniform", "gaussian-bump", "two-bumps", "checker", "eigenmode")

_SWEEP_CAP = 4096

_REQUIRED = object()


@dataclass(frozen=True)
class InitialSpec:
    preset: str
    params: dict


@dataclass(frozen=True)
class ExperimentConfig:
    label: str
    sp: SensitivityParams
    grid: Grid
    initial: InitialSpec
    horizon: float
    cadence: int
    solver: SolverConfig
    n_effective: int
    out_dir: Optional[str]
    c_tol: float

    def to_dict(self) -> dict:
        """Canonical fully-defaulted nested dict (hashing, persistence)."""
        return {
            "label": self.label,
            "horizon": self.horizon,
            "cadence": self.cadence,
            "n_effective": self.n_effective,
            "out_dir": self.out_dir,
            "c_tol": self.c_tol,
            "sensitivity": {"K": self.sp.K, "k": self.sp.k, "a": self.sp.a},
            "grid": {
                "dim": self.grid.dim,
                "extents": list(self.grid.extents),
                "cells": list(self.grid.cells),
            },
            "initial": {"preset": self.initial.preset, **self.initial.params},
            "solver": {
                "cfl_diff": self.solver.cfl_diff,
                "cfl_adv": self.solver.cfl_adv,
                "dt_max": self.solver.dt_max,
                "dt_min": self.solver.dt_min,
                "flux_scheme": self.solver.flux_scheme,
                "v_stepping": self.solver.v_stepping,
                "u_diffusion_stepping": self.solver.u_diffusion_stepping,
                "cg_tol": self.solver.cg_tol,
                "cg_max_iter": self.solver.cg_max_iter,
                "debug_checks": self.solver.debug_checks,
            },
        }


def config_digest(config: ExperimentConfig) -> str:
    text = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# ---------------------------------------------------------------------------
# config parsing


class _Section:
    """Strict key reader: unknown keys are errors, defaults applied."""

    def __init__(self, data: dict, where: str):
        if not isinstance(data, dict):
            raise ValidationError(f"section '{where}' must be a table/object")
        self.data = dict(data)
        self.where = where

    def take(self, key, kind, default=_REQUIRED):
        if key not in self.data:
            if default is _REQUIRED:
                raise ValidationError(f"missing required key '{key}' in {self.where}")
            return default
        value = self.data.pop(key)
        if kind is bool:
            if not isinstance(value, bool):
                raise ValidationError(f"{self.where}.{key} must be a boolean")
            return value
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{self.where}.{key} must be a number")
            return float(value)
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValidationError(f"{self.where}.{key} must be an integer")
            return int(value)
        if kind is str:
            if not isinstance(value, str):
                raise ValidationError(f"{self.where}.{key} must be a string")
            return value
        if kind is list:
            if not isinstance(value, list):
                raise ValidationError(f"{self.where}.{key} must be a list")
            return value
        if kind is dict:
            if not isinstance(value, dict):
                raise ValidationError(f"{self.where}.{key} must be a table/object")
            return value
        raise AssertionError(kind)

    def finish(self):
        if self.data:
            key = sorted(self.data)[0]
            raise ValidationError(f"unknown key '{key}' in {self.where}")


def _float_list(values, where, length=None):
    if not isinstance(values, list) or (length is not None and len(values) != length):
        raise ValidationError(f"{where} must be a list of {length or 'N'} numbers")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"{where} must contain numbers only")
        out.append(float(v))
    return out


def _parse_initial(data: dict, dim: int) -> InitialSpec:
    sec = _Section(data, "initial")
    preset = sec.take("preset", str)
    if preset not in PRESETS:
        raise ValidationError(f"initial.preset must be one of {PRESETS}, got '{preset}'")
    params: dict = {}
    if preset == "uniform":
        params["u"] = sec.take("u", float)
        params["v"] = sec.take("v", float)
    elif preset in ("gaussian-bump", "two-bumps"):
        params["mass"] = sec.take("mass", float)
        params["width"] = sec.take("width", float)
        params["v0"] = sec.take("v0", float)
        if preset == "gaussian-bump":
            center = sec.take("center", list, None)
            if center is not None:
                center = _float_list(center, "initial.center", dim)
            params["center"] = center
        else:
            centers = sec.take("centers", list, None)
            if centers is not None:
                centers = [
                    _float_list(c, "initial.centers[i]", dim) for c in centers
                ]
                if len(centers) != 2:
                    raise ValidationError("initial.centers must hold two points")
            params["centers"] = centers
    elif preset == "checker":
        params["u_hi"] = sec.take("u_hi", float)
        params["u_lo"] = sec.take("u_lo", float, 0.0)
        params["blocks"] = sec.take("blocks", int, 4)
        params["v0"] = sec.take("v0", float)
    elif preset == "eigenmode":
        params["mean"] = sec.take("mean", float)
        params["amplitude"] = sec.take("amplitude", float)
        modes = sec.take("modes", list, None)
        params["modes"] = (
            [int(m) for m in modes] if modes is not None else [1] * dim
        )
        params["v0"] = sec.take("v0", float)
    sec.finish()
    return InitialSpec(preset=preset, params=params)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a raw nested dict into an ExperimentConfig."""
    top = _Section(data, "config")
    label = top.take("label", str)
    if not label or any(ch in label for ch in "/\\") or label in (".", ".."):
        raise ValidationError(f"label '{label}' is not a valid run name")
    horizon = top.take("horizon", float)
    if not horizon > 0.0:
        raise ValidationError("horizon must be > 0")
    cadence = top.take("cadence", int, 10)
    if cadence < 1:
        raise ValidationError("cadence must be >= 1")
    out_dir = top.take("out_dir", str, None)
    c_tol = top.take("c_tol", float, 10.0)
    if not c_tol > 0.0:
        raise ValidationError("c_tol must be > 0")

    sens = _Section(top.take("sensitivity", dict), "sensitivity")
    K = sens.take("K", float)
    k = sens.take("k", float, 1.0)
    a = sens.take("a", float, 0.0)
    sens.finish()
    if K < 0.0:
        raise ValidationError("sensitivity.K must satisfy K >= 0")
    sp = SensitivityParams(K=K, k=k, a=a)

    gsec = _Section(top.take("grid", dict), "grid")
    dim = gsec.take("dim", int)
    extents = tuple(_float_list(gsec.take("extents", list), "grid.extents", dim))
    cells = gsec.take("cells", list)
    if not all(isinstance(c, int) and not isinstance(c, bool) for c in cells):
        raise ValidationError("grid.cells must be integers")
    gsec.finish()
    grid = Grid(dim=dim, extents=extents, cells=tuple(cells))

    initial = _parse_initial(top.take("initial", dict), dim)

    ssec = _Section(top.take("solver", dict, {}), "solver")
    solver_cfg = SolverConfig(
        sp=sp,
        cfl_diff=ssec.take("cfl_diff", float, 0.9),
        cfl_adv=ssec.take("cfl_adv", float, 0.25),
        dt_max=ssec.take("dt_max", float, 0.01),
        dt_min=ssec.take("dt_min", float, 1e-12),
        flux_scheme=ssec.take("flux_scheme", str, "upwind"),
        v_stepping=ssec.take("v_stepping", str, "implicit-euler"),
        u_diffusion_stepping=ssec.take("u_diffusion_stepping", str, "implicit-euler"),
        cg_tol=ssec.take("cg_tol", float, 1e-10),
        cg_max_iter=ssec.take("cg_max_iter", int, 100_000),
        debug_checks=ssec.take("debug_checks", bool, False),
    )
    ssec.finish()
    if solver_cfg.dt_min > horizon:
        raise ValidationError("solver.dt_min exceeds the horizon; no step fits")

    n_effective = top.take("n_effective", int, dim)
    if n_effective < 1:
        raise ValidationError("n_effective must be >= 1")
    top.finish()

    return ExperimentConfig(
        label=label,
        sp=sp,
        grid=grid,
        initial=initial,
        horizon=horizon,
        cadence=cadence,
        solver=solver_cfg,
        n_effective=n_effective,
        out_dir=out_dir,
        c_tol=c_tol,
    )


def _load_structured(path: Path) -> dict:
    suffix = path.suffix.lower()
    text = path.read_bytes()
    if suffix == ".toml":
        try:
            return tomllib.loads(text.decode())
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"TOML parse error in {path}: {exc}") from exc
    if suffix == ".json":
        try:
            return json.loads(text.decode())
        except json.JSONDecodeError as exc:
            raise ValidationError(
                f"JSON parse error in {path} at line {exc.lineno}: {exc.msg}"
            ) from exc
    raise ValidationError(f"unsupported config extension '{suffix}' (use .toml or .json)")


def parse_config(path) -> ExperimentConfig:
    """Read and validate an experiment config file (.toml or .json)."""
    return config_from_dict(_load_structured(Path(path)))


# ---------------------------------------------------------------------------
# initial data presets


def _gaussian(grid: Grid, center: Sequence[float], width: float) -> np.ndarray:
    coords = grid.meshgrid()
    q = np.zeros(grid.shape)
    for x, c in zip(coords, center):
        q += (x - c) ** 2
    return np.exp(-q / (2.0 * width * width))


def _cell_averaged_cosine(grid: Grid, modes: Sequence[int]) -> np.ndarray:
    """Exact cell averages of prod_i cos(m_i pi x_i / L_i)."""
    out = np.ones(grid.shape)
    for axis, m in enumerate(modes):
        if m == 0:
            continue
        L = grid.extents[axis]
        h = grid.h[axis]
        x = grid.centers(axis)
        w = m * math.pi / L
        avg = (np.sin(w * (x + 0.5 * h)) - np.sin(w * (x - 0.5 * h))) / (w * h)
        shape = [1, 1]
        shape[axis] = grid.cells[axis]
        out = out * avg.reshape(shape)
    return out


def initial_data(spec: InitialSpec, grid: Grid, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Build (u0, v0) fields for a preset, enforcing the initial-data rules:
    u0 >= 0 and not identically zero; v0 strictly positive when a = 0,
    nonnegative and not identically zero when a > 0."""
    p = spec.params
    if spec.preset == "uniform":
        if not p["u"] > 0.0:
            raise ValidationError("uniform preset: u must be > 0 (density not identically zero)")
        u0 = grid.field(p["u"])
        v_floor = p["v"]
    elif spec.preset == "gaussian-bump":
        if not p["mass"] > 0.0 or not p["width"] > 0.0:
            raise ValidationError("gaussian-bump preset: mass and width must be > 0")
        center = p.get("center") or [0.5 * e for e in grid.extents]
        shape_fn = _gaussian(grid, center, p["width"])
        u0 = p["mass"] * shape_fn / (float(np.sum(shape_fn)) * grid.cellvol)
        v_floor = p["v0"]
    elif spec.preset == "two-bumps":
        if not p["mass"] > 0.0 or not p["width"] > 0.0:
            raise ValidationError("two-bumps preset: mass and width must be > 0")
        centers = p.get("centers") or [
            [0.3 * e for e in grid.extents],
            [0.7 * e for e in grid.extents],
        ]
        shape_fn = _gaussian(grid, centers[0], p["width"]) + _gaussian(
            grid, centers[1], p["width"]
        )
        u0 = p["mass"] * shape_fn / (float(np.sum(shape_fn)) * grid.cellvol)
        v_floor = p["v0"]
    elif spec.preset == "checker":
        if p["u_hi"] < p["u_lo"] or p["u_lo"] < 0.0 or not p["u_hi"] > 0.0:
            raise ValidationError("checker preset: need u_hi >= u_lo >= 0 and u_hi > 0")
        if p["blocks"] < 1:
            raise ValidationError("checker preset: blocks must be >= 1")
        parity = np.zeros(grid.shape, dtype=int)
        for axis in range(grid.dim):
            idx = (np.arange(grid.cells[axis]) * p["blocks"]) // grid.cells[axis]
            shape = [1, 1]
            shape[axis] = grid.cells[axis]
            parity = parity + idx.reshape(shape)
        u0 = np.where(parity % 2 == 0, p["u_hi"], p["u_lo"]).astype(float)
        v_floor = p["v0"]
    elif spec.preset == "eigenmode":
        if not p["mean"] > 0.0 or p["amplitude"] < 0.0 or p["amplitude"] >= p["mean"]:
            raise ValidationError(
                "eigenmode preset: need mean > 0 and 0 <= amplitude < mean"
            )
        u0 = p["mean"] + p["amplitude"] * _cell_averaged_cosine(grid, p["modes"])
        v_floor = p["v0"]
    else:
        raise ValidationError(f"unknown preset '{spec.preset}'")

    if a == 0.0:
        if not v_floor > 0.0:
            raise ValidationError(
                "initial signal must be strictly positive when a = 0 (singular case)"
            )
    else:
        if v_floor < 0.0 or not v_floor > 0.0:
            raise ValidationError("initial signal level must be positive")
    v0 = grid.field(v_floor)
    return u0, v0


# ---------------------------------------------------------------------------
# single runs


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_monitor_csv(samples, path: Path):
    lines = [",".join(CSV_COLUMNS)]
    for s in samples:
        lines.append(
            ",".join(
                _fmt(getattr(s, col)) for col in CSV_COLUMNS
            )
        )
    path.write_text("\n".join(lines) + "\n")


def _energy_monitor(cert: AdmissibilityCertificate, sp: SensitivityParams, cadence: int):
    sel = cert.selection
    if sel is None:
        return Monitor(cadence=cadence)
    if isinstance(sel, admissibility.SelectionKGt1):
        ep = EnergyParams(p=sel.p, r=sel.r0, eps=sel.eps, eta=cert.eta)
        r_sel = sel.r0
    else:
        ep = EnergyParams(p=sel.p, r=sel.r, eps=0.0, eta=cert.eta)
        r_sel = sel.r
    return Monitor(
        cadence=cadence,
        p=ep.p,
        energy=ep,
        sp=sp,
        c_const=c_const(sp, r_sel, cert.eta),
    )


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunReport:
    """Compute eta, certify, run, and persist certificate/monitors/summary.

    Artifacts land in ``out_dir`` (default: config.out_dir, else
    ``runs/<label>``): certificate.json, monitors.csv, summary.json.
    """
    out = Path(out_dir or config.out_dir or Path("runs") / config.label)
    out.mkdir(parents=True, exist_ok=True)

    u0, v0 = initial_data(config.initial, config.grid, config.sp.a)
    eta_est = compute_eta(
        v0_min=float(np.min(v0)),
        u0_mass=diagnostics.mass(u0, config.grid),
        diam=config.grid.diameter,
        n=config.grid.dim,
    )
    cert = certify(config.sp, config.n_effective, eta_est)
    monitor = _energy_monitor(cert, config.sp, config.cadence)

    initial = SimState(grid=config.grid, u=u0, v=v0)
    report = solver.run(initial, config.solver, config.horizon, monitor)

    (out / "certificate.json").write_text(
        json.dumps(cert.to_json_dict(), indent=2, sort_keys=True) + "\n"
    )
    write_monitor_csv(report.samples, out / "monitors.csv")

    samples = report.samples
    mass0 = samples[0].mass
    summary = {
        "label": config.label,
        "status": report.status,
        "detail": report.detail,
        "steps": report.steps,
        "threads": report.threads,
        "config_hash": config_digest(config),
        "eta": {"value": cert.eta, "mode": eta_est.mode, "tau_star": eta_est.tau_star},
        "certificate": {
            "threshold": cert.threshold,
            "margin": cert.margin,
            "admissible": cert.admissible,
            "branch": cert.branch,
            "notes": list(cert.notes),
        },
        "extrema": {
            "max_linf_u": max(s.linf_u for s in samples),
            "min_min_v": min(s.min_v for s in samples),
            "max_lp_u": max(s.lp_u for s in samples),
            "mass_rel_drift_max": max(abs(s.mass / mass0 - 1.0) for s in samples),
        },
        "margins": {
            "min_v_margin": min(s.min_v - cert.eta for s in samples),
            "admissibility_margin": cert.margin,
        },
        "timing": {"wall_time_s": report.wall_time_s},
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n"
    )
    return report


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    base: dict
    axes: Tuple[Tuple[str, tuple], ...]
    parallelism: int
    out_dir: Optional[str]


def parse_sweep(path) -> SweepSpec:
    data = _load_structured(Path(path))
    sec = _Section(data, "sweep")
    base = sec.take("base", dict)
    axes_raw = sec.take("axes", list, [])
    parallelism = sec.take("parallelism", int, 1)
    out_dir = sec.take("out_dir", str, None)
    sec.finish()
    if parallelism < 1:
        raise ValidationError("parallelism must be >= 1")
    axes = []
    for i, ax in enumerate(axes_raw):
        asec = _Section(ax, f"axes[{i}]")
        path_key = asec.take("path", str)
        values = asec.take("values", list)
        asec.finish()
        if not values:
            raise ValidationError(f"axes[{i}].values must be nonempty")
        axes.append((path_key, tuple(values)))
    size = math.prod(len(v) for _, v in axes) if axes else 1
    if size > _SWEEP_CAP:
        raise ValidationError(f"sweep size {size} exceeds the cap {_SWEEP_CAP}")
    return SweepSpec(base=base, axes=tuple(axes), parallelism=parallelism, out_dir=out_dir)


def _set_path(data: dict, dotted: str, value):
    # absent sections/keys are created; invalid key names are rejected by
    # the strict config validator afterwards
    parts = dotted.split(".")
    node = data
    for part in parts[:-1]:
        nxt = node.setdefault(part, {})
        if not isinstance(nxt, dict):
            raise ValidationError(f"sweep axis path '{dotted}' does not address a table")
        node = nxt
    node[parts[-1]] = value


def _expand_sweep(spec: SweepSpec) -> List[Tuple[ExperimentConfig, dict]]:
    combos: List[dict] = [{}]
    for path_key, values in spec.axes:
        combos = [dict(c, **{path_key: v}) for c in combos for v in values]
    runs = []
    labels = set()
    for combo in combos:
        raw = copy.deepcopy(spec.base)
        for path_key, value in combo.items():
            _set_path(raw, path_key, value)
        if combo:
            suffix = "__".join(
                f"{pk.split('.')[-1]}={_fmt(v)}" for pk, v in combo.items()
            )
            raw["label"] = f"{raw.get('label', 'run')}__{suffix}"
        config = config_from_dict(raw)
        if config.label in labels:
            raise ValidationError(f"duplicate run label '{config.label}' in sweep")
        labels.add(config.label)
        runs.append((config, combo))
    return runs


def _sweep_one(args):
    config, out_root = args
    out = Path(out_root) / config.label
    try:
        report = run_experiment(config, out_dir=out)
        samples = report.samples
        summary = json.loads((out / "summary.json").read_text())
        return {
            "status": report.status,
            "max_linf_u": max(s.linf_u for s in samples),
            "min_v_margin": summary["margins"]["min_v_margin"],
            "admissibility_margin": summary["margins"]["admissibility_margin"],
        }
    except KslabError as exc:
        return {
            "status": f"error: {exc}",
            "max_linf_u": math.nan,
            "min_v_margin": math.nan,
            "admissibility_margin": math.nan,
        }


def run_sweep(spec: SweepSpec, out_dir=None) -> Path:
    """Execute the cross product and write an index CSV; individual run
    failures are recorded in the index and do not abort the sweep."""
    out_root = Path(out_dir or spec.out_dir or "sweep")
    out_root.mkdir(parents=True, exist_ok=True)
    runs = _expand_sweep(spec)

    jobs = [(config, str(out_root)) for config, _ in runs]
    if spec.parallelism > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=spec.parallelism
        ) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(job) for job in jobs]

    axis_paths = [pk for pk, _ in spec.axes]
    header = ["label", *axis_paths, "status", "max_linf_u", "min_v_margin", "admissibility_margin"]
    lines = [",".join(header)]
    for (config, combo), result in zip(runs, results):
        row = [config.label]
        row += [_fmt(combo.get(pk, "")) for pk in axis_paths]
        row += [
            str(result["status"]).replace(",", ";"),
            _fmt(result["max_linf_u"]),
            _fmt(result["min_v_margin"]),
            _fmt(result["admissibility_margin"]),
        ]
        lines.append(",".join(row))
    index = out_root / "index.csv"
    index.write_text("\n".join(lines) + "\n")
    return index


# ---------------------------------------------------------------------------
# convergence studies


@dataclass(frozen=True)
class OrderReport:
    benchmark: str  # "heat" or "advection"
    cells: Tuple[int, ...]
    errors: Tuple[float, ...]
    orders: Tuple[float, ...]
    observed_order: float
    monotone: bool


def _restrict(fine: np.ndarray, dim: int) -> np.ndarray:
    """Conservative restriction: coarse cell = mean of its 2 (1D) or 4 (2D)
    fine children."""
    if dim == 1:
        return 0.5 * (fine[0::2] + fine[1::2])
    return 0.25 * (
        fine[0::2, 0::2] + fine[1::2, 0::2] + fine[0::2, 1::2] + fine[1::2, 1::2]
    )


def _level_config(config: ExperimentConfig, level: int) -> ExperimentConfig:
    factor = 2**level
    grid = Grid(
        dim=config.grid.dim,
        extents=config.grid.extents,
        cells=tuple(c * factor for c in config.grid.cells),
    )
    # tie the time step to the mesh so refinement drives both error terms:
    # dt ~ h^2 for the diffusion benchmark, dt ~ h for the drift benchmark
    dt_scale = 4.0**level if config.sp.K == 0.0 else 2.0**level
    solver_cfg = SolverConfig(
        sp=config.solver.sp,
        cfl_diff=config.solver.cfl_diff,
        cfl_adv=config.solver.cfl_adv,
        dt_max=config.solver.dt_max / dt_scale,
        dt_min=config.solver.dt_min,
        flux_scheme=config.solver.flux_scheme,
        v_stepping=config.solver.v_stepping,
        u_diffusion_stepping=config.solver.u_diffusion_stepping,
        cg_tol=config.solver.cg_tol,
        cg_max_iter=config.solver.cg_max_iter,
    )
    return ExperimentConfig(
        label=f"{config.label}-L{level}",
        sp=config.sp,
        grid=grid,
        initial=config.initial,
        horizon=config.horizon,
        cadence=config.cadence,
        solver=solver_cfg,
        n_effective=config.n_effective,
        out_dir=None,
        c_tol=config.c_tol,
    )


def _final_state(config: ExperimentConfig) -> SimState:
    u0, v0 = initial_data(config.initial, config.grid, config.sp.a)
    initial = SimState(grid=config.grid, u=u0, v=v0)
    monitor = Monitor(cadence=1_000_000_000)
    report = solver.run(initial, config.solver, config.horizon, monitor)
    if report.status != "completed":
        raise KslabError(f"benchmark run did not complete: {report.status}")
    return report.final_state


def convergence_study(config: ExperimentConfig, levels: int) -> OrderReport:
    """Observed order under h-halving on an eigenmode benchmark.

    K = 0: diffusion benchmark with the exact decaying-mode solution.
    K > 0: drift benchmark measured by self-convergence against the
    restriction of the next finer level. Needs at least 3 levels.
    """
    if levels < 3:
        raise ValidationError("convergence_study needs at least 3 levels")
    if config.initial.preset != "eigenmode":
        raise ValidationError("convergence_study requires the 'eigenmode' preset")

    finals = [_final_state(_level_config(config, lv)) for lv in range(levels)]

    errors: List[float] = []
    if config.sp.K == 0.0:
        benchmark = "heat"
        p = config.initial.params
        modes = p["modes"]
        for state in finals:
            grid = state.grid
            lam = sum(
                (m * math.pi / L) ** 2 for m, L in zip(modes, grid.extents)
            )
            exact = p["mean"] + p["amplitude"] * math.exp(
                -lam * config.horizon
            ) * _cell_averaged_cosine(grid, modes)
            errors.append(diagnostics.lp_norm(state.u - exact, grid, 2.0))
    else:
        benchmark = "advection"
        for coarse, fine in zip(finals[:-1], finals[1:]):
            fine_u = fine.u if config.grid.dim == 2 else fine.u[:, 0]
            restricted = _restrict(fine_u, config.grid.dim)
            if config.grid.dim == 1:
                restricted = restricted[:, None]
            errors.append(
                diagnostics.lp_norm(coarse.u - restricted, coarse.grid, 2.0)
            )

    orders = [
        math.log2(e0 / e1) if e1 > 0.0 else math.inf
        for e0, e1 in zip(errors[:-1], errors[1:])
    ]
    monotone = all(e0 > e1 for e0, e1 in zip(errors[:-1], errors[1:]))
    return OrderReport(
        benchmark=benchmark,
        cells=tuple(f.grid.cells[0] for f in finals),
        errors=tuple(errors),
        orders=tuple(orders),
        observed_order=statistics.median(orders),
        monotone=monotone,
    )
