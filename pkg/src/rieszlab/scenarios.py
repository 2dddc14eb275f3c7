"""Scenario orchestration and on-disk persistence.

Every scenario writes a per-run directory with

* ``timeseries.csv``  -- one diagnostic report per row, header naming every
  column, floats printed with 17 significant digits (byte-reproducible for a
  fixed config and seed);
* ``summary.json``    -- results, the resolved config echo, package versions,
  and the integral/transform conventions needed to interpret the numbers;
* ``snapshots/``      -- optional little-endian float64 rasters with a JSON
  sidecar carrying grid metadata (at most 64 per run).

Sweep scenarios fan runs out over processes; the bound is
min(--jobs, RIESZ_LAB_JOBS, number of tasks).
"""

from __future__ import annotations

import json
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig
from .diagnostics import (
    compute_constants,
    decay_fit,
    dispersion_roots,
)
from .errors import (
    InsufficientSamples,
    NonpositiveValue,
    RieszLabError,
    SteppingError,
)
from .initial import build_initial_state
from .model import FpmState, PrimitiveState, to_primitive
from .timestep import (
    FpmSystem,
    PrimitiveSystem,
    StepperConfig,
    Trajectory,
    integrate_at_times,
    run,
)

__all__ = [
    "scenario_simulate",
    "scenario_decay",
    "scenario_energy_audit",
    "scenario_relax_limit",
    "scenario_dispersion",
    "scenario_constants",
    "scenario_selftest",
    "SelftestReport",
    "write_trajectory",
    "max_parallel_jobs",
]

MAX_SNAPSHOTS = 64


# ---------------------------------------------------------------------------
# Persistence helpers.
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory(traj: Trajectory, directory: Path, d: int) -> Path:
    from .diagnostics import EnergyReport

    directory.mkdir(parents=True, exist_ok=True)
    path = directory / "timeseries.csv"
    lines = [",".join(EnergyReport.csv_header(d))]
    for report in traj.samples:
        lines.append(",".join(_fmt(v) for v in report.as_row()))
    path.write_text("\n".join(lines) + "\n")
    return path


def _check_finite(node, path="results"):
    if isinstance(node, dict):
        for k, v in node.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(node, (list, tuple)):
        for i, v in enumerate(node):
            _check_finite(v, f"{path}[{i}]")
    elif isinstance(node, float) and not math.isfinite(node):
        raise RieszLabError(f"non-finite value in summary at {path}")


def write_summary(cfg: RunConfig, results: dict, directory: Path) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    d = int(cfg.doc["grid"]["d"])
    _check_finite(results)
    payload = {
        "scenario": cfg.scenario,
        "package": {
            "name": "rieszlab",
            "version": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "conventions": {
            "domain": "[0, 2pi)^d",
            "volume": (2 * math.pi) ** d,
            "integrals": "unnormalized over the torus; the mean momentum of a "
            "uniform state carries the factor (2pi)^d",
            "velocity_modulation": "kinetic terms subtract m_c/mass; |m_c|^2 "
            "terms use the raw momentum",
            "transforms": "forward unnormalized, inverse carries 1/P^d",
            "rng": "Philox4x64-10 counter-based generator (numpy), "
            "lexicographic mode order, h before u, two normals per mode",
            "units": "nondimensional",
        },
        "config": cfg.doc,
        "results": results,
    }
    path = directory / "summary.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def write_snapshots(traj: Trajectory, directory: Path, limit: int) -> list[str]:
    if not traj.states or limit <= 0:
        return []
    snap_dir = directory / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    count = min(limit, MAX_SNAPSHOTS, len(traj.states))
    indices = np.unique(np.linspace(0, len(traj.states) - 1, count).astype(int))
    written = []
    for rank, idx in enumerate(indices):
        t, state = traj.states[idx]
        fields = _state_fields(state)
        sidecar = {
            "t": t,
            "dtype": "<f8",
            "order": "C",
            "d": state.grid.d,
            "n_points": state.grid.n_points,
            "fields": [],
        }
        for name, samples in fields:
            fname = f"snap_{rank:04d}_{name}.f64"
            (snap_dir / fname).write_bytes(
                np.ascontiguousarray(samples, dtype="<f8").tobytes()
            )
            sidecar["fields"].append({"name": name, "file": fname})
            written.append(fname)
        (snap_dir / f"snap_{rank:04d}.json").write_text(
            json.dumps(sidecar, indent=2) + "\n"
        )
    return written


def _state_fields(state):
    from .model import FpmState, PrimitiveState, SymState

    if isinstance(state, SymState):
        pairs = [("h", state.h.samples)]
        pairs += [(f"u{j}", c.samples) for j, c in enumerate(state.u.components)]
    elif isinstance(state, PrimitiveState):
        pairs = [("rho", state.rho.samples)]
        pairs += [(f"u{j}", c.samples) for j, c in enumerate(state.u.components)]
    elif isinstance(state, FpmState):
        pairs = [("rho", state.rho.samples)]
    else:  # pragma: no cover
        raise RieszLabError(f"unknown state type {type(state).__name__}")
    return pairs


def max_parallel_jobs(requested: Optional[int], n_tasks: int) -> int:
    cap = os.environ.get("RIESZ_LAB_JOBS")
    bound = n_tasks
    if requested is not None:
        bound = min(bound, max(1, requested))
    if cap is not None:
        try:
            bound = min(bound, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, min(bound, os.cpu_count() or 1))


# ---------------------------------------------------------------------------
# simulate / decay
# ---------------------------------------------------------------------------


def _trajectory_results(traj: Trajectory) -> dict:
    mass = traj.column("mass")
    results = {
        "t_final": float(traj.ts[-1]),
        "dt_used": traj.dt_used,
        "mu_used": traj.mu_used,
        "k0_used": traj.k0_used,
        "n_samples": len(traj.samples),
        # initial norms make the small-data hypothesis auditable
        "initial_norm_h_Hm": float(traj.column("norm_h_Hm")[0]),
        "initial_norm_u_Hm": float(traj.column("norm_u_Hm")[0]),
        "final_norm_h_Hm": float(traj.column("norm_h_Hm")[-1]),
        "final_norm_u_Hm": float(traj.column("norm_u_Hm")[-1]),
        "final_E": float(traj.column("E")[-1]),
        "final_L": float(traj.column("L")[-1]),
        "max_neutrality_residual": float(traj.column("neutrality_residual").max()),
        "mass_drift_rel": float(np.max(np.abs(mass - mass[0])) / abs(mass[0])),
        "min_rho_over_run": float(traj.column("min_rho").min()),
    }
    return results


def _fit_or_none(series, **kw):
    try:
        rate, r2 = decay_fit(series, **kw)
        return {"rate": rate, "r_squared": r2}
    except (NonpositiveValue, InsufficientSamples) as exc:
        return {"error": str(exc)}


def scenario_simulate(cfg: RunConfig) -> dict:
    """Run one trajectory and persist its time series, summary, snapshots."""
    grid = cfg.grid()
    p = cfg.params()
    state0 = build_initial_state(cfg.initial_spec(), grid, p)
    want_snaps = cfg.snapshot_count > 0
    traj = run(
        state0,
        p,
        cfg.stepper(),
        m=cfg.diag_m,
        mu=cfg.diag_mu,
        snapshot_every=1 if want_snaps else None,
    )
    results = _trajectory_results(traj)
    results["fit_norm_hu_Hm"] = _fit_or_none(traj.series("norm_hu_Hm"))
    out = cfg.output_dir
    write_trajectory(traj, out, grid.d)
    if want_snaps:
        results["snapshots_written"] = len(
            write_snapshots(traj, out, cfg.snapshot_count)
        )
    write_summary(cfg, results, out)
    return results


def scenario_decay(cfg: RunConfig) -> dict:
    """Simulate, then fit exponential decay rates of the norm columns."""
    grid = cfg.grid()
    p = cfg.params()
    state0 = build_initial_state(cfg.initial_spec(), grid, p)
    traj = run(
        state0,
        p,
        cfg.stepper(),
        m=cfg.diag_m,
        mu=cfg.diag_mu,
        snapshot_every=1,
    )
    results = _trajectory_results(traj)

    results["fit_norm_hu_Hm"] = _fit_or_none(traj.series("norm_hu_Hm"))
    # L^2 norm of the pair, reconstructed from the stored states
    l2_series = []
    for t, state in traj.states:
        sym = state if not hasattr(state, "rho") else None
        if sym is None:
            from .model import to_sym

            sym = to_sym(state, p)
        val = math.sqrt(
            sym.h.l2_norm() ** 2 + sum(c.l2_norm() ** 2 for c in sym.u.components)
        )
        l2_series.append((t, val))
    results["fit_norm_hu_L2"] = _fit_or_none(l2_series)
    mc = traj.column("mc_abs")
    if np.all(mc > 0):
        results["fit_mc"] = _fit_or_none(traj.series("mc_abs"))

    out = cfg.output_dir
    write_trajectory(traj, out, grid.d)
    if cfg.snapshot_count > 0:
        results["snapshots_written"] = len(
            write_snapshots(traj, out, cfg.snapshot_count)
        )
    write_summary(cfg, results, out)
    return results


# ---------------------------------------------------------------------------
# energy audit
# ---------------------------------------------------------------------------


def energy_identity_residual(
    traj: Trajectory, dt_sample: float, order: int = 2
) -> float:
    """Max |dE/dt + D| along a trajectory sampled every step.

    order 2 uses the 3-point centered difference (truncation O(dt^2)); order
    4 the 5-point one, whose truncation is negligible next to the dealiasing
    floor, so it measures the floor itself.
    """
    E = traj.column("E")
    D = traj.column("D")
    if order == 2:
        dE = (E[2:] - E[:-2]) / (2.0 * dt_sample)
        return float(np.max(np.abs(dE + D[1:-1])))
    dE = (-E[4:] + 8 * E[3:-1] - 8 * E[1:-3] + E[:-4]) / (12.0 * dt_sample)
    return float(np.max(np.abs(dE + D[2:-2])))


def scenario_energy_audit(cfg: RunConfig) -> dict:
    """Convergence audit of the exact dissipation identity d/dt E + D = 0.

    Runs the configured state at each dt in audit.dts (plain rk4, sampling
    every step), reports the centered-difference residual per dt, the
    halving ratio, and the dealiasing floor measured with a 4th-order
    stencil at the smallest dt.
    """
    grid = cfg.grid()
    p = cfg.params()
    state0 = build_initial_state(cfg.initial_spec(), grid, p)
    dts = sorted(cfg.audit_dts, reverse=True)
    t_end = cfg.audit_t_end

    rows = []
    floor = None
    for dt in dts:
        step_cfg = StepperConfig(
            t_end=t_end, dt=dt, scheme="rk4", sample_every=1
        )
        traj = run(state0, p, step_cfg, m=cfg.diag_m, mu=cfg.diag_mu)
        resid = energy_identity_residual(traj, dt, order=2)
        rows.append({"dt": dt, "residual": resid})
        if dt == dts[-1]:
            floor = energy_identity_residual(traj, dt, order=4)

    ratios = [
        rows[i]["residual"] / rows[i + 1]["residual"] for i in range(len(rows) - 1)
    ]
    results = {
        "residuals": rows,
        "halving_ratios": ratios,
        "aliasing_floor": floor,
        "above_floor": [bool(r["residual"] > 4.0 * floor) for r in rows],
    }
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = ["dt,residual"] + [f"{_fmt(r['dt'])},{_fmt(r['residual'])}" for r in rows]
    (out / "audit.csv").write_text("\n".join(lines) + "\n")
    write_summary(cfg, results, out)
    return results


# ---------------------------------------------------------------------------
# relaxation limit
# ---------------------------------------------------------------------------


def _relax_worker(args) -> dict:
    (doc, eps, rho0_bytes, shape, times, floor) = args
    cfg = RunConfig(doc)
    grid = cfg.grid()
    p = cfg.params()
    from .spectral import Field, VectorField

    rho0 = Field(grid, np.frombuffer(rho0_bytes, dtype="<f8").reshape(shape).copy())
    p_eps = replace(p, nu=1.0 / eps**2)
    system = PrimitiveSystem(p_eps, grid, flux_scale=1.0 / eps, floor=floor)
    state0 = PrimitiveState(rho0, VectorField.zeros(grid))
    try:
        states = integrate_at_times(
            system, state0, times, scheme="rk4-exp-damping", cfl=cfg.stepper().cfl
        )
        rhos = [s.rho.samples.tobytes() for s in states]
        return {"eps": eps, "status": "ok", "rhos": rhos}
    except SteppingError as exc:
        return {"eps": eps, "status": f"unstable: {exc}", "rhos": None}


def scenario_relax_limit(
    cfg: RunConfig, eps_list: Optional[list[float]] = None, jobs: Optional[int] = None
) -> dict:
    """Overdamped-limit sweep: for each eps, integrate the rescaled system
    (fluxes scaled by 1/eps, damping 1/eps^2) and compare the density with
    the overdamped reference started from the same initial density.

    Emits a table of (eps, max_{t<=T} ||rho_eps - rho_ref||_{L2}); per-eps
    instabilities are reported in the status column without aborting the
    sweep.
    """
    grid = cfg.grid()
    p = cfg.params()
    eps_list = eps_list if eps_list is not None else cfg.relax_eps
    t_end = cfg.relax_t_end
    n_samples = cfg.relax_samples
    times = [t_end * (k + 1) / n_samples for k in range(n_samples)]
    floor = cfg.stepper().positivity_floor

    state0 = build_initial_state(cfg.initial_spec(), grid, p)
    rho0 = to_primitive(state0, p).rho

    ref_system = FpmSystem(p, grid, floor=floor)
    ref_states = integrate_at_times(
        ref_system, FpmState(rho0.copy()), times, scheme="rk4", cfl=cfg.stepper().cfl
    )
    ref = [s.rho.samples for s in ref_states]

    tasks = [
        (cfg.doc, eps, rho0.samples.astype("<f8").tobytes(), grid.shape, times, floor)
        for eps in eps_list
    ]
    n_jobs = max_parallel_jobs(jobs, len(tasks))
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_relax_worker, tasks))
    else:
        outcomes = [_relax_worker(t) for t in tasks]

    cell = grid.cell_volume
    table = []
    for outcome in outcomes:
        if outcome["status"] == "ok":
            errs = [
                float(np.sqrt(np.sum((np.frombuffer(r, dtype="<f8").reshape(grid.shape) - rf) ** 2) * cell))
                for r, rf in zip(outcome["rhos"], ref)
            ]
            table.append(
                {"eps": outcome["eps"], "max_l2_error": max(errs), "status": "ok"}
            )
        else:
            table.append(
                {"eps": outcome["eps"], "max_l2_error": None, "status": outcome["status"]}
            )

    ok_rows = [r for r in table if r["status"] == "ok"]
    decreasing = all(
        ok_rows[i]["max_l2_error"] > ok_rows[i + 1]["max_l2_error"]
        for i in range(len(ok_rows) - 1)
    )
    results = {
        "table": table,
        "strictly_decreasing": bool(decreasing and len(ok_rows) == len(table)),
        "t_end": t_end,
        "n_sample_times": n_samples,
    }
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    lines = ["eps,max_l2_error,status"]
    for r in table:
        err = "" if r["max_l2_error"] is None else _fmt(r["max_l2_error"])
        lines.append(f"{_fmt(r['eps'])},{err},{r['status']}")
    (out / "table.csv").write_text("\n".join(lines) + "\n")
    summary_results = {
        "table": [
            {k: (v if v is not None else "unstable") for k, v in r.items()}
            for r in table
        ],
        "strictly_decreasing": results["strictly_decreasing"],
        "t_end": t_end,
        "n_sample_times": n_samples,
    }
    write_summary(cfg, summary_results, out)
    return results


# ---------------------------------------------------------------------------
# dispersion / constants
# ---------------------------------------------------------------------------


def scenario_dispersion(cfg: RunConfig) -> dict:
    """Tabulate the linearized mode frequencies with and without pressure."""
    p = cfg.params()
    rows = []
    for n in cfg.dispersion_modes:
        with_p = dispersion_roots(n, replace(p, include_pressure=True))
        without_p = dispersion_roots(n, replace(p, include_pressure=False))
        rows.append(
            {
                "n": n,
                "with_pressure": [[z.real, z.imag] for z in with_p],
                "without_pressure": [[z.real, z.imag] for z in without_p],
                "max_growth_without_pressure": max(z.real for z in without_p),
            }
        )
    results = {"modes": rows}
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_summary(cfg, results, out)
    return results


def scenario_constants(cfg: RunConfig, m: Optional[int] = None) -> dict:
    """Evaluate the iteration constants for the configured parameters."""
    report = compute_constants(cfg.params(), m if m is not None else cfg.diag_m, cfg.c_d)
    results = report.as_dict()
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_summary(cfg, results, out)
    return results


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------


class SelftestReport:
    def __init__(self):
        self.results: list[tuple[str, bool, str]] = []

    def record(self, name: str, ok: bool, detail: str = ""):
        self.results.append((name, ok, detail))

    @property
    def n_checks(self) -> int:
        return len(self.results)

    @property
    def failures(self) -> list[tuple[str, bool, str]]:
        return [r for r in self.results if not r[1]]

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        out = []
        for name, ok, detail in self.results:
            status = "PASS" if ok else "FAIL"
            suffix = f"  ({detail})" if detail and not ok else ""
            out.append(f"{status} {name}{suffix}")
        out.append(
            f"{'PASS' if self.ok else 'FAIL'}: {self.n_checks - len(self.failures)}"
            f"/{self.n_checks} checks passed"
        )
        return out


def scenario_selftest(sabotage: Optional[str] = None) -> SelftestReport:
    """Run the built-in oracle suite (fast, deterministic, > 30 checks).

    ``sabotage`` names a check whose comparison is deliberately corrupted;
    it exists so the harness can prove it catches a wrong answer.
    """
    from . import selftest as _selftest

    return _selftest.run_all(sabotage=sabotage)
