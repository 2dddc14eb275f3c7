"""Time integration for the three evolution systems.

Two schemes:

* ``rk4``             -- classical four-stage Runge-Kutta on the full
                         right-hand side;
* ``rk4-exp-damping`` -- Strang splitting that applies the exact factor
                         exp(-nu dt/2) to the velocity (or momentum) before
                         and after an RK4 step on the damping-free remainder,
                         so stiff damping (nu dt >> 1, the overdamped regime)
                         stays stable and pure damping is integrated exactly.

Step control: a fixed dt, or an automatic one evaluated once from the
initial state by the advective CFL rule

    dt = cfl * dx / (flux_scale * (max|u| + max_x c_s(x) + sqrt(|lambda|))),

where c_s = sqrt(gamma) rho^((gamma-1)/2) is the sound speed and
sqrt(|lambda|) conservatively bounds the interaction phase speed (the
multiplier magnitude |n|^(alpha-d)/2 over resolved modes peaks at n = 1
since alpha < d).  The density-only overdamped flow instead uses the
parabolic bound of its diffusion term together with the measured transport
speed of its interaction flux.  The damping rate never enters: stiff runs
are expected to use the exponential splitting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Optional, Union

import numpy as np

from .diagnostics import EnergyReport, _k0_search, energy_report, select_mu
from .errors import (
    NumericalBlowup,
    ParameterError,
    PositivityViolation,
    VacuumState,
)
from .model import (
    DEFAULT_POSITIVITY_FLOOR,
    FpmState,
    Params,
    PrimitiveState,
    SymState,
    _kernels,
    _rhs_primitive_arrays,
    rhs_fpm,
    rhs_sym,
    to_sym,
)
from .spectral import Field, Grid, VectorField, sobolev_norm

__all__ = [
    "StepperConfig",
    "Trajectory",
    "step",
    "run",
    "cfl_dt",
    "integrate_at_times",
    "make_system",
    "SymSystem",
    "PrimitiveSystem",
    "FpmSystem",
]

State = Union[SymState, PrimitiveState, FpmState]

#: H^1 norm beyond which a run is declared blown up.
BLOWUP_THRESHOLD = 1e8


@dataclass
class StepperConfig:
    """Time-stepping knobs.

    dt            : fixed step, or None for the automatic CFL-based step
                    (evaluated once from the initial state).
    cfl           : Courant factor in (0, 1].
    t_end         : final time.
    positivity_floor : minimum admissible density.
    sample_every  : diagnostic cadence in steps.
    scheme        : "rk4" or "rk4-exp-damping".
    """

    t_end: float
    dt: Optional[float] = None
    scheme: str = "rk4-exp-damping"
    cfl: float = 0.4
    positivity_floor: float = DEFAULT_POSITIVITY_FLOOR
    sample_every: int = 1

    def __post_init__(self):
        if self.scheme not in ("rk4", "rk4-exp-damping"):
            raise ParameterError(f"unknown scheme {self.scheme!r}")
        if self.dt is not None and self.dt <= 0.0:
            raise ParameterError("fixed dt must be > 0")
        if not (0.0 < self.cfl <= 1.0):
            raise ParameterError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.t_end < 0.0:
            raise ParameterError("t_end must be >= 0")
        if self.sample_every < 1:
            raise ParameterError("sample_every must be >= 1")


@dataclass
class Trajectory:
    """Sampled diagnostics of one run, with optional state snapshots."""

    samples: list[EnergyReport] = dc_field(default_factory=list)
    states: list[tuple[float, State]] = dc_field(default_factory=list)
    mu_used: float = 0.0
    k0_used: int = 0
    dt_used: float = 0.0

    def append(self, report: EnergyReport) -> None:
        if self.samples and report.t <= self.samples[-1].t:
            raise ParameterError("trajectory times must be strictly increasing")
        self.samples.append(report)

    @property
    def ts(self) -> np.ndarray:
        return np.array([r.t for r in self.samples])

    def column(self, name: str) -> np.ndarray:
        if name == "norm_hu_Hm":
            return np.sqrt(
                self.column("norm_h_Hm") ** 2 + self.column("norm_u_Hm") ** 2
            )
        if name == "mc_abs":
            return np.array(
                [math.sqrt(sum(v * v for v in r.m_c)) for r in self.samples]
            )
        if name.startswith("mc_"):
            j = int(name.split("_", 1)[1])
            return np.array([r.m_c[j] for r in self.samples])
        return np.array([getattr(r, name) for r in self.samples])

    def series(self, name: str) -> list[tuple[float, float]]:
        vals = self.column(name)
        return list(zip(self.ts.tolist(), vals.tolist()))


# ---------------------------------------------------------------------------
# System adapters: pack states into one array and expose the split RHS.
# ---------------------------------------------------------------------------


class SymSystem:
    """Adapter for the symmetrized (h, u) system."""

    def __init__(self, p: Params, grid: Grid):
        self.p = p
        self.p_nodamp = replace(p, nu=0.0)
        self.grid = grid
        self.nu_eff = p.nu
        self.n_fields = 1 + grid.d

    def pack(self, s: SymState) -> np.ndarray:
        return np.stack([s.h.samples] + [c.samples for c in s.u.components])

    def unpack(self, y: np.ndarray, t: float) -> SymState:
        g = self.grid
        return SymState(
            Field(g, y[0]),
            VectorField(tuple(Field(g, y[1 + j]) for j in range(g.d))),
            t,
        )

    def _state(self, y: np.ndarray) -> SymState:
        return self.unpack(y, 0.0)

    def rhs(self, y: np.ndarray, p: Params) -> np.ndarray:
        dh, du = rhs_sym(self._state(y), p)
        return np.stack([dh.samples] + [c.samples for c in du.components])

    def rhs_full(self, y: np.ndarray) -> np.ndarray:
        return self.rhs(y, self.p)

    def rhs_nodamp(self, y: np.ndarray) -> np.ndarray:
        return self.rhs(y, self.p_nodamp)

    def damp(self, y: np.ndarray, factor: float) -> None:
        y[1:] *= factor

    def min_rho(self, y: np.ndarray) -> float:
        if self.p.logarithmic:
            return float(np.exp(y[0].min()))
        base = 1.0 + float(y[0].min()) / self.p.sigma
        return base**self.p.N if base > 0.0 else -1.0

    def h1_norm(self, y: np.ndarray) -> float:
        s = self._state(y)
        return math.sqrt(
            sobolev_norm(s.h, 1) ** 2
            + sum(sobolev_norm(c, 1) ** 2 for c in s.u.components)
        )

    def suggest_dt(self, y: np.ndarray, cfl: float) -> float:
        s = self._state(y)
        if self.p.logarithmic:
            rho = np.exp(s.h.samples)
        else:
            rho = (1.0 + s.h.samples / self.p.sigma) ** self.p.N
        return _advective_dt(self.grid, self.p, rho, s.u, cfl, 1.0)

    def sym_state(self, y: np.ndarray, t: float) -> SymState:
        return self.unpack(y, t)


class PrimitiveSystem:
    """Adapter for the primitive system in conservative variables (rho, q).

    ``flux_scale`` multiplies every flux uniformly and ``nu`` may be
    overridden; the overdamped rescaled system is this adapter with
    flux_scale = 1/eps and nu = 1/eps^2.
    """

    def __init__(
        self,
        p: Params,
        grid: Grid,
        flux_scale: float = 1.0,
        nu: Optional[float] = None,
        floor: float = DEFAULT_POSITIVITY_FLOOR,
    ):
        self.p = p if nu is None else replace(p, nu=nu)
        self.grid = grid
        self.flux_scale = flux_scale
        self.floor = floor
        self.nu_eff = self.p.nu
        self.n_fields = 1 + grid.d
        self._ker = _kernels(grid, p)

    def pack(self, s: PrimitiveState) -> np.ndarray:
        rho = s.rho.samples
        return np.stack([rho] + [rho * c.samples for c in s.u.components])

    def unpack(self, y: np.ndarray, t: float) -> PrimitiveState:
        g = self.grid
        rho = y[0]
        safe = np.maximum(rho, self.floor)
        u = VectorField(tuple(Field(g, y[1 + j] / safe) for j in range(g.d)))
        return PrimitiveState(Field(g, rho.copy()), u, t)

    def _rhs(self, y: np.ndarray, nu: float) -> np.ndarray:
        rho = y[0]
        if float(rho.min()) <= self.floor:
            raise VacuumState(
                f"min rho = {float(rho.min()):.3e} <= floor {self.floor:.1e}"
            )
        q = [y[1 + j] for j in range(self.grid.d)]
        p_eff = self.p if nu == self.p.nu else replace(self.p, nu=nu)
        drho, dq = _rhs_primitive_arrays(rho, q, p_eff, self._ker, self.flux_scale)
        return np.stack([drho.samples] + [c.samples for c in dq.components])

    def rhs_full(self, y: np.ndarray) -> np.ndarray:
        return self._rhs(y, self.p.nu)

    def rhs_nodamp(self, y: np.ndarray) -> np.ndarray:
        return self._rhs(y, 0.0)

    def damp(self, y: np.ndarray, factor: float) -> None:
        y[1:] *= factor

    def min_rho(self, y: np.ndarray) -> float:
        return float(y[0].min())

    def h1_norm(self, y: np.ndarray) -> float:
        s = self.unpack(y, 0.0)
        fluct = Field(self.grid, s.rho.samples - self.p.c)
        return math.sqrt(
            sobolev_norm(fluct, 1) ** 2
            + sum(sobolev_norm(c, 1) ** 2 for c in s.u.components)
        )

    def suggest_dt(self, y: np.ndarray, cfl: float) -> float:
        s = self.unpack(y, 0.0)
        return _advective_dt(
            self.grid, self.p, s.rho.samples, s.u, cfl, self.flux_scale
        )

    def sym_state(self, y: np.ndarray, t: float) -> SymState:
        return to_sym(self.unpack(y, t), self.p)


class FpmSystem:
    """Adapter for the overdamped density-only flow."""

    def __init__(self, p: Params, grid: Grid, floor: float = DEFAULT_POSITIVITY_FLOOR):
        self.p = p
        self.grid = grid
        self.floor = floor
        self.nu_eff = 0.0
        self.n_fields = 1

    def pack(self, s: FpmState) -> np.ndarray:
        return s.rho.samples[np.newaxis].copy()

    def unpack(self, y: np.ndarray, t: float) -> FpmState:
        return FpmState(Field(self.grid, y[0].copy()), t)

    def rhs_full(self, y: np.ndarray) -> np.ndarray:
        if float(y[0].min()) <= self.floor:
            raise VacuumState(
                f"min rho = {float(y[0].min()):.3e} <= floor {self.floor:.1e}"
            )
        out = rhs_fpm(Field(self.grid, y[0]), self.p)
        return out.samples[np.newaxis]

    rhs_nodamp = rhs_full

    def damp(self, y: np.ndarray, factor: float) -> None:
        pass  # no damped components

    def min_rho(self, y: np.ndarray) -> float:
        return float(y[0].min())

    def h1_norm(self, y: np.ndarray) -> float:
        return sobolev_norm(Field(self.grid, y[0] - self.p.c), 1)

    def suggest_dt(self, y: np.ndarray, cfl: float) -> float:
        p, grid = self.p, self.grid
        rho = y[0]
        # parabolic bound for the diffusion term under RK4 (real-axis limit 2.785)
        kc = grid.n_points / 3.0
        lam_max = p.gamma * float(np.max(rho ** (p.gamma - 1.0))) * grid.d * kc**2
        dt_diff = 2.785 / lam_max
        # transport bound from the measured interaction flux velocity
        from .model import riesz_force  # local import to avoid cycle at module load

        force = riesz_force(Field(grid, rho), p)
        vmax = force.max_abs()
        dt_adv = grid.spacing / vmax if vmax > 0 else math.inf
        return cfl * min(dt_diff, dt_adv)

    def sym_state(self, y: np.ndarray, t: float) -> SymState:
        prim = PrimitiveState(
            Field(self.grid, y[0].copy()), VectorField.zeros(self.grid), t
        )
        return to_sym(prim, self.p)


def _advective_dt(
    grid: Grid,
    p: Params,
    rho: np.ndarray,
    u: VectorField,
    cfl: float,
    flux_scale: float,
) -> float:
    u_max = u.max_abs()
    c_max = float(np.max(p.sound_speed(rho))) if p.include_pressure else 0.0
    v_riesz = math.sqrt(abs(p.lam))
    speed = flux_scale * (u_max + c_max + v_riesz)
    if speed <= 0.0:
        raise ParameterError("zero wave speed; supply a fixed dt")
    return cfl * grid.spacing / speed


def make_system(state: State, p: Params, floor: float = DEFAULT_POSITIVITY_FLOOR):
    """Pick the adapter matching the state representation."""
    if isinstance(state, SymState):
        return SymSystem(p, state.grid)
    if isinstance(state, PrimitiveState):
        return PrimitiveSystem(p, state.grid, floor=floor)
    if isinstance(state, FpmState):
        return FpmSystem(p, state.grid, floor=floor)
    raise ParameterError(f"unknown state type {type(state).__name__}")


def cfl_dt(state: State, p: Params, grid: Optional[Grid] = None, cfl: float = 0.4) -> float:
    """Automatic step from the documented CFL formula (see module docstring)."""
    grid = grid or state.grid
    system = make_system(state, p)
    return system.suggest_dt(system.pack(state), cfl)


def _rk4(system, y: np.ndarray, dt: float, full: bool) -> np.ndarray:
    f = system.rhs_full if full else system.rhs_nodamp
    k1 = f(y)
    k2 = f(y + (0.5 * dt) * k1)
    k3 = f(y + (0.5 * dt) * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_once(system, y: np.ndarray, dt: float, scheme: str) -> np.ndarray:
    if scheme == "rk4" or system.nu_eff == 0.0:
        return _rk4(system, y, dt, full=True)
    half = math.exp(-system.nu_eff * dt / 2.0)
    y = y.copy()
    system.damp(y, half)
    y = _rk4(system, y, dt, full=False)
    system.damp(y, half)
    return y


def _guard(system, y: np.ndarray, t: float, floor: float) -> None:
    m = float(np.max(np.abs(y)))
    if not math.isfinite(m):
        raise NumericalBlowup("state became non-finite", t)
    if m > BLOWUP_THRESHOLD:
        raise NumericalBlowup(f"sup norm {m:.3e} exceeds {BLOWUP_THRESHOLD:.0e}", t)
    if system.min_rho(y) < floor:
        raise PositivityViolation(
            f"min rho = {system.min_rho(y):.3e} below floor {floor:.1e}", t
        )


def step(state: State, p: Params, cfg: StepperConfig) -> State:
    """Advance one step of size cfg.dt (or the automatic CFL step)."""
    system = make_system(state, p, cfg.positivity_floor)
    y = system.pack(state)
    dt = cfg.dt if cfg.dt is not None else system.suggest_dt(y, cfg.cfl)
    try:
        y_new = _step_once(system, y, dt, cfg.scheme)
    except VacuumState as exc:
        raise PositivityViolation(str(exc), state.t) from exc
    t_new = state.t + dt
    _guard(system, y_new, t_new, cfg.positivity_floor)
    if system.h1_norm(y_new) > BLOWUP_THRESHOLD:
        raise NumericalBlowup("H^1 norm exceeds blowup threshold", t_new)
    return system.unpack(y_new, t_new)


def integrate_at_times(
    system,
    state0: State,
    times,
    scheme: str = "rk4",
    cfl: float = 0.4,
    dt: Optional[float] = None,
    floor: float = DEFAULT_POSITIVITY_FLOOR,
) -> list[State]:
    """Integrate and return the state at each requested time exactly.

    Each interval is covered by equal substeps no larger than the automatic
    (or supplied) step, so sample times are hit without interpolation.  Used
    by sweeps that compare trajectories of different systems at shared times.
    """
    y = system.pack(state0)
    t = state0.t
    out: list[State] = []
    for tk in times:
        if tk < t:
            raise ParameterError("requested times must be nondecreasing")
        span = tk - t
        if span > 0.0:
            base = dt if dt is not None else system.suggest_dt(y, cfl)
            n = max(1, math.ceil(span / base - 1e-9))
            sub = span / n
            for _ in range(n):
                try:
                    y = _step_once(system, y, sub, scheme)
                except VacuumState as exc:
                    raise PositivityViolation(str(exc), t) from exc
                t += sub
            t = tk
            _guard(system, y, t, floor)
        out.append(system.unpack(y, tk))
    return out


def run(
    state0: State,
    p: Params,
    cfg: StepperConfig,
    *,
    m: int = 3,
    mu: Optional[float] = None,
    snapshot_every: Optional[int] = None,
    system=None,
) -> Trajectory:
    """Advance to cfg.t_end, sampling diagnostics every ``sample_every`` steps.

    ``mu`` defaults to the auto-selected hypocoercivity weight of the initial
    state.  ``snapshot_every`` stores the state at every k-th sample (the
    first and final samples always included).  A prebuilt ``system`` adapter
    may be passed to integrate rescaled variants.  Deterministic for a fixed
    configuration and initial state.
    """
    system = system or make_system(state0, p, cfg.positivity_floor)
    y = system.pack(state0)
    t = state0.t

    if p.logarithmic or p.regime != "super-manev":
        k0 = 0
    else:
        k0 = _k0_search(p, m)[0]
    s_sym0 = system.sym_state(y, t)
    mu_used = select_mu(s_sym0, p, m, k0=k0) if mu is None else mu

    traj = Trajectory(mu_used=mu_used, k0_used=k0)
    traj.append(energy_report(s_sym0, p, m, mu_used, k0=k0))
    if snapshot_every is not None:
        traj.states.append((t, system.unpack(y, t)))

    if cfg.t_end <= state0.t:
        traj.dt_used = 0.0
        return traj

    dt = cfg.dt if cfg.dt is not None else system.suggest_dt(y, cfg.cfl)
    traj.dt_used = dt
    total = cfg.t_end - state0.t
    n_steps = max(1, math.ceil(total / dt - 1e-9))
    dt = total / n_steps  # land exactly on t_end

    sample_count = 0
    for i in range(1, n_steps + 1):
        try:
            y = _step_once(system, y, dt, cfg.scheme)
        except VacuumState as exc:
            raise PositivityViolation(str(exc), t) from exc
        t = state0.t + i * dt
        _guard(system, y, t, cfg.positivity_floor)
        if i % cfg.sample_every == 0 or i == n_steps:
            if system.h1_norm(y) > BLOWUP_THRESHOLD:
                raise NumericalBlowup("H^1 norm exceeds blowup threshold", t)
            sample_count += 1
            traj.append(energy_report(system.sym_state(y, t), p, m, mu_used, k0=k0))
            if snapshot_every is not None and (
                sample_count % snapshot_every == 0 or i == n_steps
            ):
                traj.states.append((t, system.unpack(y, t)))
    return traj
