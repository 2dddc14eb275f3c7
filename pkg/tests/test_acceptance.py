"""Acceptance gate: one test per criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail line
per criterion (the lines also appear in captured output on plain runs).
"""

import functools
import math

import numpy as np
import pytest

from rieszlab.diagnostics import (
    compute_constants,
    compute_f,
    decay_fit,
    dispersion_roots,
)
from rieszlab.initial import InitialConditionSpec, build_initial_state
from rieszlab.model import Params, PrimitiveState, to_primitive, to_sym
from rieszlab.spectral import (
    Field,
    Grid,
    VectorField,
    dealias,
    fractional_power,
    gradient,
    green_potential,
    seminorm,
    sobolev_norm,
)
from rieszlab.timestep import StepperConfig, run


def criterion(tag: str):
    """Print the per-criterion verdict line after the body runs (or fails)."""

    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"{tag}: FAIL")
                raise
            print(f"{tag}: PASS")

        return wrapper

    return deco


# ---------------------------------------------------------------------------
# shared runs
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def a2_run():
    """The canonical small-data decay run shared by A2, A3, and A10.

    d = 1, P = 128, gamma = 2, nu = 1, lambda = 0.05, alpha = 0.5,
    single-mode amplitude 1e-2 on h, uniform mean 1e-2 on u, m = 3, T = 20,
    sampled every ~0.05 time units.
    """
    p = Params(gamma=2.0, nu=1.0, lam=0.05, alpha=0.5, d=1)
    g = Grid(1, 128)
    spec = InitialConditionSpec(
        family="single-mode", amplitude=1e-2, mode=1, u_mean=1e-2
    )
    s0 = build_initial_state(spec, g, p)
    cfg = StepperConfig(t_end=20.0, dt=None, cfl=0.4, sample_every=4)
    return p, run(s0, p, cfg, m=3)


# ---------------------------------------------------------------------------
# A1: spectral operators vs naive direct summation
# ---------------------------------------------------------------------------


def _direct_modes(p_pts: int, d: int):
    modes = np.fft.fftfreq(p_pts) * p_pts
    grids = np.meshgrid(*[np.arange(p_pts)] * d, indexing="ij")
    xs = [gg * (2 * np.pi / p_pts) for gg in grids]
    return modes, xs


def _direct_apply(samples: np.ndarray, symbol_of_n) -> np.ndarray:
    """O(P^{2d}) direct summation: forward sums, symbol, inverse sums."""
    p_pts = samples.shape[0]
    d = samples.ndim
    modes, xs = _direct_modes(p_pts, d)
    out = np.zeros(samples.shape, dtype=complex)
    for idx in np.ndindex(samples.shape):
        n = np.array([modes[i] for i in idx])
        phase = sum(nj * xj for nj, xj in zip(n, xs))
        coeff = np.sum(samples * np.exp(-1j * phase))
        out += symbol_of_n(n) * coeff * np.exp(1j * phase)
    return (out / p_pts**d).real


@criterion("A1 spectral-oracle-equivalence")
def test_a1_direct_summation_equivalence():
    rng = np.random.default_rng(2024)
    for d in (1, 2):
        g = Grid(d, 16)
        f = dealias(Field(g, rng.standard_normal(g.shape)))
        f = Field(g, f.samples - f.samples.mean())
        scale = f.max_abs()

        for s in (-0.5, 0.7, 1.0, 2.0):
            ours = fractional_power(f, s)
            ref = _direct_apply(
                f.samples,
                lambda n, s=s: 0.0 if not n.any() else np.linalg.norm(n) ** s,
            )
            assert np.max(np.abs(ours.samples - ref)) <= 1e-12 * scale

        grad = gradient(f)
        for j in range(d):
            ref = _direct_apply(
                f.samples, lambda n, j=j: 1j * n[j] if abs(n[j]) < 8 else 0.0
            )
            assert np.max(np.abs(grad[j].samples - ref)) <= 1e-12 * scale

        pot = green_potential(f)
        ref = _direct_apply(
            f.samples,
            lambda n: 0.0 if not n.any() else 1.0 / float(n @ n),
        )
        assert np.max(np.abs(pot.samples - ref)) <= 1e-12 * scale


# ---------------------------------------------------------------------------
# A2/A3/A10: the canonical decay run
# ---------------------------------------------------------------------------


@criterion("A2 small-data-exponential-decay")
def test_a2_hm_decay_rate(a2_run):
    _, traj = a2_run
    rate, r_squared = decay_fit(traj.series("norm_hu_Hm"))
    assert rate > 0.05
    assert r_squared > 0.99


@criterion("A3 momentum-decay-law")
def test_a3_mc_exponential_law(a2_run):
    p, traj = a2_run
    mc = traj.column("mc_0")
    assert abs(mc[0]) > 0  # u0 carries a nonzero mean
    err = np.max(np.abs(mc - mc[0] * np.exp(-p.nu * traj.ts)))
    assert err <= 1e-6 * abs(mc[0])


@criterion("A10 lyapunov-monotonicity")
def test_a10_x_m_nonincreasing(a2_run):
    _, traj = a2_run
    xm = traj.column("X_m")
    post = slice(len(xm) // 5, None)  # post-transient window
    vals = xm[post]
    increases = np.diff(vals) - 1e-10 * np.abs(vals[:-1])
    assert np.all(increases <= 0)


# ---------------------------------------------------------------------------
# A4: energy identity residual convergence
# ---------------------------------------------------------------------------


@criterion("A4 energy-identity-residual")
def test_a4_residual_halving():
    p = Params(gamma=2.0, nu=1.0, lam=0.05, alpha=1.5, d=2)
    g = Grid(2, 64)
    spec = InitialConditionSpec(
        family="random-band", amplitude=0.3, kmax=4, seed=11, apply_to="both",
        u_mean=0.02,
    )
    s0 = build_initial_state(spec, g, p)

    def residual(dt, order=2):
        cfg = StepperConfig(t_end=0.25, dt=dt, scheme="rk4", sample_every=1)
        traj = run(s0, p, cfg, m=3)
        E, D = traj.column("E"), traj.column("D")
        if order == 2:
            dE = (E[2:] - E[:-2]) / (2 * dt)
            return float(np.max(np.abs(dE + D[1:-1])))
        dE = (-E[4:] + 8 * E[3:-1] - 8 * E[1:-3] + E[:-4]) / (12 * dt)
        return float(np.max(np.abs(dE + D[2:-2])))

    r_coarse = residual(1e-3)
    r_fine = residual(5e-4)
    floor = residual(5e-4, order=4)  # truncation-free stencil measures the floor
    print(
        f"  residuals {r_coarse:.3e} -> {r_fine:.3e} "
        f"(ratio {r_coarse / r_fine:.2f}), aliasing floor {floor:.3e}"
    )
    assert r_fine > floor  # both measurements sit above the floor
    assert r_coarse / r_fine >= 3.5


# ---------------------------------------------------------------------------
# A5: formulation equivalence
# ---------------------------------------------------------------------------


@criterion("A5 formulation-equivalence")
def test_a5_primitive_vs_symmetric():
    p = Params(gamma=2.0, nu=1.0, lam=0.05, alpha=0.5, d=1)
    g = Grid(1, 64)
    spec = InitialConditionSpec(
        family="single-mode", amplitude=0.05, mode=1, apply_to="both", u_mean=0.02
    )
    s0 = build_initial_state(spec, g, p)
    prim0 = to_primitive(s0, p)
    cfg = StepperConfig(t_end=0.1, dt=1e-4, scheme="rk4", sample_every=10**6)
    sym_T = run(s0, p, cfg, m=1, snapshot_every=1).states[-1][1]
    prim_T = run(prim0, p, cfg, m=1, snapshot_every=1).states[-1][1]
    converted = to_sym(prim_T, p)
    dh = Field(g, converted.h.samples - sym_T.h.samples)
    du = Field(g, converted.u[0].samples - sym_T.u[0].samples)
    err = math.sqrt(sobolev_norm(dh, 1) ** 2 + sobolev_norm(du, 1) ** 2)
    assert err <= 1e-6


# ---------------------------------------------------------------------------
# A6: relaxation limit
# ---------------------------------------------------------------------------


@criterion("A6 relaxation-limit")
def test_a6_overdamped_convergence(tmp_path):
    from rieszlab.config import RunConfig
    from rieszlab.scenarios import scenario_relax_limit

    cfg = RunConfig.from_file(
        None,
        [
            f'output_dir="{tmp_path}"',
            "params.gamma=2.0",
            "params.lambda=0.02",
            "params.alpha=0.5",
            "grid.d=1",
            "grid.n_points=128",
            'initial.family="gaussian-bump"',
            "initial.amplitude=0.25",
            "initial.width=0.6",
            "relax_limit.eps=[0.2, 0.1, 0.05]",
            "relax_limit.t_end=1.0",
            "relax_limit.samples=20",
        ],
        scenario="relax-limit",
    )
    results = scenario_relax_limit(cfg, jobs=1)
    errs = [row["max_l2_error"] for row in results["table"]]
    print(f"  eps errors: {['%.3e' % e for e in errs]}")
    assert all(row["status"] == "ok" for row in results["table"])
    assert errs[0] > errs[1] > errs[2] > 0
    assert results["strictly_decreasing"]


# ---------------------------------------------------------------------------
# A7: constants calculator
# ---------------------------------------------------------------------------


@criterion("A7 constants-calculator")
def test_a7_constants():
    p2 = Params(gamma=2.0, nu=1.0, lam=0.1, alpha=1.5, d=2)
    rep = compute_constants(p2, m=3, C_d=1.5)
    assert rep.k_0 == 2
    assert abs(rep.C_0 - 1.5 / math.sqrt(2.0)) <= 1e-12

    cases = 0
    for d in (1, 2, 3):
        lo = max(d - 2, 0)
        for alpha in np.linspace(lo + 1e-3, d - 1e-3, 7):
            p = Params(gamma=2.0, nu=1.0, lam=0.1, alpha=float(alpha), d=d)
            expected = "super-manev" if alpha > d - 1 else "sub-manev"
            assert p.regime == expected
            cases += 1
    assert cases >= 20


# ---------------------------------------------------------------------------
# A8: pressure potential
# ---------------------------------------------------------------------------


@criterion("A8 pressure-potential")
def test_a8_f_function():
    for r in np.linspace(0.05, 4.0, 100):
        assert abs(compute_f(2.0, float(r), 1.0) - (r - 1.0) ** 2) <= 1e-12
    for gam in (1.0, 1.5, 2.0, 3.0):
        for r in np.linspace(0.1, 3.0, 40):
            if abs(r - 1.0) < 1e-6:
                continue
            val = compute_f(gam, float(r), 1.0)
            ratio = val / (r - 1.0) ** 2
            assert 1e-6 < ratio < 1e6  # finite sandwich constants


# ---------------------------------------------------------------------------
# A9: Sobolev ordering
# ---------------------------------------------------------------------------


@criterion("A9 sobolev-ordering")
def test_a9_seminorm_ordering():
    rng = np.random.default_rng(99)
    checked = 0
    for trial in range(200):
        d = 1 if trial % 2 == 0 else 2
        g = Grid(d, 32 if d == 1 else 16)
        f = Field(g, rng.standard_normal(g.shape))
        f = Field(g, f.samples - f.samples.mean())
        s1, s2 = np.sort(rng.uniform(-1.0, 3.0, size=2))
        assert seminorm(f, float(s1)) <= seminorm(f, float(s2)) + 1e-12
        checked += 1
    assert checked == 200


# ---------------------------------------------------------------------------
# A11: instability mechanism
# ---------------------------------------------------------------------------


@criterion("A11 instability-mechanism")
def test_a11_pressureless_growth_and_pressure_control():
    g = Grid(1, 64)
    x = g.coordinates()[0]
    rho0 = Field(g, 1.0 + 1e-6 * np.cos(8 * x))

    # growth phase: pressure disabled, lambda = 0.1, nu = 0
    p_off = Params(
        gamma=2.0, nu=0.0, lam=0.1, alpha=0.5, d=1, include_pressure=False
    )
    s0 = PrimitiveState(rho0.copy(), VectorField.zeros(g))
    cfg = StepperConfig(t_end=5.0, dt=1e-2, scheme="rk4", sample_every=5)
    traj = run(s0, p_off, cfg, m=3)
    rate, r_squared = decay_fit(traj.series("norm_h_Hm"))
    growth = -rate  # decay_fit returns minus the log-slope
    predicted = max(z.real for z in dispersion_roots(8.0, p_off))
    print(f"  growth {growth:.4f} vs dispersion {predicted:.4f} (r2={r_squared:.4f})")
    assert growth > 0
    assert abs(growth - predicted) <= 0.10 * predicted

    # control: pressure restored (damping nu = 1 supplies the decay route)
    p_on = Params(gamma=2.0, nu=1.0, lam=0.1, alpha=0.5, d=1)
    traj_on = run(
        PrimitiveState(rho0.copy(), VectorField.zeros(g)),
        p_on,
        StepperConfig(t_end=5.0, dt=1e-2, scheme="rk4", sample_every=5),
        m=3,
    )
    norms = traj_on.column("norm_h_Hm")
    rate_on, _ = decay_fit(traj_on.series("norm_h_Hm"))
    assert rate_on > 0
    assert norms[-1] < 0.2 * norms[0]


# ---------------------------------------------------------------------------
# A12: L2-level decay at moderate amplitude
# ---------------------------------------------------------------------------


@criterion("A12 l2-decay-moderate-amplitude")
def test_a12_l2_decay():
    p = Params(gamma=2.0, nu=1.0, lam=0.05, alpha=1.5, d=2)
    g = Grid(2, 64)
    spec = InitialConditionSpec(
        family="random-band", amplitude=0.3 * p.sigma, kmax=4, seed=21
    )
    s0 = build_initial_state(spec, g, p)
    assert abs(s0.h.max_abs() - 0.3 * p.sigma) <= 0.05 * p.sigma
    cfg = StepperConfig(t_end=10.0, dt=None, cfl=0.4, sample_every=2)
    traj = run(s0, p, cfg, m=3, snapshot_every=1)
    series = [
        (
            t,
            math.sqrt(
                st.h.l2_norm() ** 2 + sum(c.l2_norm() ** 2 for c in st.u.components)
            ),
        )
        for t, st in traj.states
    ]
    rate, r_squared = decay_fit(series)
    print(f"  L2 rate {rate:.4f}, r2 {r_squared:.5f}")
    assert rate > 0
    assert r_squared > 0.95
