"""Diagnostic functionals, constants, decay fitting, and linear dispersion.

Integral convention: every integral is taken over the full box [0, 2pi)^d
with no volume normalization, so the torus volume (2pi)^d enters constants
like the mean momentum of a uniform state.  Velocity modulation inside the
quadratic functionals uses the mass-weighted mean velocity

    v_c = m_c / mass,   mass = sigma^(-N) * integral (h+sigma)^N dx,

which is what makes the dissipation identity d/dt E + D = 0 exact on a
torus of non-unit volume; the scalar |m_c|^2 terms use the raw momentum
m_c itself.  Reports store the volume so readers can renormalize.

The isothermal branch gamma = 1 replaces (h+sigma)^N by e^h and sigma^N
by 1 throughout, and takes the iteration depth k_0 = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DomainViolation,
    EmptyRange,
    InsufficientSamples,
    MeanNotZero,
    NonpositiveValue,
    ParameterError,
)
from .model import Params, SymState
from .spectral import Field, gradient, green_potential, seminorm, sobolev_norm

__all__ = [
    "EnergyReport",
    "ConstantsReport",
    "compute_mc",
    "compute_f",
    "compute_L",
    "compute_E",
    "compute_D",
    "compute_E_mu",
    "compute_X_m",
    "compute_constants",
    "decay_fit",
    "dispersion_roots",
    "select_mu",
    "energy_report",
    "cross_term",
    "dmu_surrogate",
]


@dataclass
class EnergyReport:
    """One time slice of every diagnostic functional."""

    t: float
    mass: float
    neutrality_residual: float
    m_c: tuple[float, ...]
    norm_h_Hm: float
    norm_u_Hm: float
    L: float
    E: float
    E_mu: float
    X_m: float
    D: float
    min_rho: float

    def as_row(self) -> list[float]:
        return [
            self.t,
            self.mass,
            self.neutrality_residual,
            *self.m_c,
            self.norm_h_Hm,
            self.norm_u_Hm,
            self.L,
            self.E,
            self.E_mu,
            self.X_m,
            self.D,
            self.min_rho,
        ]

    @staticmethod
    def csv_header(d: int) -> list[str]:
        return [
            "t",
            "mass",
            "neutrality_residual",
            *[f"mc_{j}" for j in range(d)],
            "norm_h_Hm",
            "norm_u_Hm",
            "L",
            "E",
            "E_mu",
            "X_m",
            "D",
            "min_rho",
        ]

    def validate(self) -> None:
        row = self.as_row()
        if not all(math.isfinite(v) for v in row):
            raise ParameterError(f"non-finite diagnostic at t={self.t}: {row}")


@dataclass
class ConstantsReport:
    """Constants of the high-order iteration and their regime classification."""

    k_0: int
    C_0: float
    C_1: float
    lambda_tilde: float
    lambda_hat: float
    regime: str
    C_d: float
    bounds: tuple[float, float] = dc_field(default=(0.0, 0.0))

    def as_dict(self) -> dict:
        return {
            "k_0": self.k_0,
            "C_0": self.C_0,
            "C_1": self.C_1,
            "lambda_tilde": self.lambda_tilde,
            "lambda_hat": self.lambda_hat,
            "regime": self.regime,
            "C_d": self.C_d,
            "k_range": list(self.bounds),
        }


# ---------------------------------------------------------------------------
# Pointwise helpers shared by the functionals.
# ---------------------------------------------------------------------------


def _weight(h: np.ndarray, p: Params) -> np.ndarray:
    """Scaled density (h+sigma)^N, or e^h on the isothermal branch."""
    if p.logarithmic:
        return np.exp(h)
    return (h + p.sigma) ** p.N


def _ref_weight(p: Params) -> float:
    """Equilibrium value of the weight: sigma^N, or 1 for gamma = 1."""
    return 1.0 if p.logarithmic else p.sigma**p.N


def _weight_scale(p: Params) -> float:
    """sigma^(-N) prefactor of the momentum functional (1 for gamma = 1)."""
    return 1.0 / _ref_weight(p)


def _fluctuation(s: SymState, p: Params) -> Field:
    """The shape deviation G = (h+sigma)^N - sigma^N (or e^h - 1)."""
    return Field(s.grid, _weight(s.h.samples, p) - _ref_weight(p))


#: Relative tolerance of the gross-neutrality guard inside the functionals.
#: Lax compared to the admissibility tolerance on purpose: along trajectories
#: the neutrality image is monitored (recorded in every report), not enforced,
#: so normal dealiasing drift must not abort the reporting; truly non-neutral
#: input is still refused before the fractional seminorm drops its zero mode.
REPORT_NEUTRALITY_RTOL = 1e-4


def _check_neutrality(s: SymState, p: Params, context: str) -> None:
    scale = _ref_weight(p) * p.c * s.grid.volume
    if s.neutrality_residual(p) > REPORT_NEUTRALITY_RTOL * scale:
        raise MeanNotZero(
            f"{context}: neutrality residual {s.neutrality_residual(p):.3e} "
            f"exceeds {REPORT_NEUTRALITY_RTOL * scale:.3e}"
        )


def _mean_free(f: Field) -> Field:
    return Field(f.grid, f.samples - f.samples.mean())


def compute_mc(s: SymState, p: Params) -> np.ndarray:
    """Weighted mean momentum sigma^(-N) * integral (h+sigma)^N u dx.

    Taken literally over the torus with no volume normalization: a uniform
    state (h, u) = (0, U0) gives (2pi)^d * U0.
    """
    w = _weight(s.h.samples, p) * _weight_scale(p)
    cell = s.grid.cell_volume
    return np.array([float(np.sum(w * c.samples)) * cell for c in s.u.components])


def _mass(s: SymState, p: Params) -> float:
    """sigma^(-N) integral (h+sigma)^N dx = integral rho dx."""
    return (
        float(np.sum(_weight(s.h.samples, p))) * s.grid.cell_volume * _weight_scale(p)
    )


def _modulated_velocity(s: SymState, p: Params) -> tuple[np.ndarray, np.ndarray]:
    """(m_c, v_c): raw momentum and the mass-weighted mean velocity."""
    mc = compute_mc(s, p)
    return mc, mc / _mass(s, p)


def compute_f(gamma_arg: float, r: float, r0: float) -> float:
    """Pressure potential f(gamma, r; r0) = r * int_{r0}^{r} (s^gamma - r0^gamma)/s^2 ds.

    Closed forms:
        gamma > 1:  r*(r^(gamma-1) - r0^(gamma-1))/(gamma-1) + r0^gamma - r*r0^(gamma-1)
        gamma = 1:  r*log(r/r0) + r0 - r   (continuously extended to r = 0)
    """
    if r < 0.0:
        raise DomainViolation(f"r must be >= 0, got {r}")
    if r0 <= 0.0:
        raise DomainViolation(f"r0 must be > 0, got {r0}")
    if gamma_arg < 1.0:
        raise DomainViolation(f"gamma must be >= 1, got {gamma_arg}")
    if gamma_arg == 1.0:
        if r == 0.0:
            return r0
        return r * math.log(r / r0) + r0 - r
    g = gamma_arg
    return r * (r ** (g - 1.0) - r0 ** (g - 1.0)) / (g - 1.0) + r0**g - r * r0 ** (g - 1.0)


def _f_integral(s: SymState, p: Params) -> float:
    """integral f(gamma', weight; ref) dx with gamma' = (N+2)/N (= gamma)."""
    w = _weight(s.h.samples, p)
    r0 = _ref_weight(p)
    if p.logarithmic:
        # f(1, r; 1) = r log r + 1 - r, vectorized with the r -> 0 limit
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.where(w > 0.0, w * np.log(np.maximum(w, 1e-300)) + 1.0 - w, 1.0)
    else:
        g = (p.N + 2.0) / p.N
        vals = w * (w ** (g - 1.0) - r0 ** (g - 1.0)) / (g - 1.0) + r0**g - w * r0 ** (
            g - 1.0
        )
    return float(np.sum(vals)) * s.grid.cell_volume


def _kinetic(s: SymState, p: Params, v_c: np.ndarray) -> float:
    """integral (h+sigma)^N |u - v_c|^2 dx."""
    w = _weight(s.h.samples, p)
    acc = np.zeros(s.grid.shape)
    for j, comp in enumerate(s.u.components):
        acc += (comp.samples - v_c[j]) ** 2
    return float(np.sum(w * acc)) * s.grid.cell_volume


def compute_L(s: SymState, p: Params) -> float:
    """Quadratic Lyapunov functional

        L = int (h+sigma)^N |u - v_c|^2 + int |(h+sigma)^N - sigma^N|^2
            + 1/2 |m_c|^2,

    with v_c the mass-weighted mean velocity (see module docstring).
    """
    mc, v_c = _modulated_velocity(s, p)
    g = _fluctuation(s, p)
    return (
        _kinetic(s, p, v_c)
        + g.l2_norm() ** 2
        + 0.5 * float(np.dot(mc, mc))
    )


def compute_E(s: SymState, p: Params) -> float:
    """Modulated energy

        E = int (h+sigma)^N |u-v_c|^2
            + 2/(N(N+2)) * int f((N+2)/N, (h+sigma)^N; sigma^N)
            - lambda/sigma^N * || |grad|^((alpha-d)/2) {(h+sigma)^N - sigma^N} ||^2
            + 1/2 |m_c|^2.

    Requires neutrality (the fractional seminorm acts on the mean-free part).
    """
    _check_neutrality(s, p, "compute_E")
    mc, v_c = _modulated_velocity(s, p)
    g = _mean_free(_fluctuation(s, p))
    frac = seminorm(g, (p.alpha - p.d) / 2.0)
    if p.logarithmic:
        f_coeff = 2.0
    else:
        f_coeff = 2.0 / (p.N * (p.N + 2.0))
    return (
        _kinetic(s, p, v_c)
        + f_coeff * _f_integral(s, p)
        - p.lam * _weight_scale(p) * frac**2
        + 0.5 * float(np.dot(mc, mc))
    )


def compute_D(s: SymState, p: Params) -> float:
    """Dissipation rate D = 2 nu int (h+sigma)^N |u - v_c|^2 + nu |m_c|^2."""
    mc, v_c = _modulated_velocity(s, p)
    return 2.0 * p.nu * _kinetic(s, p, v_c) + p.nu * float(np.dot(mc, mc))


def cross_term(s: SymState, p: Params) -> float:
    """Hypocoercivity cross term int (u - v_c) . grad W*[(h+sigma)^N - sigma^N] dx.

    W* is the mean-free inverse Laplacian (green_potential); the constant
    v_c drops out exactly because grad W* has zero mean.
    """
    _check_neutrality(s, p, "cross_term")
    g = _mean_free(_fluctuation(s, p))
    grad_w = gradient(green_potential(g))
    cell = s.grid.cell_volume
    return float(
        sum(
            np.sum(comp.samples * gw.samples)
            for comp, gw in zip(s.u.components, grad_w.components)
        )
        * cell
    )


def compute_E_mu(s: SymState, p: Params, mu: float) -> float:
    """Perturbed energy E + mu * cross_term."""
    return compute_E(s, p) + mu * cross_term(s, p)


def _k0_search(p: Params, m: int) -> tuple[int, float, float]:
    """Minimal integer k with max(1, 2/(d-alpha) - 2) <= k < 2m/(d-alpha)."""
    gap = p.d - p.alpha
    lower = max(1.0, 2.0 / gap - 2.0)
    upper = 2.0 * m / gap
    k = math.ceil(lower - 1e-12)
    if k >= upper:
        raise EmptyRange(
            f"no integer iteration depth in [{lower:g}, {upper:g})", lower, upper
        )
    return k, lower, upper


def compute_constants(p: Params, m: int, C_d: float = 1.5) -> ConstantsReport:
    """Evaluate the iteration constants C_0, C_1 and the minimal depth k_0.

        C_0 = C_d (2 sigma)^(-1) N max(2^-(N-1), 2^(N-1))
        C_1 = C_d sigma^-(2k_0+1) N^(2k_0+1)
              * max(2^(-k_0(N-2)-N), 2^(-(k_0-1)(N-2)), 2^((k_0+1)(N-2)))

    k_0 is found by direct minimal-integer search in the super-Manev regime
    and is 0 (unused, C_1 = 0) in the sub-Manev regime.
    """
    if C_d <= 1.0:
        raise ParameterError(f"C_d must be > 1, got {C_d}")
    if p.logarithmic:
        raise ParameterError("constants are defined for gamma > 1 only")
    N, sigma = p.N, p.sigma
    C_0 = C_d / (2.0 * sigma) * N * max(2.0 ** (-(N - 1.0)), 2.0 ** (N - 1.0))
    if p.regime == "super-manev":
        k0, lower, upper = _k0_search(p, m)
        C_1 = (
            C_d
            * sigma ** (-(2 * k0 + 1))
            * N ** (2 * k0 + 1)
            * max(
                2.0 ** (-k0 * (N - 2.0) - N),
                2.0 ** (-(k0 - 1) * (N - 2.0)),
                2.0 ** ((k0 + 1) * (N - 2.0)),
            )
        )
        lam_hat = float(sum(p.lam**k for k in range(1, k0 + 1)))
        bounds = (lower, upper)
    else:
        k0, C_1, lam_hat = 0, 0.0, 0.0
        bounds = (0.0, 0.0)
    lam_tilde = p.lam * sigma ** (-N) * N**2
    return ConstantsReport(
        k_0=k0,
        C_0=C_0,
        C_1=C_1,
        lambda_tilde=lam_tilde,
        lambda_hat=lam_hat,
        regime=p.regime,
        C_d=C_d,
        bounds=bounds,
    )


def compute_X_m(
    s: SymState, p: Params, m: int, mu: float, k0: int | None = None
) -> float:
    """Weighted high-order functional

        X_m = sum_{k=0}^{k0} lt^k int (h+sigma)^{k(N-2)} ||grad|^{m-k l} u|^2
              + ||u||_{L2}^2 + || |grad|^m h ||_{L2}^2 + ||h||_{L2}^2
              + mu int grad(|grad|^{m-1} h) . |grad|^{m-1} u dx,

    with lt = lambda sigma^(-N) N^2 and l = (d - alpha)/2.  k0 defaults to
    the minimal iteration depth in the super-Manev regime and 0 otherwise
    (the gamma = 1 branch always uses k0 = 0).
    """
    grid = s.grid
    if p.logarithmic:
        k0 = 0
        lam_tilde = 0.0
        weight_exp = None
    else:
        if k0 is None:
            k0 = _k0_search(p, m)[0] if p.regime == "super-manev" else 0
        lam_tilde = p.lam * p.sigma ** (-p.N) * p.N**2
        weight_exp = p.N - 2.0

    l = p.l
    cell = grid.cell_volume
    h = s.h

    total = 0.0
    for k in range(k0 + 1):
        order = m - k * l
        if p.logarithmic or k == 0:
            w = 1.0
        else:
            w = (s.h.samples + p.sigma) ** (k * weight_exp)
        term = 0.0
        for comp in s.u.components:
            lam_u = _apply_lambda(comp, order)
            term += float(np.sum(w * lam_u**2)) * cell
        total += lam_tilde**k * term if k > 0 else term

    total += sum(c.l2_norm() ** 2 for c in s.u.components)
    total += seminorm(h, float(m)) ** 2
    total += h.l2_norm() ** 2

    # cross term: int grad(Lambda^{m-1} h) . Lambda^{m-1} u dx
    lam_h = Field(grid, _apply_lambda(h, m - 1.0))
    grad_lam_h = gradient(lam_h)
    cross = 0.0
    for j, comp in enumerate(s.u.components):
        lam_u = _apply_lambda(comp, m - 1.0)
        cross += float(np.sum(grad_lam_h[j].samples * lam_u)) * cell
    return total + mu * cross


def _apply_lambda(f: Field, s: float) -> np.ndarray:
    """|grad|^s with the mean annihilated, returned as raw samples."""
    grid = f.grid
    fhat = np.fft.fftn(f.samples)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.power(grid.k_sq, s / 2.0, dtype=float)
    w[(0,) * grid.d] = 1.0 if s == 0 else 0.0
    return np.fft.ifftn(w * fhat).real


def select_mu(
    s: SymState, p: Params, m: int, mu0: float = 0.01, k0: int | None = None
) -> float:
    """Auto-select the hypocoercivity weight: halve mu0 until both cross
    terms are dominated (|cross| <= base/2) at the given state."""
    mu = mu0
    e_base = abs(compute_E(s, p))
    x_base = abs(compute_X_m(s, p, m, 0.0, k0=k0))
    e_cross = abs(cross_term(s, p))
    x_cross = abs(compute_X_m(s, p, m, 1.0, k0=k0) - x_base)
    for _ in range(60):
        if mu * e_cross <= 0.5 * e_base + 1e-300 and mu * x_cross <= 0.5 * x_base + 1e-300:
            break
        mu *= 0.5
    return mu


def energy_report(
    s: SymState,
    p: Params,
    m: int,
    mu: float,
    k0: int | None = None,
) -> EnergyReport:
    """Assemble the full diagnostic slice for one state."""
    mc = compute_mc(s, p)
    if p.logarithmic:
        rho_min = float(np.exp(s.h.samples.min()))
    else:
        rho_min = float((1.0 + s.h.samples.min() / p.sigma) ** p.N)
    report = EnergyReport(
        t=s.t,
        mass=_mass(s, p),
        neutrality_residual=s.neutrality_residual(p),
        m_c=tuple(float(v) for v in mc),
        norm_h_Hm=sobolev_norm(s.h, m),
        norm_u_Hm=float(
            np.sqrt(sum(sobolev_norm(c, m) ** 2 for c in s.u.components))
        ),
        L=compute_L(s, p),
        E=compute_E(s, p),
        E_mu=compute_E_mu(s, p, mu),
        X_m=compute_X_m(s, p, m, mu, k0=k0),
        D=compute_D(s, p),
        min_rho=rho_min,
    )
    report.validate()
    return report


def decay_fit(
    series,
    transient_fraction: float = 0.2,
    smooth_window: int = 1,
) -> tuple[float, float]:
    """Least-squares exponential rate of a positive time series.

    Fits log(value) against t on the window that excludes the leading
    ``transient_fraction`` of samples; returns (rate, r_squared) with
    rate = -slope.  ``smooth_window`` > 1 applies a moving average to the
    values first (useful for oscillatory envelopes).
    """
    pairs = [(float(t), float(v)) for t, v in series]
    if len(pairs) < 10:
        raise InsufficientSamples(f"need >= 10 samples, got {len(pairs)}")
    ts = np.array([t for t, _ in pairs])
    vs = np.array([v for _, v in pairs])
    if np.any(vs <= 0.0):
        raise NonpositiveValue("decay_fit requires strictly positive values")
    if smooth_window > 1:
        kernel = np.ones(smooth_window) / smooth_window
        vs = np.convolve(vs, kernel, mode="valid")
        ts = ts[: len(vs)] + 0.5 * (ts[smooth_window - 1] - ts[0])
    start = int(len(ts) * transient_fraction)
    ts, vs = ts[start:], vs[start:]
    if len(ts) < 2:
        raise InsufficientSamples("fit window too small after transient exclusion")
    logs = np.log(vs)
    slope, intercept = np.polyfit(ts, logs, 1)
    fitted = slope * ts + intercept
    ss_res = float(np.sum((logs - fitted) ** 2))
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    r_squared = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return float(-slope), float(r_squared)


def dispersion_roots(n_abs: float, p: Params) -> tuple[complex, complex]:
    """Roots of z^2 + nu z + n^2 (gamma c^(gamma-1) - lambda n^(alpha-d)) = 0,
    the linearization of the primitive system about (rho, u) = (c, 0) for a
    mode of magnitude n.  The pressure contribution is dropped when
    p.include_pressure is false, exposing the attractive growth mechanism.
    """
    if n_abs < 1.0:
        raise ParameterError(f"mode magnitude must be >= 1, got {n_abs}")
    gamma_tilde = p.gamma * p.c ** (p.gamma - 1.0) if p.include_pressure else 0.0
    c2 = n_abs**2 * (gamma_tilde - p.lam * n_abs ** (p.alpha - p.d))
    disc = complex(p.nu**2 - 4.0 * c2)
    sq = np.sqrt(disc)
    return ((-p.nu + sq) / 2.0, (-p.nu - sq) / 2.0)


def dmu_surrogate(
    ts: np.ndarray, d_values: np.ndarray, cross_values: np.ndarray, mu: float
) -> np.ndarray:
    """Discrete stand-in for the perturbed dissipation D - mu d/dt(cross),
    using centered differences of the sampled cross term (endpoints one-sided)."""
    ts = np.asarray(ts, dtype=float)
    cross = np.asarray(cross_values, dtype=float)
    dcross = np.gradient(cross, ts)
    return np.asarray(d_values, dtype=float) - mu * dcross
