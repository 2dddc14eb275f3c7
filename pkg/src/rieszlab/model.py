"""Model parameters, state representations, and right-hand-side assembly.

Three evolution systems share one parameter tuple:

* the damped Euler system with Riesz interaction in primitive conservative
  variables (rho, q = rho*u),
* its symmetrization in (h, u) with h = sigma*(rho^(1/N) - 1) for gamma > 1
  (h = ln rho on the isothermal branch gamma = 1), and
* the overdamped density equation d_t rho + lambda div(rho grad K(rho-c))
  = Laplace(rho^gamma), where K is the inverse fractional Laplacian of
  order d - alpha.

All pointwise nonlinear products are evaluated in physical space and
dealiased by the 2/3 rule.  Fractional powers of the density preclude exact
dealiasing; the residual is accepted and shows up in the identity audits.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    MeanNotZero,
    NonpositiveDensity,
    ParameterError,
    VacuumState,
)
from .spectral import Field, Grid, VectorField

__all__ = [
    "Params",
    "PrimitiveState",
    "SymState",
    "FpmState",
    "to_sym",
    "to_primitive",
    "riesz_force",
    "rhs_sym",
    "rhs_primitive",
    "rhs_fpm",
    "NEUTRALITY_RTOL",
    "DEFAULT_POSITIVITY_FLOOR",
]

#: Relative tolerance on the neutrality residual of admissible states.
NEUTRALITY_RTOL = 1e-8

#: Default minimum admissible density.
DEFAULT_POSITIVITY_FLOOR = 1e-8


@dataclass(frozen=True)
class Params:
    """Model tuple (gamma, nu, lambda, alpha, c, d) plus derived quantities.

    gamma   : adiabatic exponent of the pressure law p = rho^gamma, >= 1.
    nu      : velocity damping rate, >= 0 (faithful runs use nu > 0).
    lam     : interaction strength; > 0 attractive, < 0 repulsive.
    alpha   : interaction exponent, max(d-2, 0) <= alpha < d.
    d       : spatial dimension (1, 2, or 3).
    c       : background density, > 0 (default 1; the symmetrized
              diagnostics take c = 1 as the reference state).
    include_pressure : drop the pressure gradient when False (exposes the
              attractive instability; primitive formulation only).

    Derived: N = 2/(gamma-1) and sigma = sqrt(gamma)*N for gamma > 1,
    l = (d - alpha)/2, and the interaction regime classification
    ("super-manev" for d-1 < alpha < d, else "sub-manev").
    """

    gamma: float
    nu: float
    lam: float
    alpha: float
    d: int
    c: float = 1.0
    include_pressure: bool = True

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ParameterError(f"dimension d must be 1, 2, or 3, got {self.d}")
        if self.gamma < 1.0:
            raise ParameterError(f"gamma must be >= 1, got {self.gamma}")
        if self.nu < 0.0:
            raise ParameterError(f"nu must be >= 0, got {self.nu}")
        lower = max(self.d - 2, 0)
        if not (lower <= self.alpha < self.d):
            raise ParameterError(
                f"alpha must satisfy max(d-2, 0) <= alpha < d, i.e. "
                f"{lower} <= alpha < {self.d}, got {self.alpha}"
            )
        if self.c <= 0.0:
            raise ParameterError(f"background density c must be > 0, got {self.c}")

    @property
    def logarithmic(self) -> bool:
        """True on the isothermal branch gamma = 1 (h = ln rho)."""
        return self.gamma == 1.0

    @property
    def N(self) -> float:
        if self.logarithmic:
            raise ParameterError("N = 2/(gamma-1) is undefined for gamma = 1")
        return 2.0 / (self.gamma - 1.0)

    @property
    def sigma(self) -> float:
        if self.logarithmic:
            raise ParameterError("sigma is undefined for gamma = 1")
        return np.sqrt(self.gamma) * self.N

    @property
    def l(self) -> float:
        return (self.d - self.alpha) / 2.0

    @property
    def regime(self) -> str:
        return "super-manev" if self.alpha > self.d - 1 else "sub-manev"

    def sound_speed(self, rho: np.ndarray) -> np.ndarray:
        """Pointwise sound speed sqrt(gamma) * rho^((gamma-1)/2)."""
        if self.logarithmic:
            return np.ones_like(rho)
        return np.sqrt(self.gamma) * rho ** ((self.gamma - 1.0) / 2.0)

    def without_pressure(self) -> "Params":
        return replace(self, include_pressure=False)


@dataclass
class PrimitiveState:
    """Density/velocity pair (rho, u) at time t."""

    rho: Field
    u: VectorField
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.rho.grid:
            raise ParameterError("rho and u must share one grid")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def copy(self) -> "PrimitiveState":
        return PrimitiveState(self.rho.copy(), self.u.copy(), self.t)

    def min_rho(self) -> float:
        return float(self.rho.samples.min())

    def neutrality_residual(self, p: Params) -> float:
        """|integral of (rho - c)| over the torus."""
        return abs(self.rho.integral() - p.c * self.grid.volume)

    def validate(self, p: Params) -> None:
        if self.min_rho() <= 0.0:
            raise NonpositiveDensity(f"min rho = {self.min_rho():.3e} <= 0")
        tol = 1e-9 * self.grid.volume
        if self.neutrality_residual(p) > tol:
            raise MeanNotZero(
                f"neutrality violated: |int(rho - c)| = "
                f"{self.neutrality_residual(p):.3e} > {tol:.3e}"
            )


@dataclass
class SymState:
    """Symmetrized pair (h, u) at time t."""

    h: Field
    u: VectorField
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.h.grid:
            raise ParameterError("h and u must share one grid")

    @property
    def grid(self) -> Grid:
        return self.h.grid

    def copy(self) -> "SymState":
        return SymState(self.h.copy(), self.u.copy(), self.t)

    def neutrality_residual(self, p: Params) -> float:
        """|integral of (h+sigma)^N - sigma^N c |T^d|| (gamma > 1 branch)."""
        if p.logarithmic:
            return abs(
                float(np.exp(self.h.samples).sum()) * self.grid.cell_volume
                - p.c * self.grid.volume
            )
        weight = (self.h.samples + p.sigma) ** p.N
        return abs(
            float(weight.sum()) * self.grid.cell_volume
            - p.sigma**p.N * p.c * self.grid.volume
        )

    def validate(self, p: Params) -> None:
        if not p.logarithmic:
            if float(self.h.samples.min()) + p.sigma <= 0.0:
                raise VacuumState(
                    f"h + sigma reaches {float(self.h.samples.min()) + p.sigma:.3e} <= 0"
                )
            scale = p.sigma**p.N * p.c * self.grid.volume
        else:
            scale = p.c * self.grid.volume
        if not np.all(np.isfinite(self.h.samples)):
            raise VacuumState("h contains non-finite samples")
        if self.neutrality_residual(p) > NEUTRALITY_RTOL * scale:
            raise MeanNotZero(
                f"neutrality image violated: residual "
                f"{self.neutrality_residual(p):.3e} > {NEUTRALITY_RTOL * scale:.3e}"
            )


@dataclass
class FpmState:
    """Density-only state for the overdamped (porous-medium type) flow."""

    rho: Field
    t: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def copy(self) -> "FpmState":
        return FpmState(self.rho.copy(), self.t)

    def min_rho(self) -> float:
        return float(self.rho.samples.min())


def to_sym(s: PrimitiveState, p: Params) -> SymState:
    """Change of variables h = sigma*(rho^(1/N) - 1), or ln rho for gamma = 1."""
    rho = s.rho.samples
    if float(rho.min()) <= 0.0:
        raise NonpositiveDensity(
            f"cannot symmetrize: min rho = {float(rho.min()):.3e} <= 0"
        )
    if p.logarithmic:
        h = np.log(rho)
    else:
        h = p.sigma * (rho ** (1.0 / p.N) - 1.0)
    return SymState(Field(s.grid, h), s.u.copy(), s.t)


def to_primitive(s: SymState, p: Params) -> PrimitiveState:
    """Inverse change of variables rho = (1 + h/sigma)^N, or exp(h)."""
    h = s.h.samples
    if p.logarithmic:
        rho = np.exp(h)
    else:
        base = 1.0 + h / p.sigma
        if float(base.min()) <= 0.0:
            raise VacuumState(
                f"h + sigma reaches {p.sigma * float(base.min()):.3e} <= 0"
            )
        rho = base**p.N
    return PrimitiveState(Field(s.grid, rho), s.u.copy(), s.t)


# ---------------------------------------------------------------------------
# Spectral kernels shared by the right-hand sides.  These operate on raw
# arrays; the public RHS functions wrap them in the state types.
# ---------------------------------------------------------------------------


class _Kernels:
    """Per-(grid, params) cache of symbol arrays used by the RHS assembly."""

    def __init__(self, grid: Grid, p: Params):
        self.grid = grid
        self.mask = grid.dealias_mask
        # Riesz force symbols: i*n_j * |n|^(alpha - d) with zero mode removed.
        with np.errstate(divide="ignore", invalid="ignore"):
            riesz_weight = np.power(grid.k_sq, (p.alpha - p.d) / 2.0, dtype=float)
        riesz_weight[(0,) * grid.d] = 0.0
        self.riesz = [ik * riesz_weight for ik in grid.ik]
        self.ik = grid.ik
        self.k_sq = grid.k_sq

    def grad_phys(self, fhat: np.ndarray) -> list[np.ndarray]:
        return [np.fft.ifftn(ik * fhat).real for ik in self.ik]

    def div_hat(self, comps_phys: list[np.ndarray]) -> np.ndarray:
        out = np.zeros(self.grid.shape, dtype=complex)
        for ik, comp in zip(self.ik, comps_phys):
            out += ik * np.fft.fftn(comp)
        return out

    def dealias_hat(self, phys: np.ndarray) -> np.ndarray:
        fhat = np.fft.fftn(phys)
        fhat[~self.mask] = 0.0
        return fhat


# Symbol-array cache keyed by (d, P, alpha).  Entries are immutable once
# built and dict get/set is atomic under the GIL, so concurrent evaluations
# at worst rebuild an identical entry.
_KERNEL_CACHE: dict[tuple, _Kernels] = {}


def _kernels(grid: Grid, p: Params) -> _Kernels:
    key = (grid.d, grid.n_points, p.alpha)
    k = _KERNEL_CACHE.get(key)
    if k is None or k.grid != grid:
        k = _Kernels(grid, p)
        _KERNEL_CACHE[key] = k
    return k


def riesz_force(rho: Field, p: Params) -> VectorField:
    """Per-unit-mass interaction force lambda * grad K(rho - c), where K is
    the mean-free inverse fractional Laplacian of order d - alpha.

    Spectrally: component j has coefficient lambda * i*n_j * |n|^(alpha-d)
    * (rho - c)hat(n), with the zero mode identically zero.  Rejects input
    that breaks neutrality.
    """
    grid = rho.grid
    _check_dim(grid, p)
    g = Field(grid, rho.samples - p.c)
    if abs(g.integral()) > 1e-9 * grid.volume * max(p.c, 1.0):
        raise MeanNotZero(
            f"riesz_force requires neutral density: |int(rho - c)| = "
            f"{abs(g.integral()):.3e}"
        )
    ker = _kernels(grid, p)
    ghat = np.fft.fftn(g.samples)
    comps = tuple(
        Field(grid, p.lam * np.fft.ifftn(sym * ghat).real) for sym in ker.riesz
    )
    return VectorField(comps)


def _riesz_term_hat(weight_hat: np.ndarray, ker: _Kernels, coeff: float):
    """Spectral components of coeff * grad K(weight), zero mode free."""
    return [coeff * sym * weight_hat for sym in ker.riesz]


def _check_dim(grid: Grid, p: Params) -> None:
    if grid.d != p.d:
        raise ParameterError(
            f"parameter dimension d={p.d} does not match grid dimension {grid.d}"
        )


def rhs_sym(s: SymState, p: Params) -> tuple[Field, VectorField]:
    """Instantaneous rates (dh, du) of the symmetrized system.

    gamma > 1:
        dh = -u.grad h - (1/N)(h+sigma) div u
        du = -u.grad u - (1/N)(h+sigma) grad h - nu*u
             + lambda sigma^(-N) grad K{(h+sigma)^N - sigma^N}
    gamma = 1:
        dh = -u.grad h - div u
        du = -u.grad u - grad h - nu*u + lambda grad K(e^h - 1)

    Every pointwise product is dealiased.
    """
    grid = s.grid
    _check_dim(grid, p)
    ker = _kernels(grid, p)
    h = s.h.samples
    u = [c.samples for c in s.u.components]

    if not p.logarithmic:
        base = 1.0 + h / p.sigma
        if float(base.min()) <= 0.0:
            raise VacuumState(
                f"h + sigma reaches {p.sigma * float(base.min()):.3e} <= 0"
            )

    hhat = np.fft.fftn(h)
    grad_h = ker.grad_phys(hhat)
    uhat = [np.fft.fftn(c) for c in u]
    div_u = np.fft.ifftn(sum(ik * ch for ik, ch in zip(ker.ik, uhat))).real
    grad_u = [ker.grad_phys(ch) for ch in uhat]  # grad_u[j][i] = d_i u_j

    adv_h = sum(uc * gh for uc, gh in zip(u, grad_h))

    if p.logarithmic:
        # dh = -u.grad h - div u; div u is linear, no dealiasing needed
        dh_hat = -ker.dealias_hat(adv_h) - np.fft.fftn(div_u)
        riesz_hat = _riesz_term_hat(ker.dealias_hat(np.exp(h) - 1.0), ker, p.lam)
        press_hats = [np.fft.fftn(gh) for gh in grad_h]
    else:
        sig_h = h + p.sigma
        dh_hat = -ker.dealias_hat(adv_h) - ker.dealias_hat(sig_h * div_u) / p.N
        riesz_hat = _riesz_term_hat(
            ker.dealias_hat(sig_h**p.N - p.sigma**p.N),
            ker,
            p.lam * p.sigma ** (-p.N),
        )
        press_hats = [ker.dealias_hat(sig_h * gh) / p.N for gh in grad_h]

    du = []
    for j in range(grid.d):
        adv_u = sum(u[i] * grad_u[j][i] for i in range(grid.d))
        du_hat = -ker.dealias_hat(adv_u) - press_hats[j] + riesz_hat[j]
        dj = np.fft.ifftn(du_hat).real - p.nu * u[j]
        du.append(Field(grid, dj))

    dh = Field(grid, np.fft.ifftn(dh_hat).real)
    return dh, VectorField(tuple(du))


def rhs_primitive(
    s: PrimitiveState,
    p: Params,
    floor: float = DEFAULT_POSITIVITY_FLOOR,
    flux_scale: float = 1.0,
) -> tuple[Field, VectorField]:
    """Instantaneous rates (drho, dq) in conservative variables q = rho*u.

        drho = -div q
        dq   = -div(q x q / rho) - grad(rho^gamma) - nu*q
               + lambda rho grad K(rho - c)

    ``flux_scale`` multiplies every flux term (convection, pressure and
    interaction) uniformly; the overdamped rescaled system uses 1/eps there
    with nu = 1/eps^2.  The pressure gradient is dropped when
    ``p.include_pressure`` is false.  The zero mode of drho is identically
    zero.  Raises VacuumState when the density touches ``floor``.
    """
    grid = s.grid
    _check_dim(grid, p)
    ker = _kernels(grid, p)
    rho = s.rho.samples
    if float(rho.min()) <= floor:
        raise VacuumState(f"min rho = {float(rho.min()):.3e} <= floor {floor:.1e}")
    q = [rho * c.samples for c in s.u.components]
    return _rhs_primitive_arrays(rho, q, p, ker, flux_scale)


def _rhs_primitive_arrays(
    rho: np.ndarray,
    q: list[np.ndarray],
    p: Params,
    ker: _Kernels,
    flux_scale: float = 1.0,
) -> tuple[Field, VectorField]:
    grid = ker.grid
    drho_hat = -flux_scale * ker.div_hat(q)

    inv_rho = 1.0 / rho
    riesz_hat = _riesz_term_hat(np.fft.fftn(rho - p.c), ker, p.lam)
    dq = []
    for j in range(grid.d):
        # momentum flux divergence: sum_i d_i (q_i q_j / rho), dealiased
        flux_hat = ker.div_hat([q[i] * q[j] * inv_rho for i in range(grid.d)])
        dq_hat = -_masked(flux_hat, ker.mask)
        if p.include_pressure:
            dq_hat -= ker.ik[j] * ker.dealias_hat(rho**p.gamma)
        force_j = np.fft.ifftn(riesz_hat[j]).real
        dq_phys = np.fft.ifftn(flux_scale * dq_hat).real
        dq_phys += flux_scale * np.fft.ifftn(ker.dealias_hat(rho * force_j)).real
        dq_phys -= p.nu * q[j]
        dq.append(Field(grid, dq_phys))

    drho = Field(grid, np.fft.ifftn(drho_hat).real)
    return drho, VectorField(tuple(dq))


def _masked(fhat: np.ndarray, mask: np.ndarray) -> np.ndarray:
    out = fhat.copy()
    out[~mask] = 0.0
    return out


def rhs_fpm(rho: Field, p: Params) -> Field:
    """Instantaneous rate of the overdamped density flow,

        drho = Laplace(rho^gamma) - lambda div(rho grad K(rho - c)),

    dealiased, with an identically zero mean.  Raises VacuumState on
    nonpositive density and MeanNotZero on broken neutrality.
    """
    grid = rho.grid
    _check_dim(grid, p)
    if float(rho.samples.min()) <= 0.0:
        raise VacuumState(f"min rho = {float(rho.samples.min()):.3e} <= 0")
    if abs(rho.integral() - p.c * grid.volume) > 1e-9 * grid.volume * max(p.c, 1.0):
        raise MeanNotZero("rhs_fpm requires neutral density")
    ker = _kernels(grid, p)
    r = rho.samples
    diff_hat = -ker.k_sq * ker.dealias_hat(r**p.gamma)
    riesz_hat = _riesz_term_hat(np.fft.fftn(r - p.c), ker, p.lam)
    flux = [r * np.fft.ifftn(rh).real for rh in riesz_hat]
    div_flux_hat = _masked(ker.div_hat(flux), ker.mask)
    out = np.fft.ifftn(diff_hat - div_flux_hat).real
    return Field(grid, out)
