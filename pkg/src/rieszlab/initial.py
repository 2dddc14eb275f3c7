"""Initial-condition families and the exact neutrality projection.

Families (all applied to h, optionally mirrored onto u, then projected):

* ``equilibrium``            -- h = 0, u = u_mean.
* ``single-mode``            -- h = amplitude * cos(k . x) for an integer
                                mode vector k (a scalar k means (k, 0, ...)).
* ``random-band``            -- all modes with 1 <= max_j |n_j| <= kmax get
                                independent Gaussian cos/sin amplitudes from
                                a counter-based Philox stream, then the field
                                is rescaled to the requested sup amplitude.
* ``gaussian-bump``          -- periodized Gaussian of the given width
                                centered at pi per axis, dealiased.

The final h is shifted by the exact scalar that restores the neutrality
image integral (h+sigma)^N = sigma^N c (2pi)^d (or integral e^h = c (2pi)^d
on the isothermal branch), so every constructed state is admissible to
machine precision.

Random draws use numpy's Philox4x64-10 counter-based generator seeded with
the configured integer; modes are visited in lexicographic order over the
canonical half-lattice (first nonzero component positive), h before u
components, two standard normals per mode.  The draw sequence therefore does
not depend on the grid resolution; only the final sup-normalization is
evaluated on the grid points.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ParameterError, VacuumState
from .model import Params, SymState
from .spectral import Field, Grid, VectorField, dealias

__all__ = ["InitialConditionSpec", "build_initial_state", "project_neutrality"]

FAMILIES = ("equilibrium", "single-mode", "random-band", "gaussian-bump")


@dataclass
class InitialConditionSpec:
    """Named initial-data family plus its knobs."""

    family: str = "equilibrium"
    amplitude: float = 0.0
    mode: Union[int, Sequence[int]] = 1
    kmax: int = 4
    seed: int = 0
    width: float = 0.5
    apply_to: str = "h"  # "h" (u = 0) or "both"
    u_mean: Union[float, Sequence[float]] = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(
                f"unknown initial-condition family {self.family!r}; "
                f"expected one of {FAMILIES}"
            )
        if self.apply_to not in ("h", "both"):
            raise ParameterError("apply_to must be 'h' or 'both'")
        if self.family == "gaussian-bump" and self.width <= 0:
            raise ParameterError("gaussian-bump width must be > 0")
        if self.family == "random-band" and self.kmax < 1:
            raise ParameterError("random-band kmax must be >= 1")


def _mode_vector(mode: Union[int, Sequence[int]], d: int) -> np.ndarray:
    if np.isscalar(mode):
        vec = np.zeros(d)
        vec[0] = float(mode)
        return vec
    vec = np.asarray(mode, dtype=float)
    if vec.shape != (d,):
        raise ParameterError(f"mode vector must have length {d}, got {vec!r}")
    return vec


def _canonical_band_modes(kmax: int, d: int):
    """Lexicographic canonical representatives of +-n pairs in the band."""
    for n in itertools.product(range(-kmax, kmax + 1), repeat=d):
        if all(v == 0 for v in n):
            continue
        if max(abs(v) for v in n) > kmax:
            continue
        first = next(v for v in n if v != 0)
        if first < 0:
            continue  # the -n partner is the representative
        yield np.array(n, dtype=float)


def _random_band_shape(grid: Grid, kmax: int, rng: np.random.Generator) -> np.ndarray:
    if kmax > grid.n_points / 3.0:
        raise ParameterError(
            f"kmax = {kmax} exceeds the dealiased band P/3 = {grid.n_points / 3:.1f}"
        )
    xs = [np.broadcast_to(x, grid.shape) for x in grid.x_axes]
    out = np.zeros(grid.shape)
    for n in _canonical_band_modes(kmax, grid.d):
        a, b = rng.standard_normal(2)
        phase = sum(nj * xj for nj, xj in zip(n, xs))
        out += a * np.cos(phase) + b * np.sin(phase)
    return out


def _gaussian_bump_shape(grid: Grid, width: float) -> np.ndarray:
    xs = [np.broadcast_to(x, grid.shape) for x in grid.x_axes]
    out = np.ones(grid.shape)
    for x in xs:
        acc = np.zeros(grid.shape)
        for k in range(-3, 4):
            acc += np.exp(-((x - np.pi + 2 * np.pi * k) ** 2) / (2.0 * width**2))
        out = out * acc
    return out


def _shape(spec: InitialConditionSpec, grid: Grid, rng: np.random.Generator) -> np.ndarray:
    if spec.family == "equilibrium":
        return np.zeros(grid.shape)
    if spec.family == "single-mode":
        n = _mode_vector(spec.mode, grid.d)
        xs = [np.broadcast_to(x, grid.shape) for x in grid.x_axes]
        return np.cos(sum(nj * xj for nj, xj in zip(n, xs)))
    if spec.family == "random-band":
        return _random_band_shape(grid, spec.kmax, rng)
    return _gaussian_bump_shape(grid, spec.width)


def _normalized(shape: np.ndarray, amplitude: float, grid: Grid) -> np.ndarray:
    f = dealias(Field(grid, shape))
    peak = f.max_abs()
    if peak == 0.0 or amplitude == 0.0:
        return np.zeros(grid.shape)
    return f.samples * (amplitude / peak)


def project_neutrality(h: Field, p: Params) -> Field:
    """Shift h by the exact constant restoring the neutrality image.

    Solves integral (h - tau + sigma)^N dx = sigma^N c (2pi)^d for tau by
    Newton iteration (a monotone scalar equation); closed form for gamma = 1.
    """
    grid = h.grid
    target = p.c  # mean density
    if p.logarithmic:
        tau = float(np.log(np.exp(h.samples).mean() / target))
        return Field(grid, h.samples - tau)
    sigma, n_exp = p.sigma, p.N
    base = 1.0 + h.samples / sigma
    if float(base.min()) <= 0.0:
        raise VacuumState("initial h reaches the vacuum; reduce the amplitude")
    tau = 0.0
    for _ in range(60):
        b = base - tau / sigma
        g = float(np.mean(b**n_exp)) - target
        if abs(g) <= 1e-15 * max(target, 1.0):
            break
        dg = -(n_exp / sigma) * float(np.mean(b ** (n_exp - 1.0)))
        tau -= g / dg
    b = base - tau / sigma
    if float(b.min()) <= 0.0:
        raise VacuumState("neutrality projection hit the vacuum; reduce the amplitude")
    return Field(grid, h.samples - tau)


def build_initial_state(
    spec: InitialConditionSpec, grid: Grid, p: Params
) -> SymState:
    """Construct an admissible symmetrized state from the family spec."""
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    h = Field(grid, _normalized(_shape(spec, grid, rng), spec.amplitude, grid))

    comps = []
    for _ in range(grid.d):
        if spec.apply_to == "both":
            comps.append(_normalized(_shape(spec, grid, rng), spec.amplitude, grid))
        else:
            comps.append(np.zeros(grid.shape))
    u_mean = spec.u_mean
    if np.isscalar(u_mean):
        u_mean = [float(u_mean)] * grid.d
    if len(u_mean) != grid.d:
        raise ParameterError(f"u_mean must be a scalar or length-{grid.d} sequence")
    for j in range(grid.d):
        comps[j] = comps[j] + float(u_mean[j])

    h = project_neutrality(h, p)
    state = SymState(h, VectorField(tuple(Field(grid, c) for c in comps)), 0.0)
    state.validate(p)
    return state
