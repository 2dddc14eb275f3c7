"""Discrete Fourier analysis on the periodic box [0, 2pi)^d.

Conventions, fixed once for the whole package:

* The grid has P points per axis (P even), spacing 2pi/P, and integer
  wavenumbers n in {-P/2, ..., P/2 - 1}^d.
* Transforms use the unnormalized forward sum and an inverse carrying
  1/P^d (numpy's default), so Parseval reads

      ||f||_{L^2}^2 = (2pi/P)^d sum_x |f(x)|^2
                    = (2pi)^d / P^(2d) * sum_n |fhat(n)|^2.

  ``Grid.parseval`` stores the (2pi)^d / P^(2d) factor; it is the single
  place where transform scaling enters any norm.
* Differentiation symbols i*n_j are zeroed at the Nyquist mode -P/2 so
  that real fields map to real fields (the Nyquist coefficient of a real
  field is real and a purely imaginary symbol there would break
  conjugate symmetry).
* Fractional powers |n|^s annihilate the n = 0 mode for every s != 0, so
  that positive and negative powers compose to the identity on mean-free
  fields.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import MeanNotZero, NonHermitianSymbol, ParameterError

__all__ = [
    "Grid",
    "Field",
    "VectorField",
    "Multiplier",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "fractional_power",
    "gradient",
    "divergence",
    "green_potential",
    "sobolev_norm",
    "sobolev_norm_fractional",
    "seminorm",
    "dealias",
    "commutator_apply",
]

#: Realness guard: |imag| above this fraction of the field magnitude is an error.
REALNESS_TOL = 1e-12

#: Relative tolerance of the mean-free precondition used by rejecting multipliers.
MEAN_TOL = 1e-10


class Grid:
    """Sampling lattice for the torus [0, 2pi)^d with P points per axis.

    Precomputes the wavenumber lattice and the masks every operator in this
    module needs.  Instances are immutable in spirit; two grids compare equal
    iff they share (d, n_points).
    """

    def __init__(self, d: int, n_points: int):
        if d not in (1, 2, 3):
            raise ParameterError(f"spatial dimension must be 1, 2, or 3, got {d}")
        if n_points < 4 or n_points % 2 != 0:
            raise ParameterError(
                f"points per axis must be even and >= 4, got {n_points}"
            )
        self.d = d
        self.n_points = n_points
        self.shape = (n_points,) * d
        self.spacing = 2.0 * np.pi / n_points
        self.cell_volume = self.spacing**d
        self.volume = (2.0 * np.pi) ** d
        # Parseval factor: ||f||^2 = parseval * sum_n |fhat(n)|^2.
        self.parseval = self.volume / float(n_points) ** (2 * d)

        # Integer wavenumbers in FFT layout, one array per axis, broadcastable.
        k1 = np.fft.fftfreq(n_points) * n_points  # exact integers as floats
        self.k_axes = []
        for j in range(d):
            sh = [1] * d
            sh[j] = n_points
            self.k_axes.append(k1.reshape(sh))
        self.k_sq = sum(k**2 for k in self.k_axes)
        self.k_abs = np.sqrt(self.k_sq)

        # Derivative symbols i*n_j with the Nyquist column zeroed.
        nyq = -n_points // 2
        self.ik = []
        for k in self.k_axes:
            kd = k.copy()
            kd[kd == nyq] = 0.0
            self.ik.append(1j * kd)

        # 2/3-rule mask: keep modes with max_j |n_j| <= P/3.
        cutoff = n_points / 3.0
        keep = np.ones(self.shape, dtype=bool)
        for k in self.k_axes:
            keep &= np.abs(k) <= cutoff
        self.dealias_mask = keep

        # Index map sending the coefficient at n to the one at -n.
        neg = (-np.arange(n_points)) % n_points
        self._neg_index = np.ix_(*([neg] * d))

        # Physical coordinates, broadcastable per axis.
        x1 = np.arange(n_points) * self.spacing
        self.x_axes = []
        for j in range(d):
            sh = [1] * d
            sh[j] = n_points
            self.x_axes.append(x1.reshape(sh))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Grid)
            and self.d == other.d
            and self.n_points == other.n_points
        )

    def __hash__(self) -> int:
        return hash((self.d, self.n_points))

    def __repr__(self) -> str:
        return f"Grid(d={self.d}, n_points={self.n_points})"

    def coordinates(self) -> list[np.ndarray]:
        """Dense coordinate arrays (meshgrid) for building sample fields."""
        return [np.broadcast_to(x, self.shape).copy() for x in self.x_axes]

    def conjugate_flip(self, coeffs: np.ndarray) -> np.ndarray:
        """Return the coefficient table evaluated at -n (FFT layout)."""
        return coeffs[self._neg_index]


@dataclass
class Field:
    """Real scalar samples on a grid, row-major, with spectral access."""

    grid: Grid
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != self.grid.shape:
            raise ParameterError(
                f"samples shape {self.samples.shape} does not match grid {self.grid.shape}"
            )

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "Field":
        """Sample ``fn(x1, ..., xd)`` on the grid."""
        xs = [np.broadcast_to(x, grid.shape) for x in grid.x_axes]
        return cls(grid, np.asarray(fn(*xs), dtype=float) + np.zeros(grid.shape))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    def copy(self) -> "Field":
        return Field(self.grid, self.samples.copy())

    def mean(self) -> float:
        return float(self.samples.mean())

    def integral(self) -> float:
        """Integral over the torus, cell volume times the sample sum."""
        return float(self.samples.sum()) * self.grid.cell_volume

    def l2_norm(self) -> float:
        return float(
            np.sqrt(np.sum(self.samples**2) * self.grid.cell_volume)
        )

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.samples)))

    def __add__(self, other: "Field") -> "Field":
        return Field(self.grid, self.samples + other.samples)

    def __sub__(self, other: "Field") -> "Field":
        return Field(self.grid, self.samples - other.samples)

    def __mul__(self, factor: float) -> "Field":
        return Field(self.grid, self.samples * factor)

    __rmul__ = __mul__


@dataclass
class VectorField:
    """d scalar components sharing one grid."""

    components: tuple[Field, ...]

    def __post_init__(self):
        self.components = tuple(self.components)
        if not self.components:
            raise ParameterError("vector field needs at least one component")
        g = self.components[0].grid
        if len(self.components) != g.d:
            raise ParameterError(
                f"expected {g.d} components on a {g.d}-dimensional grid, "
                f"got {len(self.components)}"
            )
        for c in self.components:
            if c.grid != g:
                raise ParameterError("vector field components live on different grids")

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(tuple(Field.zeros(grid) for _ in range(grid.d)))

    @classmethod
    def constant(cls, grid: Grid, values: Sequence[float]) -> "VectorField":
        if len(values) != grid.d:
            raise ParameterError("constant vector length must equal grid dimension")
        return cls(tuple(Field.constant(grid, v) for v in values))

    def copy(self) -> "VectorField":
        return VectorField(tuple(c.copy() for c in self.components))

    def __getitem__(self, j: int) -> Field:
        return self.components[j]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def max_abs(self) -> float:
        return max(c.max_abs() for c in self.components)

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(c.l2_norm() ** 2 for c in self.components)))


@dataclass
class Multiplier:
    """Fourier multiplier: a scalar symbol on the integer lattice plus a zero-mode rule.

    ``symbol`` maps the stacked wavenumber mesh (a list of broadcastable
    per-axis arrays) to the symbol values in FFT layout.  The symbol must be
    real-or-purely-imaginary with conjugate symmetry symbol(-n) ==
    conj(symbol(n)); application checks this and refuses otherwise.

    zero_mode_policy:
      * ``passthrough``  -- multiply the mean by symbol(0),
      * ``annihilate``   -- zero the mean of the output,
      * ``reject``       -- raise MeanNotZero unless the input is mean-free
                            (|mean| <= 1e-10 ||f||_{L^2}), then annihilate.
    """

    symbol: Callable[[list[np.ndarray]], np.ndarray]
    zero_mode_policy: str = "passthrough"
    name: str = ""

    _POLICIES = ("passthrough", "annihilate", "reject")

    def __post_init__(self):
        if self.zero_mode_policy == "reject-if-nonzero-mean":
            self.zero_mode_policy = "reject"
        if self.zero_mode_policy not in self._POLICIES:
            raise ParameterError(
                f"unknown zero-mode policy {self.zero_mode_policy!r}; "
                f"expected one of {self._POLICIES} "
                "('reject-if-nonzero-mean' is accepted for 'reject')"
            )

    def symbol_array(self, grid: Grid) -> np.ndarray:
        """Evaluate the symbol on the grid's wavenumber lattice.

        The zero mode is forced finite (0 under annihilate/reject) so that
        singular symbols like |n|^s with s < 0 are representable.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.asarray(self.symbol(grid.k_axes), dtype=complex)
        sym = np.broadcast_to(raw, grid.shape).copy()
        origin = (0,) * grid.d
        if self.zero_mode_policy in ("annihilate", "reject"):
            sym[origin] = 0.0
        elif not np.isfinite(sym[origin]):
            raise ParameterError(
                f"multiplier {self.name or self.symbol!r} is singular at n=0; "
                "use the 'annihilate' or 'reject' policy"
            )
        if not np.all(np.isfinite(sym)):
            raise ParameterError(
                f"multiplier {self.name or self.symbol!r} produced non-finite symbol values"
            )
        return sym


def _check_hermitian(sym: np.ndarray, grid: Grid, name: str) -> None:
    scale = max(float(np.max(np.abs(sym))), 1.0)
    defect = float(np.max(np.abs(grid.conjugate_flip(sym) - np.conj(sym))))
    if defect > REALNESS_TOL * scale:
        raise NonHermitianSymbol(
            f"symbol {name!r} violates symbol(-n) = conj(symbol(n)) "
            f"(defect {defect:.3e}); output would not be real"
        )


def _to_real(raw: np.ndarray, context: str) -> np.ndarray:
    scale = max(float(np.max(np.abs(raw))), 1.0)
    residue = float(np.max(np.abs(raw.imag)))
    if residue > REALNESS_TOL * scale:
        raise NonHermitianSymbol(
            f"{context}: imaginary residue {residue:.3e} exceeds tolerance"
        )
    return raw.real.copy()


def _require_mean_free(f: Field, context: str) -> None:
    if abs(f.mean()) > MEAN_TOL * f.l2_norm():
        raise MeanNotZero(
            f"{context}: |mean| = {abs(f.mean()):.3e} exceeds "
            f"{MEAN_TOL:g} * ||f||_L2 = {MEAN_TOL * f.l2_norm():.3e}"
        )


def forward_transform(f: Field) -> np.ndarray:
    """Unnormalized forward DFT; index the result directly by wavenumber.

    The returned complex table is in FFT layout, so ``coeffs[n1, n2]`` with
    (possibly negative) integer indices is the coefficient of exp(i n.x) times
    P^d; ``inverse_transform`` undoes it exactly.
    """
    return np.fft.fftn(f.samples)


def inverse_transform(coeffs: np.ndarray, grid: Grid) -> Field:
    """Inverse of :func:`forward_transform`; carries the 1/P^d factor."""
    return Field(grid, _to_real(np.fft.ifftn(coeffs), "inverse_transform"))


def apply_multiplier(f: Field, m: Multiplier) -> Field:
    """Apply a Fourier multiplier to a real field, returning a real field."""
    grid = f.grid
    sym = m.symbol_array(grid)
    _check_hermitian(sym, grid, m.name or "multiplier")
    if m.zero_mode_policy == "reject":
        _require_mean_free(f, f"multiplier {m.name or '<anonymous>'}")
    out = np.fft.ifftn(sym * np.fft.fftn(f.samples))
    return Field(grid, _to_real(out, m.name or "apply_multiplier"))


def _lambda_multiplier(s: float, policy: str) -> Multiplier:
    def symbol(k_axes: list[np.ndarray]) -> np.ndarray:
        k_abs = np.sqrt(sum(k**2 for k in k_axes))
        return np.power(k_abs, s, dtype=float)

    return Multiplier(symbol, zero_mode_policy=policy, name=f"|n|^{s:g}")


def fractional_power(f: Field, s: float) -> Field:
    """Fractional Laplacian power with symbol |n|^s.

    The zero mode is annihilated for every s != 0, so positive and negative
    powers invert each other on mean-free fields; s = 0 is the identity.
    Negative s rejects input whose mean is not (numerically) zero.
    """
    if s == 0:
        return f.copy()
    policy = "reject" if s < 0 else "annihilate"
    return apply_multiplier(f, _lambda_multiplier(s, policy))


def gradient(f: Field) -> VectorField:
    """Spectral gradient, symbol i*n_j per component (Nyquist zeroed)."""
    grid = f.grid
    fhat = np.fft.fftn(f.samples)
    comps = tuple(
        Field(grid, _to_real(np.fft.ifftn(ik * fhat), "gradient"))
        for ik in grid.ik
    )
    return VectorField(comps)


def divergence(v: VectorField) -> Field:
    """Spectral divergence; its zero mode is identically zero."""
    grid = v.grid
    out = np.zeros(grid.shape, dtype=complex)
    for ik, comp in zip(grid.ik, v.components):
        out += ik * np.fft.fftn(comp.samples)
    return Field(grid, _to_real(np.fft.ifftn(out), "divergence"))


def green_potential(g: Field) -> Field:
    """Mean-free solution U of -Laplace(U) = g, i.e. Uhat(n) = ghat(n)/|n|^2.

    Requires mean-free input; the n = 0 mode of U is set to zero.  Defined for
    every d >= 1 by the same multiplier (for d = 1 this is a lattice
    extension of the d >= 2 potential, exposed for completeness).
    """

    def symbol(k_axes: list[np.ndarray]) -> np.ndarray:
        k_sq = sum(k**2 for k in k_axes)
        return 1.0 / k_sq

    return apply_multiplier(
        f=g,
        m=Multiplier(symbol, zero_mode_policy="reject", name="1/|n|^2"),
    )


def sobolev_norm(f: Field, m: int) -> float:
    """H^m norm (sum_{k=0}^m ||Lambda^k f||_{L^2}^2)^(1/2) via Parseval."""
    if m < 0 or int(m) != m:
        raise ParameterError(f"Sobolev order must be a nonnegative integer, got {m}")
    grid = f.grid
    power = np.abs(np.fft.fftn(f.samples)) ** 2
    weight = np.ones(grid.shape)
    acc = weight.copy()
    for _ in range(int(m)):
        weight = weight * grid.k_sq
        acc += weight
    return float(np.sqrt(grid.parseval * np.sum(acc * power)))


def sobolev_norm_fractional(f: Field, s: float) -> float:
    """Bessel-potential H^s norm (sum_n (1+|n|^2)^s |fhat(n)|^2)^(1/2).

    Equivalent to :func:`sobolev_norm` for integer s >= 0; used where
    non-integer regularity indices are needed.
    """
    grid = f.grid
    power = np.abs(np.fft.fftn(f.samples)) ** 2
    weight = (1.0 + grid.k_sq) ** s
    return float(np.sqrt(grid.parseval * np.sum(weight * power)))


def seminorm(f: Field, s: float) -> float:
    """Homogeneous seminorm ||Lambda^s f||_{L^2} with the zero mode dropped."""
    grid = f.grid
    power = np.abs(np.fft.fftn(f.samples)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = np.power(grid.k_sq, s, dtype=float)
    weight[(0,) * grid.d] = 1.0 if s == 0 else 0.0
    return float(np.sqrt(grid.parseval * np.sum(weight * power)))


def dealias(f: Field) -> Field:
    """2/3-rule truncation: zero the coefficients with max_j |n_j| > P/3."""
    grid = f.grid
    fhat = np.fft.fftn(f.samples)
    fhat[~grid.dealias_mask] = 0.0
    return Field(grid, _to_real(np.fft.ifftn(fhat), "dealias"))


def commutator_apply(s: float, g: Field, f: Field) -> Field:
    """Commutator [Lambda^s, g] f = Lambda^s(g f) - g Lambda^s f.

    Pointwise products are dealiased before and after differentiation.  Both
    routes use the mean-annihilating Lambda^s (no rejection), since the
    product g*f generally carries a mean even for mean-free factors.
    """
    if g.grid != f.grid:
        raise ParameterError("commutator operands must share one grid")
    if s == 0:
        return Field.zeros(f.grid)
    lam = _lambda_multiplier(s, "annihilate")
    product = dealias(Field(f.grid, g.samples * f.samples))
    first = apply_multiplier(product, lam)
    lam_f = apply_multiplier(f, lam)
    second = dealias(Field(f.grid, g.samples * lam_f.samples))
    return first - second
