"""Torus discretization and Fourier transform conventions.

The spatial domain is the flat 2-torus [0, 2pi)^2 sampled on an M x M grid,
x_jk = (2pi j / M, 2pi k / M).  Fourier coefficients follow the convention

    coeff(n) = M^{-2} sum_x f(x) exp(-i n.x),      f(x) = sum_n coeff(n) exp(i n.x),

so coeff(n) approximates (2pi)^{-2} integral f exp(-i n.x) dx and the discrete
Parseval identity reads  (2pi)^{-2} ||f||_{L^2}^2 = sum_n |coeff(n)|^2.

Modes run over n in {-M/2, ..., M/2-1}^2 in FFT order; the Nyquist row and
column (any coordinate equal to -M/2) are zeroed by every spectral operation so
that real fields keep exact conjugate symmetry and spectral derivatives are
exact on the retained band.

Pointwise products of fields are dealiased by 3/2 zero padding by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusGrid:
    """M x M sampling of the 2-torus, with cached mode arrays."""

    M: int

    def __post_init__(self) -> None:
        if self.M <= 0 or self.M % 2 != 0:
            raise ValueError(f"grid size must be a positive even integer, got {self.M}")

    @cached_property
    def x(self) -> np.ndarray:
        """Grid coordinates, shape (2, M, M): x[0] = x1, x[1] = x2."""
        t = TWO_PI * np.arange(self.M) / self.M
        x1, x2 = np.meshgrid(t, t, indexing="ij")
        return np.stack([x1, x2])

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode arrays, shape (2, M, M) in FFT order."""
        n = np.fft.fftfreq(self.M, d=1.0 / self.M).astype(np.int64)
        n1, n2 = np.meshgrid(n, n, indexing="ij")
        return np.stack([n1, n2])

    @cached_property
    def mode_norm_sq(self) -> np.ndarray:
        n1, n2 = self.modes
        return (n1 * n1 + n2 * n2).astype(np.float64)

    @cached_property
    def mode_norm(self) -> np.ndarray:
        return np.sqrt(self.mode_norm_sq)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes with any coordinate equal to -M/2 (always zeroed)."""
        n1, n2 = self.modes
        return (n1 == -self.M // 2) | (n2 == -self.M // 2)

    @cached_property
    def keep_mask(self) -> np.ndarray:
        return ~self.nyquist_mask

    def cell_area(self) -> float:
        return (TWO_PI / self.M) ** 2


@dataclass
class ScalarField:
    """Complex scalar field sampled on a TorusGrid."""

    grid: TorusGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.M, self.grid.M):
            raise ValueError(f"scalar values must have shape {(self.grid.M,) * 2}, got {self.values.shape}")

    def mean(self) -> complex:
        return complex(self.values.mean())

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class ConnectionField:
    """Real two-component connection one-form sampled on a TorusGrid.

    The coulomb flag, when set, certifies that the spectral divergence
    satisfies max|d_j A^j| <= 1e-10 * ||A||_inf at construction time.
    """

    grid: TorusGrid
    values: np.ndarray
    coulomb: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (2, self.grid.M, self.grid.M):
            raise ValueError(f"connection values must have shape {(2, self.grid.M, self.grid.M)}, got {self.values.shape}")

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=(1, 2))

    def copy(self) -> "ConnectionField":
        return ConnectionField(self.grid, self.values.copy(), self.coulomb)


@dataclass
class Spectrum:
    """Fourier coefficients of a scalar field, FFT mode order."""

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.grid.M, self.grid.M):
            raise ValueError(f"spectrum must have shape {(self.grid.M,) * 2}, got {self.coeffs.shape}")


# ---------------------------------------------------------------------------
# Transforms.  Internal helpers work on bare arrays; the public pair wraps
# them in the ScalarField/Spectrum containers.
# ---------------------------------------------------------------------------


def forward_values(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """coeff(n) = M^{-2} sum_x f(x) exp(-i n.x), Nyquist zeroed."""
    coeffs = np.fft.fft2(values) / grid.M**2
    coeffs[grid.nyquist_mask] = 0.0
    return coeffs


def inverse_values(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """f(x) = sum_n coeff(n) exp(i n.x), Nyquist zeroed first."""
    c = np.where(grid.keep_mask, coeffs, 0.0)
    return np.fft.ifft2(c) * grid.M**2


def fourier_forward(field: ScalarField) -> Spectrum:
    return Spectrum(field.grid, forward_values(field.grid, field.values))


def fourier_inverse(spec: Spectrum) -> ScalarField:
    return ScalarField(spec.grid, inverse_values(spec.grid, spec.coeffs))


# ---------------------------------------------------------------------------
# Dealiased products (3/2 zero padding).
# ---------------------------------------------------------------------------


def _embed(grid: TorusGrid, coeffs: np.ndarray, Mp: int) -> np.ndarray:
    """Zero-pad FFT-ordered coefficients from an M grid into an Mp grid."""
    M = grid.M
    out = np.zeros((Mp, Mp), dtype=np.complex128)
    half = M // 2
    sl = [slice(0, half), slice(-half, None)]  # non-negative / negative modes
    src = [slice(0, half), slice(half, M)]
    for a in range(2):
        for b in range(2):
            out[sl[a], sl[b]] = coeffs[src[a], src[b]]
    return out


def _extract(grid: TorusGrid, coeffs_p: np.ndarray) -> np.ndarray:
    """Truncate FFT-ordered coefficients on an Mp grid back to the M grid."""
    M = grid.M
    Mp = coeffs_p.shape[0]
    out = np.zeros((M, M), dtype=np.complex128)
    half = M // 2
    sl = [slice(0, half), slice(-half, None)]
    dst = [slice(0, half), slice(half, M)]
    for a in range(2):
        for b in range(2):
            out[dst[a], dst[b]] = coeffs_p[sl[a], sl[b]]
    out[grid.nyquist_mask] = 0.0
    return out


def multiply_values(grid: TorusGrid, u: np.ndarray, v: np.ndarray, dealias: bool = True) -> np.ndarray:
    """Pointwise product of two sampled fields, 3/2-padded by default."""
    if not dealias:
        return u * v
    Mp = (3 * grid.M) // 2
    cu = _embed(grid, forward_values(grid, u), Mp)
    cv = _embed(grid, forward_values(grid, v), Mp)
    up = np.fft.ifft2(cu) * Mp**2
    vp = np.fft.ifft2(cv) * Mp**2
    cw = np.fft.fft2(up * vp) / Mp**2
    return inverse_values(grid, _extract(grid, cw))


def multiply(f: ScalarField, g: ScalarField, dealias: bool = True) -> ScalarField:
    if f.grid.M != g.grid.M:
        raise ValueError("fields live on different grids")
    return ScalarField(f.grid, multiply_values(f.grid, f.values, g.values, dealias))


# ---------------------------------------------------------------------------
# Spectral derivatives.
# ---------------------------------------------------------------------------


def partial_values(grid: TorusGrid, values: np.ndarray, j: int) -> np.ndarray:
    """Spectral partial derivative d/dx_j (j in {1, 2})."""
    if j not in (1, 2):
        raise ValueError(f"direction must be 1 or 2, got {j}")
    coeffs = forward_values(grid, values)
    return inverse_values(grid, 1j * grid.modes[j - 1] * coeffs)


def laplacian_values(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    coeffs = forward_values(grid, values)
    return inverse_values(grid, -grid.mode_norm_sq * coeffs)


def inverse_laplacian_values(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """Solve Laplace u = f per mode; acts as 0 on the zero mode."""
    coeffs = forward_values(grid, values)
    lam = -grid.mode_norm_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(lam != 0.0, coeffs / lam, 0.0)
    return inverse_values(grid, out)


def divergence_values(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    """Spectral divergence d_1 A^1 + d_2 A^2 of a (2, M, M) array."""
    return partial_values(grid, a[0], 1) + partial_values(grid, a[1], 2)
