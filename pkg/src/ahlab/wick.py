"""Wick calculus for the complex scalar: Hermite polynomials and renormalization.

Complex Hermite polynomials H_{m,n}(z, zbar; s) with variance parameter
s = sigma^2 are the Wick-ordered monomials :z^m zbar^n: with respect to a
rotation-invariant complex Gaussian of variance E|Z|^2 = s.  Two routes are
kept deliberately independent:

* closed form   H_{m,n} = sum_j (-1)^j j! C(m,j) C(n,j) s^j z^(m-j) zbar^(n-j)
* recursion     H_{m+1,n} = z H_{m,n} - n s H_{m,n-1}   (and its conjugate twin)

The renormalization constant sigma_squared(N) is the stationary variance of a
single massive-heat mode stack: (8 pi^2)^(-1) sum_n rho(|n|/N)^2 / (1 + |n|^2),
an exact finite sum (the mollifier vanishes beyond |n| > 9N/8).  Its
independent oracle integrates the squared smoothing kernel in physical space
over the time axis: sigma^2 = int_0^inf exp(-2s) int_T2 |h_s|^2 dy ds, with
h_s assembled by direct mode summation (no FFT anywhere on that route).

Wick powers of a grid field are evaluated through monomials built by iterated
dealiased (3/2-padded) binary products, so the result is the band-truncated
polynomial rather than the aliased pointwise one.
"""

from __future__ import annotations

from math import comb, factorial

import numpy as np

from .grid import ScalarField, TorusGrid, multiply_values
from .spectral import rho_profile

TWO_PI = 2.0 * np.pi


def hermite_eval(m: int, n: int, z, sigma2: float, method: str = "closed"):
    """H_{m,n}(z, conj(z); sigma2), vectorized over z."""
    if m < 0 or n < 0:
        raise ValueError(f"orders must be non-negative, got ({m}, {n})")
    z = np.asarray(z, dtype=np.complex128)
    if method == "closed":
        zb = np.conj(z)
        out = np.zeros_like(z)
        for j in range(min(m, n) + 1):
            coef = (-1) ** j * factorial(j) * comb(m, j) * comb(n, j) * sigma2**j
            out = out + coef * z ** (m - j) * zb ** (n - j)
        return out
    if method == "recursion":
        zb = np.conj(z)
        # column H[j, 0] = z^j, then raise the second index with
        # H_{j, k+1} = zbar H_{j,k} - j sigma2 H_{j-1,k}
        col = [np.ones_like(z)]
        for j in range(m):
            col.append(z * col[-1])
        prev = None
        for _ in range(n):
            nxt = []
            for j in range(m + 1):
                lower = 0.0 if j == 0 else j * sigma2 * col[j - 1]
                nxt.append(zb * col[j] - lower)
            prev, col = col, nxt
        return col[m]
    raise ValueError(f"unknown method {method!r}")


def hermite_shift_check(m: int, n: int, z, w, sigma2: float) -> float:
    """Max residual of the translation identity

    H_{m,n}(z + w) = sum_{j<=m, k<=n} C(m,j) C(n,k) H_{j,k}(z) w^(m-j) wbar^(n-k).
    """
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    lhs = hermite_eval(m, n, z + w, sigma2)
    rhs = np.zeros_like(lhs)
    wb = np.conj(w)
    for j in range(m + 1):
        for k in range(n + 1):
            rhs = rhs + comb(m, j) * comb(n, k) * hermite_eval(j, k, z, sigma2) * w ** (m - j) * wb ** (n - k)
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# Renormalization constant.
# ---------------------------------------------------------------------------


def _mode_block(N: float) -> tuple[np.ndarray, np.ndarray]:
    """All lattice modes with |n| <= 9N/8 + 1 and the mollifier weight there."""
    R = int(np.ceil(9.0 * N / 8.0)) + 1
    n1, n2 = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
    r = np.hypot(n1, n2)
    return r, rho_profile(r / N)


def sigma_squared(N: float) -> float:
    """Stationary renormalization variance of the mollified field at scale N."""
    if N <= 0:
        raise ValueError(f"mollification scale must be positive, got {N}")
    r, w = _mode_block(N)
    return float(np.sum(w**2 / (1.0 + r**2)) / (8.0 * np.pi**2))


def sigma_squared_quadrature(N: float, s_points: int = 20_000) -> float:
    """Oracle route for sigma_squared: time-integrated squared smoothing kernel.

    h_s(y) = (2 pi)^(-2) sum_n rho(|n|/N) exp(-s |n|^2) exp(i n.y) is evaluated
    by direct mode summation on a uniform y-grid fine enough to integrate the
    trigonometric polynomial |h_s|^2 exactly; the s-integral uses a trapezoid
    rule on a geometric grid.
    """
    if N <= 0:
        raise ValueError(f"mollification scale must be positive, got {N}")
    R = int(np.ceil(9.0 * N / 8.0)) + 1
    n1, n2 = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
    keep = np.hypot(n1, n2) <= R
    n1, n2 = n1[keep], n2[keep]
    rho = rho_profile(np.hypot(n1, n2) / N)
    nsq = (n1**2 + n2**2).astype(float)

    My = 4 * R + 6  # |h_s|^2 has band 2R; this grid integrates it exactly
    y = TWO_PI * np.arange(My) / My
    y1, y2 = np.meshgrid(y, y, indexing="ij")
    phases = np.exp(1j * (np.outer(n1, y1.ravel()) + np.outer(n2, y2.ravel())))

    s_grid = np.concatenate([[0.0], np.geomspace(1e-9, 25.0, s_points)])
    energy = np.empty(s_grid.size)
    chunk = max(1, 2_000_000 // phases.shape[1])
    for lo in range(0, s_grid.size, chunk):
        sl = s_grid[lo : lo + chunk]
        coef = rho[None, :] * np.exp(-np.outer(sl, nsq)) / TWO_PI**2
        h = coef @ phases
        energy[lo : lo + chunk] = np.mean(np.abs(h) ** 2, axis=1) * TWO_PI**2
    return float(np.trapezoid(np.exp(-2.0 * s_grid) * energy, s_grid))


# ---------------------------------------------------------------------------
# Wick powers on the grid.
# ---------------------------------------------------------------------------


def wick_power_values(grid: TorusGrid, values: np.ndarray, q: int, sigma2: float) -> np.ndarray:
    """:|phi|^(q-1) phi: = H_{(q+1)/2, (q-1)/2}(phi, conj phi; sigma2), odd q.

    Monomials phi^a conj(phi)^b are built by iterated 3/2-padded binary
    products, so every partial product is dealiased and the result is band
    truncated.
    """
    if q < 1 or q % 2 == 0:
        raise ValueError(f"Wick power needs odd q >= 1, got {q}")
    m, n = (q + 1) // 2, (q - 1) // 2
    conj = np.conj(values)
    # powers phi^a for a <= m and conj(phi)^b for b <= n, each dealiased
    pows = [np.ones_like(values)]
    for _ in range(m):
        pows.append(multiply_values(grid, pows[-1], values))
    cpows = [np.ones_like(values)]
    for _ in range(n):
        cpows.append(multiply_values(grid, cpows[-1], conj))
    out = np.zeros_like(values)
    for j in range(min(m, n) + 1):
        coef = (-1) ** j * factorial(j) * comb(m, j) * comb(n, j) * sigma2**j
        out = out + coef * multiply_values(grid, pows[m - j], cpows[n - j])
    return out


def wick_power(f: ScalarField, q: int, sigma2: float) -> ScalarField:
    return ScalarField(f.grid, wick_power_values(f.grid, f.values, q, sigma2))
