"""Spectral multipliers, projections, norms, and paraproducts on the torus.

The frequency cutoff profile rho is fixed once for the whole package: a smooth
radial profile with rho(x) = 1 for |x| <= 1 and rho(x) = 0 for |x| >= 9/8,
interpolated on (1, 9/8) by the symmetric C-infinity smoothstep
s(u) = B(u) / (B(u) + B(1 - u)) with B(u) = exp(-1/u).  The profile is radially
non-increasing, so dyadic annulus symbols rho_N = rho_{<=N} - rho_{<=N/2} are
non-negative.

Littlewood-Paley blocks use N in {1, 2, 4, ..., M/2}; the N = 1 block is
rho_{<=1} itself.  Besov norms are grid proxies:

    besov(f, alpha, p) = max(|mean f|, max_N N^alpha ||P_N (f - mean)||_{L^p})

with non-normalized L^p norms (||1||_{L^p} = (2 pi)^{2/p}).  Gauge-invariant
norms minimize (connections) or maximize (scalars) over integer shifts in a
finite search box.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .grid import (
    TWO_PI,
    ConnectionField,
    ScalarField,
    TorusGrid,
    divergence_values,
    forward_values,
    inverse_values,
    multiply_values,
)

# ---------------------------------------------------------------------------
# Cutoff profile and Littlewood-Paley symbols.
# ---------------------------------------------------------------------------


def _bump_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 at u <= 0, 1 at u >= 1, strictly monotone between."""
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        b = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, 1e-300)), 0.0)
        c = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, 1e-300)), 0.0)
    return b / (b + c)


def rho_profile(x) -> np.ndarray:
    """Radial cutoff profile: 1 on [0, 1], 0 on [9/8, inf), smooth monotone between."""
    r = np.abs(np.asarray(x, dtype=np.float64))
    return _bump_step((9.0 / 8.0 - r) * 8.0)


def cutoff_symbol(n, N: float, kind: str = "le") -> np.ndarray:
    """Evaluate rho_{<=N}(n) or the annulus symbol rho_N(n).

    ``n`` is a mode magnitude |n| (scalar or array).  kind "le" gives
    rho(|n|/N); kind "block" gives rho_{<=N} - rho_{<=N/2} for N >= 2 and
    rho_{<=1} for N = 1.
    """
    if N <= 0:
        raise ValueError(f"cutoff scale must be positive, got {N}")
    r = np.asarray(n, dtype=np.float64)
    if kind == "le":
        return rho_profile(r / N)
    if kind == "block":
        if N == 1:
            return rho_profile(r)
        return rho_profile(r / N) - rho_profile(2.0 * r / N)
    raise ValueError(f"unknown cutoff kind {kind!r}")


def dyadic_scales(M: int) -> list[int]:
    """Littlewood-Paley scales 1, 2, 4, ..., M/2."""
    scales = []
    N = 1
    while N <= M // 2:
        scales.append(N)
        N *= 2
    return scales


def project_values(grid: TorusGrid, values: np.ndarray, N: float, kind: str = "le") -> np.ndarray:
    sym = cutoff_symbol(grid.mode_norm, N, kind)
    return inverse_values(grid, sym * forward_values(grid, values))


def project(f: ScalarField, N: float, kind: str = "le") -> ScalarField:
    """Littlewood-Paley projection P_{<=N} / P_N (also the mollifier at scale N)."""
    return ScalarField(f.grid, project_values(f.grid, f.values, N, kind))


def project_connection(a: ConnectionField, N: float, kind: str = "le") -> ConnectionField:
    out = np.stack([project_values(a.grid, a.values[0], N, kind).real,
                    project_values(a.grid, a.values[1], N, kind).real])
    return ConnectionField(a.grid, out, a.coulomb)


# ---------------------------------------------------------------------------
# Leray projection, heat semigroup, Duhamel integral.
# ---------------------------------------------------------------------------


def leray_project_coeffs(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Coefficient-space transverse projection; the zero mode is untouched."""
    c1, c2 = coeffs[0], coeffs[1]
    n1, n2 = grid.modes
    nsq = grid.mode_norm_sq
    with np.errstate(divide="ignore", invalid="ignore"):
        dot = np.where(nsq > 0, (n1 * c1 + n2 * c2) / nsq, 0.0)
    return np.stack([c1 - n1 * dot, c2 - n2 * dot])


def leray_project_values(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    """Transverse projection (P A)^j = A^j - Lap^{-1} d^j d_k A^k; mean untouched."""
    coeffs = np.stack([forward_values(grid, a[0]), forward_values(grid, a[1])])
    out = leray_project_coeffs(grid, coeffs)
    return np.stack([inverse_values(grid, out[0]), inverse_values(grid, out[1])])


def leray_project(a: ConnectionField) -> ConnectionField:
    out = leray_project_values(a.grid, a.values.astype(np.complex128)).real
    return ConnectionField(a.grid, out, coulomb=True)


def heat_multiplier(grid: TorusGrid, t: float, massive: bool = False) -> np.ndarray:
    if t < 0:
        raise ValueError(f"heat flow time must be non-negative, got {t}")
    lam = grid.mode_norm_sq + (1.0 if massive else 0.0)
    return np.exp(-t * lam)


def heat_semigroup_values(grid: TorusGrid, values: np.ndarray, t: float, massive: bool = False) -> np.ndarray:
    return inverse_values(grid, heat_multiplier(grid, t, massive) * forward_values(grid, values))


def heat_semigroup(f: ScalarField, t: float, massive: bool = False) -> ScalarField:
    return ScalarField(f.grid, heat_semigroup_values(f.grid, f.values, t, massive))


def heat_semigroup_connection(a: ConnectionField, t: float, massive: bool = False) -> ConnectionField:
    out = np.stack([heat_semigroup_values(a.grid, a.values[0], t, massive).real,
                    heat_semigroup_values(a.grid, a.values[1], t, massive).real])
    return ConnectionField(a.grid, out, a.coulomb)


def duhamel_values(
    grid: TorusGrid,
    forcing: Iterable[np.ndarray],
    dt: float,
    t: float,
    massive: bool = False,
) -> np.ndarray:
    """integral_0^t exp((t-s) Lap) F(s) ds for F piecewise constant on steps.

    ``forcing`` holds samples F(k dt) used on [k dt, (k+1) dt); the per-mode
    quadrature  (exp(-(t-b) lam) - exp(-(t-a) lam)) / lam  is exact for such F.
    """
    forcing = list(forcing)
    if t < 0 or t > dt * len(forcing) + 1e-12:
        raise ValueError(f"time {t} outside the forcing window [0, {dt * len(forcing)}]")
    lam = grid.mode_norm_sq + (1.0 if massive else 0.0)
    acc = np.zeros((grid.M, grid.M), dtype=np.complex128)
    for k, fk in enumerate(forcing):
        a = k * dt
        if a >= t:
            break
        b = min((k + 1) * dt, t)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(lam > 0, (np.exp(-(t - b) * lam) - np.exp(-(t - a) * lam)) / lam, b - a)
        acc += w * forward_values(grid, fk)
    return inverse_values(grid, acc)


def duhamel(forcing: Iterable[ScalarField], dt: float, t: float, massive: bool = False) -> ScalarField:
    forcing = list(forcing)
    grid = forcing[0].grid
    return ScalarField(grid, duhamel_values(grid, [f.values for f in forcing], dt, t, massive))


# ---------------------------------------------------------------------------
# Norms.
# ---------------------------------------------------------------------------


def lp_norm(grid: TorusGrid, values: np.ndarray, p: float) -> float:
    """Non-normalized grid L^p norm; ||1||_{L^p} = (2 pi)^{2/p}."""
    v = np.abs(values)
    if p == np.inf:
        return float(v.max())
    if p < 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    return float((grid.cell_area() * (v**p).sum()) ** (1.0 / p))


def besov_norm_values(grid: TorusGrid, values: np.ndarray, alpha: float, p: float) -> float:
    mean = values.mean()
    rest = values - mean
    best = abs(complex(mean))
    coeffs = forward_values(grid, rest)
    for N in dyadic_scales(grid.M):
        sym = cutoff_symbol(grid.mode_norm, N, "block")
        block = inverse_values(grid, sym * coeffs)
        best = max(best, float(N) ** alpha * lp_norm(grid, block, p))
    return best


def besov_norm(f, alpha: float, p: float = np.inf) -> float:
    """Grid Besov proxy max(|mean|, max_N N^alpha ||P_N(f - mean)||_p).

    Connections are measured component-wise (max over the two components).
    """
    if isinstance(f, ConnectionField):
        return max(besov_norm_values(f.grid, f.values[0], alpha, p),
                   besov_norm_values(f.grid, f.values[1], alpha, p))
    if isinstance(f, ScalarField):
        return besov_norm_values(f.grid, f.values, alpha, p)
    raise TypeError(f"besov_norm expects a field, got {type(f)!r}")


def default_search_radius(a: ConnectionField) -> int:
    return int(np.ceil(np.abs(a.mean()).max())) + 2


def gauge_invariant_norm(
    f,
    kind: str,
    alpha: float,
    p: float = np.inf,
    search_radius: int | None = None,
) -> float:
    """Norms invariant under the integer gauge action on the torus.

    connection: min over n in [-R, R]^2 of besov(A + n); scalar: max over the
    same box of besov(exp(-i n.x) phi).  The lattice sup/inf is truncated to
    the box; the default radius covers the connection mean plus a margin of 2.
    """
    if kind == "connection":
        a: ConnectionField = f
        R = default_search_radius(a) if search_radius is None else int(search_radius)
        best = np.inf
        for n1 in range(-R, R + 1):
            for n2 in range(-R, R + 1):
                shifted = a.values + np.array([n1, n2], dtype=np.float64)[:, None, None]
                val = max(besov_norm_values(a.grid, shifted[0], alpha, p),
                          besov_norm_values(a.grid, shifted[1], alpha, p))
                best = min(best, val)
        return float(best)
    if kind == "scalar":
        phi: ScalarField = f
        R = 2 if search_radius is None else int(search_radius)
        x1, x2 = phi.grid.x
        best = 0.0
        for n1 in range(-R, R + 1):
            for n2 in range(-R, R + 1):
                shifted = np.exp(-1j * (n1 * x1 + n2 * x2)) * phi.values
                best = max(best, besov_norm_values(phi.grid, shifted, alpha, p))
        return float(best)
    raise ValueError(f"unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# Paraproducts.
# ---------------------------------------------------------------------------


def _block_values(grid: TorusGrid, coeffs: np.ndarray, N: int) -> np.ndarray:
    sym = cutoff_symbol(grid.mode_norm, N, "block")
    return inverse_values(grid, sym * coeffs)


def paraproduct_values(grid: TorusGrid, f: np.ndarray, g: np.ndarray, mode: str, dealias: bool = True) -> np.ndarray:
    """Dyadic-pair decomposition of f * g.

    "lo" collects pairs with the f block at scale M <= N/8 of the g block,
    "hi" the mirror image, and "res" the resonant range N/8 < M < 8N.
    """
    cf = forward_values(grid, f)
    cg = forward_values(grid, g)
    scales = dyadic_scales(grid.M)
    acc = np.zeros((grid.M, grid.M), dtype=np.complex128)
    if mode in ("lo", "hi"):
        lo, hi = (cf, cg) if mode == "lo" else (cg, cf)
        for N in scales:
            if N < 8:
                continue
            low_part = inverse_values(grid, cutoff_symbol(grid.mode_norm, N // 8, "le") * lo)
            acc += multiply_values(grid, low_part, _block_values(grid, hi, N), dealias)
        return acc
    if mode == "res":
        blocks_f = {N: _block_values(grid, cf, N) for N in scales}
        blocks_g = {N: _block_values(grid, cg, N) for N in scales}
        for N in scales:
            for Mf in scales:
                if N / 8 < Mf < 8 * N:
                    acc += multiply_values(grid, blocks_f[Mf], blocks_g[N], dealias)
        return acc
    raise ValueError(f"unknown paraproduct mode {mode!r}")


def paraproduct(f: ScalarField, g: ScalarField, mode: str, dealias: bool = True) -> ScalarField:
    if f.grid.M != g.grid.M:
        raise ValueError("fields live on different grids")
    return ScalarField(f.grid, paraproduct_values(f.grid, f.values, g.values, mode, dealias))


# ---------------------------------------------------------------------------
# Divergence helper re-exported for the Coulomb certificates.
# ---------------------------------------------------------------------------


def coulomb_defect(a: ConnectionField) -> float:
    """max |d_j A^j| over the grid (spectral divergence)."""
    return float(np.abs(divergence_values(a.grid, a.values.astype(np.complex128))).max())


def certify_coulomb(a: ConnectionField) -> ConnectionField:
    scale = float(np.abs(a.values).max())
    if coulomb_defect(a) <= 1e-10 * max(scale, 1e-300):
        return ConnectionField(a.grid, a.values, coulomb=True)
    return ConnectionField(a.grid, a.values, coulomb=False)
