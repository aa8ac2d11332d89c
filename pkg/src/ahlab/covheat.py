"""Covariant heat machinery: derivatives, curvature, energy, kernels, objects.

Conventions (matching the rest of the package):

* covariant derivative        D_j phi = d_j phi + i B_j phi
* covariant Laplacian         D^j D_j phi = Lap phi + 2i B.grad phi
                                            + i (div B) phi - |B|^2 phi
* curvature                   F = d_1 B_2 - d_2 B_1
* energy                      int |F|^2/2 + (|D_1 phi|^2 + |D_2 phi|^2)/2
                                  + |phi|^(q+1)/(q+1)
  (|F_A|^2 = F_jk F^jk = 2 F^2 contributes F^2/2 after the 1/4 weight)

Heat evolutions use exponential integrators: the flat (massive) Laplacian is
integrated exactly per Fourier mode, the gauge terms are explicit.  Two
steppers are provided: "euler" (exponential Euler, first order, default for
stochastic objects) and "heun" (exponential trapezoid, second order, used for
kernel-accuracy work).

The covariant heat kernel is computed by three independent backends:

* kernel_pde      - evolve a band-mollified delta under the covariant flow;
* kernel_constant - closed-form winding sum for spatially constant b;
* kernel_fki      - Feynman-Kac-Ito: flat kernel times the Monte-Carlo mean of
                    exp(-i int B.dW - i int (div B) du) over rate-2 torus
                    Brownian bridges (winding class sampled first, then a
                    planar bridge; Ito sums by left-point Euler).

All evolutions run at the grid's resolution; deltas are mollified to the
band <= M/4 plateau of the smooth cutoff and comparisons account for that
scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import (
    TWO_PI,
    ConnectionField,
    ScalarField,
    TorusGrid,
    _embed,
    divergence_values,
    forward_values,
    inverse_values,
    laplacian_values,
    multiply_values,
    partial_values,
)
from .noise import NoisePath
from .spectral import cutoff_symbol


def integral(grid: TorusGrid, values: np.ndarray) -> complex | float:
    """Grid quadrature of a field over the torus (exact for resolved bands)."""
    out = np.mean(values, axis=(-2, -1)) * TWO_PI**2
    return complex(out) if np.iscomplexobj(values) else float(out)


# ---------------------------------------------------------------------------
# Connections.
# ---------------------------------------------------------------------------


class Connection:
    """A time-indexed real connection field with an optional analytic tag.

    Kinds: "constant" (a fixed 2-vector), "static" (a fixed field),
    "heat" (heat flow of given data from time t0), "tabulated" (samples on a
    time grid, linear interpolation in between).
    """

    def __init__(self, grid: TorusGrid, kind: str, **payload):
        self.grid = grid
        self.kind = kind
        self._p = payload
        if kind == "constant":
            b = np.asarray(payload["b"], dtype=float)
            if b.shape != (2,):
                raise ValueError("constant connection needs a 2-vector")
            self._field = np.broadcast_to(b[:, None, None], (2, grid.M, grid.M)).copy()
        elif kind == "static":
            v = np.asarray(payload["values"], dtype=float)
            if v.shape != (2, grid.M, grid.M):
                raise ValueError(f"static connection needs shape (2, {grid.M}, {grid.M})")
            self._field = v
        elif kind == "heat":
            self._coeffs = np.stack([forward_values(grid, payload["a0"][j]) for j in range(2)])
            self._t0 = float(payload.get("t0", 0.0))
        elif kind == "tabulated":
            self._times = np.asarray(payload["times"], dtype=float)
            self._values = np.asarray(payload["values"], dtype=float)
            if self._values.shape != (self._times.size, 2, grid.M, grid.M):
                raise ValueError("tabulated connection shape mismatch")
            if not np.all(np.isfinite(self._values)):
                raise ValueError("tabulated connection has non-finite samples")
        else:
            raise ValueError(f"unknown connection kind {kind!r}")

    @classmethod
    def constant(cls, grid: TorusGrid, b) -> "Connection":
        return cls(grid, "constant", b=b)

    @classmethod
    def static(cls, grid: TorusGrid, values) -> "Connection":
        return cls(grid, "static", values=values)

    @classmethod
    def heat_flow(cls, grid: TorusGrid, a0, t0: float = 0.0) -> "Connection":
        return cls(grid, "heat", a0=np.asarray(a0, dtype=complex), t0=t0)

    @classmethod
    def tabulated(cls, grid: TorusGrid, times, values) -> "Connection":
        return cls(grid, "tabulated", times=times, values=values)

    @property
    def is_static(self) -> bool:
        return self.kind in ("constant", "static")

    def constant_value(self) -> np.ndarray:
        if self.kind != "constant":
            raise ValueError("not a constant-tagged connection")
        return np.asarray(self._p["b"], dtype=float)

    def sample(self, t: float) -> np.ndarray:
        if self.kind in ("constant", "static"):
            return self._field
        if self.kind == "heat":
            damp = np.exp(-(t - self._t0) * self.grid.mode_norm_sq)
            return np.stack([inverse_values(self.grid, damp * self._coeffs[j]).real for j in range(2)])
        times, vals = self._times, self._values
        if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
            raise ValueError(f"time {t} outside tabulated range [{times[0]}, {times[-1]}]")
        i = int(np.clip(np.searchsorted(times, t) - 1, 0, times.size - 2))
        h = times[i + 1] - times[i]
        w = np.clip((t - times[i]) / h, 0.0, 1.0)
        return (1 - w) * vals[i] + w * vals[i + 1]

    def div_sample(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return np.zeros((self.grid.M, self.grid.M))
        return divergence_values(self.grid, self.sample(t).astype(complex)).real


# ---------------------------------------------------------------------------
# Pointwise covariant calculus.
# ---------------------------------------------------------------------------


def covariant_derivative_values(grid: TorusGrid, a: np.ndarray, phi: np.ndarray, j: int) -> np.ndarray:
    return partial_values(grid, phi, j) + 1j * multiply_values(grid, a[j - 1].astype(complex), phi)


def covariant_derivative(a: ConnectionField, f: ScalarField, j: int) -> ScalarField:
    if a.grid is not f.grid and a.grid != f.grid:
        raise ValueError("connection and scalar live on different grids")
    return ScalarField(f.grid, covariant_derivative_values(f.grid, a.values, f.values, j))


def curvature_values(grid: TorusGrid, a: np.ndarray) -> np.ndarray:
    f = partial_values(grid, a[1].astype(complex), 1) - partial_values(grid, a[0].astype(complex), 2)
    return f.real


def curvature(a: ConnectionField) -> ScalarField:
    return ScalarField(a.grid, curvature_values(a.grid, a.values).astype(complex))


def covariant_laplacian_values(grid: TorusGrid, a: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """D^j D_j phi with the flat Laplacian included (dealiased products)."""
    return laplacian_values(grid, phi) + gauge_terms_values(grid, a, phi)


def gauge_terms_values(
    grid: TorusGrid,
    a: np.ndarray,
    phi: np.ndarray,
    div_a: np.ndarray | None = None,
    a_sq: np.ndarray | None = None,
) -> np.ndarray:
    """The non-diagonal part of D^j D_j: 2i B.grad phi + i (div B) phi - |B|^2 phi."""
    ac = a.astype(complex)
    out = 2j * multiply_values(grid, ac[0], partial_values(grid, phi, 1))
    out += 2j * multiply_values(grid, ac[1], partial_values(grid, phi, 2))
    if div_a is None:
        div_a = divergence_values(grid, ac)
    out += 1j * multiply_values(grid, div_a.astype(complex), phi)
    if a_sq is None:
        a_sq = multiply_values(grid, ac[0], ac[0]) + multiply_values(grid, ac[1], ac[1])
    out -= multiply_values(grid, a_sq, phi)
    return out


def _gauge_precompute(grid: TorusGrid, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ac = a.astype(complex)
    div_a = divergence_values(grid, ac)
    a_sq = multiply_values(grid, ac[0], ac[0]) + multiply_values(grid, ac[1], ac[1])
    return div_a, a_sq


def energy(a: ConnectionField, f: ScalarField, q: int) -> float:
    """Gauge-invariant energy: int |F|^2/2 + |D phi|^2/2 + |phi|^(q+1)/(q+1)."""
    if q % 2 == 0 or q < 1:
        raise ValueError(f"energy needs odd q >= 1, got {q}")
    grid = f.grid
    fcurv = curvature_values(grid, a.values)
    d1 = covariant_derivative_values(grid, a.values, f.values, 1)
    d2 = covariant_derivative_values(grid, a.values, f.values, 2)
    dens = 0.5 * fcurv**2 + 0.5 * (np.abs(d1) ** 2 + np.abs(d2) ** 2) + np.abs(f.values) ** (q + 1) / (q + 1)
    return float(integral(grid, dens))


# ---------------------------------------------------------------------------
# Covariant heat evolution.
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """States of an evolution, stored every `stride` steps (endpoints always)."""

    times: np.ndarray
    states: np.ndarray
    stride: int = 1

    def at_time(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"time {t} not stored (nearest {self.times[i]})")
        return self.states[i]


def _check_finite(phi: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(phi)):
        bad = int(np.sum(~np.isfinite(phi)))
        raise FloatingPointError(f"covariant heat state lost finiteness at t={t:.6g} ({bad} entries)")


def covariant_heat_solve(
    B: Connection,
    phi0: np.ndarray,
    dt: float,
    T: float,
    massive: bool = False,
    forcing=None,
    method: str = "euler",
    t0: float = 0.0,
    store_every: int = 1,
) -> Trajectory:
    """Evolve (d_t - D_B^j D_{B,j} (+1)) phi = forcing from phi0 over [t0, t0+T].

    Exponential integrator: the flat (massive) Laplacian is exact per mode,
    gauge terms and forcing are explicit ("euler") or trapezoidal ("heun").
    `forcing` is None or a callable t -> (M, M) array.
    """
    grid = B.grid
    if dt <= 0 or T <= 0:
        raise ValueError("need positive dt and T")
    K = int(round(T / dt))
    if abs(K * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} is not a multiple of dt={dt}")
    lam = grid.mode_norm_sq + (1.0 if massive else 0.0)
    efac = np.exp(-dt * lam)
    if B.is_static:
        static_field = B.sample(t0)
        static_div, static_asq = _gauge_precompute(grid, static_field)
    else:
        static_field = static_div = static_asq = None

    def rhs(phi: np.ndarray, t: float) -> np.ndarray:
        if static_field is not None:
            out = gauge_terms_values(grid, static_field, phi, div_a=static_div, a_sq=static_asq)
        else:
            out = gauge_terms_values(grid, B.sample(t), phi)
        if forcing is not None:
            out = out + forcing(t)
        return out

    phi = np.array(phi0, dtype=complex)
    _check_finite(phi, t0)
    stored = [phi.copy()]
    times = [t0]
    for k in range(K):
        t = t0 + k * dt
        n0 = rhs(phi, t)
        if method == "euler":
            phi = inverse_values(grid, efac * forward_values(grid, phi + dt * n0))
        elif method == "heun":
            half = inverse_values(grid, efac * forward_values(grid, phi + dt * n0))
            drift = inverse_values(grid, efac * forward_values(grid, phi + 0.5 * dt * n0))
            phi = drift + 0.5 * dt * rhs(half, t + dt)
        else:
            raise ValueError(f"unknown method {method!r}")
        _check_finite(phi, t + dt)
        if (k + 1) % store_every == 0 or k == K - 1:
            stored.append(phi.copy())
            times.append(t0 + (k + 1) * dt)
    return Trajectory(np.array(times), np.array(stored), store_every)


# ---------------------------------------------------------------------------
# Kernel backends.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelQuery:
    """Source (s, y) and target (t, x); spatial points given as grid indices."""

    s: float
    y: tuple[int, int]
    t: float
    x: tuple[int, int]

    def validate(self) -> None:
        if not self.s < self.t:
            raise ValueError(f"kernel query needs s < t, got s={self.s}, t={self.t}")


MOLLIFIER_DIVISOR = 4  # deltas are band-limited to <= M/4


def mollified_delta_values(grid: TorusGrid, iy: tuple[int, int]) -> np.ndarray:
    """Smooth band-(M/4) approximation of the delta at grid point iy."""
    y = TWO_PI * np.array(iy, dtype=float) / grid.M
    sym = cutoff_symbol(grid.mode_norm, grid.M / MOLLIFIER_DIVISOR, "le")
    coeffs = sym * np.exp(-1j * (grid.modes[0] * y[0] + grid.modes[1] * y[1])) / TWO_PI**2
    return inverse_values(grid, coeffs)


def kernel_pde_trajectory(
    B: Connection,
    s: float,
    iy: tuple[int, int],
    t_final: float,
    dt: float,
    method: str = "heun",
    massive: bool = False,
    store_every: int = 1,
) -> Trajectory:
    """Evolve the mollified delta at iy from time s to t_final."""
    if not s < t_final:
        raise ValueError(f"kernel evolution needs s < t, got s={s}, t={t_final}")
    delta = mollified_delta_values(B.grid, iy)
    return covariant_heat_solve(
        B, delta, dt, t_final - s, massive=massive, method=method, t0=s, store_every=store_every
    )


def kernel_pde(B: Connection, query: KernelQuery, dt: float = 1e-3, method: str = "heun") -> complex:
    """Covariant heat kernel p_B(w; z) via PDE evolution of a mollified delta."""
    query.validate()
    traj = kernel_pde_trajectory(B, query.s, query.y, query.t, dt, method=method, store_every=10**9)
    return complex(traj.states[-1][query.x[0], query.x[1]])


def _winding_offsets(tau: float, reach: float) -> np.ndarray:
    R = int(np.ceil((np.sqrt(4.0 * tau * 40.0) + reach) / TWO_PI)) + 1
    n1, n2 = np.meshgrid(np.arange(-R, R + 1), np.arange(-R, R + 1), indexing="ij")
    return TWO_PI * np.stack([n1.ravel(), n2.ravel()], axis=1).astype(float)


def _euclidean_heat(tau: float, disp: np.ndarray) -> np.ndarray:
    """Rate-2 planar heat kernel (4 pi tau)^(-1) exp(-|x|^2 / (4 tau))."""
    r2 = np.sum(disp**2, axis=-1)
    return np.exp(-r2 / (4.0 * tau)) / (4.0 * np.pi * tau)


def kernel_constant(grid: TorusGrid, b, query: KernelQuery) -> complex:
    """Closed-form kernel for constant b: winding sum of phased Gaussians."""
    query.validate()
    b = np.asarray(b, dtype=float)
    tau = query.t - query.s
    base = TWO_PI * (np.array(query.y, dtype=float) - np.array(query.x, dtype=float)) / grid.M
    offs = _winding_offsets(tau, float(np.linalg.norm(base)))
    disp = base[None, :] + offs
    gauss = _euclidean_heat(tau, disp)
    keep = gauss >= 1e-16 * np.max(gauss)
    phase = np.exp(1j * disp[keep] @ b)
    return complex(np.sum(gauss[keep] * phase))


def _fine_sampler(grid: TorusGrid, values: np.ndarray, upsample: int = 8):
    """Bicubic periodic interpolator for a real grid field (trig-upsampled)."""
    M = grid.M
    Mf = upsample * M
    coeffs = forward_values(grid, values.astype(complex))
    fine = np.fft.ifft2(_embed(grid, coeffs, Mf)).real * Mf**2
    filt = ndimage.spline_filter(fine, order=3, mode="grid-wrap")
    scale = Mf / TWO_PI

    def sample(points: np.ndarray) -> np.ndarray:
        idx = (points % TWO_PI) * scale
        return ndimage.map_coordinates(filt, [idx[:, 0], idx[:, 1]], order=3, mode="grid-wrap", prefilter=False)

    return sample


def kernel_fki(
    B: Connection,
    query: KernelQuery,
    paths: int = 100_000,
    substeps: int = 256,
    seed: int = 0,
    chunk: int = 20_000,
) -> tuple[complex, float]:
    """Feynman-Kac-Ito backend: p(w;z) * E[exp(-i int B.dW - i int div B du)].

    Rate-2 torus Brownian bridges from y to x over [s, t], realized by sampling
    the winding class (weights prop. to the planar Gaussian) and then a planar
    bridge; the Ito integral uses left-point evaluation on `substeps` steps.
    Static connections only.  Returns (estimate, standard error).
    """
    query.validate()
    if paths < 1:
        raise ValueError("need at least one path")
    if not B.is_static:
        raise ValueError("kernel_fki supports static connections only")
    grid = B.grid
    tau = query.t - query.s
    y = TWO_PI * np.array(query.y, dtype=float) / grid.M
    x = TWO_PI * np.array(query.x, dtype=float) / grid.M

    offs = _winding_offsets(tau, float(np.linalg.norm(x - y)))
    disp = (x - y)[None, :] + offs
    gauss = _euclidean_heat(tau, disp)
    flat_total = float(np.sum(gauss))
    probs = gauss / np.sum(gauss)

    field = B.sample(query.s)
    div = B.div_sample(query.s)
    sample_b1 = _fine_sampler(grid, field[0])
    sample_b2 = _fine_sampler(grid, field[1])
    constant_div = np.max(np.abs(div)) < 1e-14
    sample_div = None if constant_div else _fine_sampler(grid, div)

    rng = np.random.default_rng(seed)
    delta = tau / substeps
    phases = np.empty(paths, dtype=complex)
    done = 0
    while done < paths:
        m = min(chunk, paths - done)
        targets = y[None, :] + disp[rng.choice(disp.shape[0], size=m, p=probs)]
        w = np.broadcast_to(y, (m, 2)).copy()
        ito = np.zeros(m)
        for j in range(substeps):
            rem = tau - j * delta
            frac = delta / rem
            noise = np.sqrt(max(2.0 * delta * (1.0 - frac), 0.0)) * rng.standard_normal((m, 2))
            w_next = w + (targets - w) * frac + noise
            step = w_next - w
            ito += sample_b1(w) * step[:, 0] + sample_b2(w) * step[:, 1]
            if sample_div is not None:
                ito += sample_div(w) * delta
            w = w_next
        phases[done : done + m] = np.exp(-1j * ito)
        done += m
    mean_phase = np.mean(phases)
    var = np.var(phases.real) + np.var(phases.imag)
    stderr = flat_total * np.sqrt(var / paths)
    return complex(flat_total * mean_phase), float(stderr)


# ---------------------------------------------------------------------------
# Covariant linear stochastic object.
# ---------------------------------------------------------------------------


def cshe_object(
    B: Connection,
    N: float | None,
    path: NoisePath | None,
    T: float,
    low_cutoff: float | None = None,
    method: str = "euler",
    store_every: int = 1,
    t0: float = 0.0,
    conjugate_shift: tuple[int, int] | None = None,
) -> Trajectory:
    """Evolve (d_t - D_B^j D_{B,j} + 1) phi = zeta_{<=N} (optionally P_{<=L})
    from zero data, with the stochastic convolution of the diagonal (flat,
    massive) part sampled exactly per mode per step.

    `conjugate_shift = n0` drives the evolution with exp(i n0.x) * zeta_{<=N}
    instead (shifted symbol AND shifted Brownian reads), the forcing that makes
    the flat object the exact conjugation of the constant-n0 object.
    """
    if path is None:
        grid = B.grid
        times = np.array([t0, t0 + T])
        return Trajectory(times, np.zeros((2, grid.M, grid.M), dtype=complex), 1)
    grid = path.grid
    if grid.M != B.grid.M:
        raise ValueError("noise path and connection on different grids")
    dt = path.dt
    K = int(round(T / dt))
    if abs(K * dt - T) > 1e-9 * max(1.0, T) or K > path.K:
        raise ValueError(f"path (dt={dt}, K={path.K}) does not cover [0, T={T}]")
    lam = grid.mode_norm_sq + 1.0
    efac = np.exp(-dt * lam)
    # exact per-mode variance of int_0^dt e^{-(dt-s) lam} dW: (1-e^{-2 dt lam})/(2 lam)
    exact_w = np.sqrt((1.0 - np.exp(-2.0 * dt * lam)) / (2.0 * lam * dt))
    if conjugate_shift is None:
        radial = grid.mode_norm
    else:
        from .noise import _shifted_band_mask

        n0 = (int(conjugate_shift[0]), int(conjugate_shift[1]))
        radial = np.hypot(grid.modes[0] - n0[0], grid.modes[1] - n0[1])
    sym = np.ones((grid.M, grid.M)) if N is None else cutoff_symbol(radial, N, "le")
    if low_cutoff is not None:
        sym = sym * cutoff_symbol(radial, low_cutoff, "le")
    if conjugate_shift is not None:
        sym = sym * _shifted_band_mask(grid, n0)
    weight = exact_w * sym / TWO_PI

    def _increment(k: int) -> np.ndarray:
        w = path.zeta_increment(k)
        if conjugate_shift is not None:
            w = np.roll(w, shift=n0, axis=(0, 1))
        return w

    if B.is_static:
        static_field = B.sample(t0)
        static_div, static_asq = _gauge_precompute(grid, static_field)
    else:
        static_field = static_div = static_asq = None
    phi = np.zeros((grid.M, grid.M), dtype=complex)
    stored = [phi.copy()]
    times = [t0]
    for k in range(K):
        t = t0 + k * dt
        if static_field is not None:
            drift = gauge_terms_values(grid, static_field, phi, div_a=static_div, a_sq=static_asq)
        else:
            drift = gauge_terms_values(grid, B.sample(t), phi)
        phi = inverse_values(grid, efac * forward_values(grid, phi + dt * drift) + weight * _increment(k))
        _check_finite(phi, t + dt)
        if (k + 1) % store_every == 0 or k == K - 1:
            stored.append(phi.copy())
            times.append(t0 + (k + 1) * dt)
    return Trajectory(np.array(times), np.array(stored), store_every)


# ---------------------------------------------------------------------------
# Connection norm.
# ---------------------------------------------------------------------------


def cshe_norm(B: Connection, times) -> float:
    """Discrete five-term norm of a connection over the given time samples:

    sup_t |B|_inf + L^2_t |grad B|_inf + sup_t |div B|_inf
    + L^1_t |d_t B|_inf (finite differences) + L^1_t |d_j F^{kj}|_inf.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValueError("cshe_norm needs at least 2 time samples")
    grid = B.grid
    sup_b = 0.0
    sup_div = 0.0
    l2_grad = 0.0
    l1_curl = 0.0
    samples = []
    for t in times:
        a = B.sample(t)
        samples.append(a)
        sup_b = max(sup_b, float(np.max(np.hypot(a[0], a[1]))))
        sup_div = max(sup_div, float(np.max(np.abs(B.div_sample(t)))))
        ac = a.astype(complex)
        g = np.array([[partial_values(grid, ac[j], k).real for k in (1, 2)] for j in (0, 1)])
        l2_grad_t = float(np.max(np.sqrt(np.sum(g**2, axis=(0, 1)))))
        f = curvature_values(grid, a)
        fc = f.astype(complex)
        curl = np.stack([partial_values(grid, fc, 2).real, -partial_values(grid, fc, 1).real])
        curl_t = float(np.max(np.hypot(curl[0], curl[1])))
        dt_w = _quad_weight(times, t)
        l2_grad += dt_w * l2_grad_t**2
        l1_curl += dt_w * curl_t
    l1_dt = 0.0
    for i in range(times.size - 1):
        diff = (samples[i + 1] - samples[i]) / (times[i + 1] - times[i])
        l1_dt += (times[i + 1] - times[i]) * float(np.max(np.hypot(diff[0], diff[1])))
    return sup_b + np.sqrt(l2_grad) + sup_div + l1_dt + l1_curl


def _quad_weight(times: np.ndarray, t: float) -> float:
    i = int(np.argmin(np.abs(times - t)))
    if i == 0:
        return 0.5 * (times[1] - times[0])
    if i == times.size - 1:
        return 0.5 * (times[-1] - times[-2])
    return 0.5 * (times[i + 1] - times[i - 1])


# ---------------------------------------------------------------------------
# Monotonicity-formula residual.
# ---------------------------------------------------------------------------


def monotonicity_residual(
    grid: TorusGrid,
    a_values: np.ndarray,
    times: np.ndarray,
    phi_states: np.ndarray,
    g_states: np.ndarray,
    k_states: np.ndarray,
    p: float,
) -> float:
    """Max over interior times of the L^1_x residual of the weighted identity

    d_t (K |phi|^p / p) = -Lap K |phi|^p/p + K Lap(|phi|^p/p)
        - K [ (p-2)/4 |phi|^(p-4) |grad |phi|^2|^2 + |phi|^(p-2) |D_A phi|^2
              - |phi|^(p-2) Re(conj phi G) ]

    for (d_t - D^j D_j) phi = G and (d_t + Lap) K = 0; d_t by centered
    differences on the sampled trajectory.
    """
    if p < 2:
        raise ValueError(f"monotonicity residual needs p >= 2, got {p}")
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise ValueError("need at least 3 time samples for centered differences")
    from .grid import laplacian_values

    dt = times[1] - times[0]
    worst = 0.0
    for i in range(1, times.size - 1):
        phi, g, kk = phi_states[i], g_states[i], k_states[i].real
        dens_prev = k_states[i - 1].real * np.abs(phi_states[i - 1]) ** p / p
        dens_next = k_states[i + 1].real * np.abs(phi_states[i + 1]) ** p / p
        lhs = (dens_next - dens_prev) / (2.0 * dt)

        u = np.abs(phi) ** 2
        lap_k_field = laplacian_values(grid, k_states[i].astype(complex)).real
        lap_pow = laplacian_values(grid, (u ** (p / 2) / p).astype(complex)).real
        gu = np.stack([partial_values(grid, u.astype(complex), j).real for j in (1, 2)])
        grad_sq = gu[0] ** 2 + gu[1] ** 2
        if p == 2:
            sing = np.zeros_like(u)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                sing = np.where(u > 1e-300, (p - 2) / 4.0 * u ** ((p - 4) / 2.0) * grad_sq, 0.0)
        d1 = covariant_derivative_values(grid, a_values, phi, 1)
        d2 = covariant_derivative_values(grid, a_values, phi, 2)
        dcov_sq = np.abs(d1) ** 2 + np.abs(d2) ** 2
        upow = u ** ((p - 2) / 2.0)
        bracket = sing + upow * dcov_sq - upow * np.real(np.conj(phi) * g)
        rhs = -lap_k_field * (u ** (p / 2) / p) + kk * lap_pow - kk * bracket
        worst = max(worst, float(np.mean(np.abs(lhs - rhs)) * TWO_PI**2))
    return worst
