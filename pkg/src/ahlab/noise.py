"""Space-time white noise paths in Fourier space.

Two driving noises live on the mode lattice of a TorusGrid:

* ``xi``   - an R^2-valued noise: per-mode complex increments DW_xi(k, n) in C^2
             with the reality constraint DW_xi(k, -n) = conj DW_xi(k, n),
             enforced by sampling a half-lattice and mirroring; the n = 0 mode
             is drawn real with variance dt.
* ``zeta`` - a C-valued noise: iid complex increments on every resolved mode,
             no conjugate constraint.

Each complex increment has E|DW|^2 = dt (real and imaginary parts independent
N(0, dt/2)).  Nyquist modes (any coordinate -M/2) are zero.

Increments are a deterministic function of (seed, refinement level, step k,
mode n): every (level, k) block is generated from its own Philox counter
stream, so paths are reproducible without storing anything.  Refinement uses a
dyadic bridge: ``NoisePath.refine()`` yields the half-step path whose adjacent
increments sum back to the parent increments (exact up to one final IEEE
rounding, <= a few ulps; see the bridge construction below).

Field assembly follows the convention  increment(x) = (1/2pi) sum_n s(n)
DW(k, n) exp(i n.x)  where s is the mollifier symbol rho(|n|/N) (or 1 for the
unmollified field).  The gauge-shifted assembly uses the shifted symbol
rho(|n - n0|/N) evaluated with the same Brownian increments; shifted symbols
and shifted coefficient reads mask modes that leave the resolved band, and the
two constructions agree mode-by-mode under multiplication by exp(i n0.x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TWO_PI, TorusGrid, inverse_values
from .spectral import cutoff_symbol, leray_project_coeffs

_SQRT_HALF = np.sqrt(0.5)

# stream tags
_STREAM_XI = 0
_STREAM_ZETA = 1


def _splitmix64(state: np.uint64) -> tuple[np.uint64, np.uint64]:
    state = np.uint64(state) + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


def _mix_key(seed: int, stream: int, level: int, index: int) -> np.ndarray:
    """Two 64-bit Philox key words mixed from (seed, stream, level, index)."""
    with np.errstate(over="ignore"):
        state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        out = []
        for v in (stream, level, index, 0xA5A5A5A5):
            state, z = _splitmix64(state ^ np.uint64(v & 0xFFFFFFFFFFFFFFFF))
            out.append(z)
        return np.array([out[1] ^ out[0], out[3] ^ out[2]], dtype=np.uint64)


def _std_complex(seed: int, stream: int, level: int, index: int, shape: tuple[int, ...]) -> np.ndarray:
    """Standard complex Gaussians (E|G|^2 = 1) from a keyed Philox stream."""
    gen = np.random.Generator(np.random.Philox(key=_mix_key(seed, stream, level, index)))
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    return _SQRT_HALF * (re + 1j * im)


def _conj_mirror(a: np.ndarray) -> np.ndarray:
    """B[n] = conj(A[-n]) with indices mod M on the trailing two axes."""
    return np.roll(np.conj(a[..., ::-1, ::-1]), shift=(1, 1), axis=(-2, -1))


@dataclass(frozen=True)
class NoisePath:
    """Lazy, reproducible noise path on a grid with step dt and K steps.

    ``level`` counts dyadic refinements below the anchor step ``base_dt``;
    public constructors start at level 0 with base_dt = dt.
    """

    grid: TorusGrid
    base_dt: float
    base_K: int
    seed: int
    level: int = 0

    @property
    def dt(self) -> float:
        return self.base_dt / 2**self.level

    @property
    def K(self) -> int:
        return self.base_K * 2**self.level

    def refine(self) -> "NoisePath":
        """The half-step path refining this one (dyadic bridge)."""
        return NoisePath(self.grid, self.base_dt, self.base_K, self.seed, self.level + 1)

    # -- raw (pre-mirror) increments -------------------------------------

    def _raw(self, stream: int, level: int, k: int, shape: tuple[int, ...]) -> np.ndarray:
        if level == 0:
            return np.sqrt(self.base_dt) * _std_complex(self.seed, stream, 0, k, shape)
        parent = self._raw(stream, level - 1, k >> 1, shape)
        # bridge Gaussian with E|b|^2 = dt_level / 2, shared by the sibling pair
        b = np.sqrt(self.base_dt / 2 ** (level + 1)) * _std_complex(self.seed, stream, level, k >> 1, shape)
        sign = 1.0 if (k & 1) == 0 else -1.0
        return 0.5 * parent + sign * b

    def _check_step(self, k: int) -> None:
        if not 0 <= k < self.K:
            raise IndexError(f"step {k} outside path range [0, {self.K})")

    def xi_increment(self, k: int) -> np.ndarray:
        """DW_xi(k, .) as a (2, M, M) complex array with conjugate symmetry."""
        self._check_step(k)
        M = self.grid.M
        raw = self._raw(_STREAM_XI, self.level, k, (2, M, M))
        n1, n2 = self.grid.modes
        half = (n1 > 0) | ((n1 == 0) & (n2 > 0))
        out = np.where(half, raw, _conj_mirror(raw))
        out[..., 0, 0] = np.sqrt(2.0) * raw[..., 0, 0].real
        out[..., self.grid.nyquist_mask] = 0.0
        return out

    def zeta_increment(self, k: int) -> np.ndarray:
        """DW_zeta(k, .) as an (M, M) complex array (iid, no symmetry)."""
        self._check_step(k)
        M = self.grid.M
        out = self._raw(_STREAM_ZETA, self.level, k, (M, M))
        out[self.grid.nyquist_mask] = 0.0
        return out


def sample_path(grid: TorusGrid, dt: float, K: int, seed: int) -> NoisePath:
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if K < 1:
        raise ValueError(f"step count must be >= 1, got {K}")
    return NoisePath(grid, float(dt), int(K), int(seed))


# ---------------------------------------------------------------------------
# Field assembly.
# ---------------------------------------------------------------------------


# Width of the unforced ring at the edge of the resolved band.  The grid
# truncates the mollifier's support anyway once 9N/8 reaches M/2; stopping the
# forcing a couple of modes earlier keeps every directly-driven mode
# representable after small integer shifts (|n0|_inf <= NOISE_GUARD), which the
# discrete gauge identities need.  Modes in the ring still evolve (heat flow
# and nonlinearity), they just receive no direct noise.
NOISE_GUARD = 2


def _guard_mask(grid: TorusGrid, n0: tuple[int, int] = (0, 0)) -> np.ndarray:
    """True where the (n0-shifted) mode index sits below the guarded edge."""
    d1 = grid.modes[0] - int(n0[0])
    d2 = grid.modes[1] - int(n0[1])
    lim = grid.M // 2 - 1 - NOISE_GUARD
    return (np.abs(d1) <= lim) & (np.abs(d2) <= lim)


def _mollifier_symbol(grid: TorusGrid, N: float | None) -> np.ndarray:
    if N is None:  # unmollified: every resolved mode, no guard
        return np.ones((grid.M, grid.M))
    return cutoff_symbol(grid.mode_norm, N, "le") * _guard_mask(grid)


def noise_increment_field(
    path: NoisePath,
    k: int,
    kind: str,
    N: float | None = None,
    leray: bool = False,
    return_coeffs: bool = False,
) -> np.ndarray:
    """Spatial increment field of the mollified noise over [t_k, t_{k+1}).

    kind "xi" returns a real (2, M, M) array (optionally Leray-projected);
    kind "zeta" returns a complex (M, M) array.  With return_coeffs=True the
    Fourier coefficients of the same field are returned instead (the xi
    coefficients are Hermitian by construction, so this carries no information
    beyond the real field).
    """
    grid = path.grid
    sym = _mollifier_symbol(grid, N)
    if kind == "xi":
        w = path.xi_increment(k)
        coeffs = np.stack([sym * w[j] / TWO_PI for j in range(2)])
        if leray:
            coeffs = leray_project_coeffs(grid, coeffs)
        if return_coeffs:
            return coeffs
        return np.stack([inverse_values(grid, coeffs[j]).real for j in range(2)])
    if kind == "zeta":
        if leray:
            raise ValueError("Leray projection applies to the xi noise only")
        coeffs = sym * path.zeta_increment(k) / TWO_PI
        if return_coeffs:
            return coeffs
        return inverse_values(grid, coeffs)
    raise ValueError(f"unknown noise kind {kind!r}")


def _shifted_band_mask(grid: TorusGrid, n0: tuple[int, int]) -> np.ndarray:
    """True where the integer-shifted mode m - n0 stays in the resolved band."""
    d1 = grid.modes[0] - int(n0[0])
    d2 = grid.modes[1] - int(n0[1])
    half = grid.M // 2
    return (np.abs(d1) <= half - 1) & (np.abs(d2) <= half - 1)


def gauge_shift_noise(
    path: NoisePath, k: int, n0: tuple[int, int], N: float, return_coeffs: bool = False
) -> np.ndarray:
    """Increment of the shifted-symbol noise: (1/2pi) sum rho(|n-n0|/N) e_n DW_zeta(k,n).

    Uses the same Brownian increments as the unshifted assembly.  Modes whose
    shifted index n - n0 leaves the resolved band carry no weight (the grid
    cannot represent them; the masking matches the shifted-coefficient
    construction mode-by-mode).  Rejects shifts with |n0_i| >= M/2, for which
    the shifted symbol's plateau is entirely unrepresentable.
    """
    grid = path.grid
    if max(abs(int(n0[0])), abs(int(n0[1]))) >= grid.M // 2:
        raise ValueError(f"gauge shift {tuple(n0)} out of range for grid M={grid.M}")
    d1 = grid.modes[0] - int(n0[0])
    d2 = grid.modes[1] - int(n0[1])
    sym = cutoff_symbol(np.hypot(d1, d2), N, "le") * _guard_mask(grid, n0)
    sym = sym * _shifted_band_mask(grid, n0)
    coeffs = sym * path.zeta_increment(k) / TWO_PI
    if return_coeffs:
        return coeffs
    return inverse_values(grid, coeffs)


def shifted_coefficient_noise(
    path: NoisePath, k: int, n0: tuple[int, int], N: float, return_coeffs: bool = False
) -> np.ndarray:
    """Increment of the mollified conjugated noise: (1/2pi) sum rho(|n|/N) e_n DW_zeta(k, n+n0).

    This is the zeta forcing of the shifted-data run: coefficient n reads the
    Brownian increment at mode n + n0 (no wraparound; out-of-band reads are
    zero).  Multiplying the result by exp(i n0.x) reproduces gauge_shift_noise
    exactly on the grid.
    """
    grid = path.grid
    if max(abs(int(n0[0])), abs(int(n0[1]))) >= grid.M // 2:
        raise ValueError(f"gauge shift {tuple(n0)} out of range for grid M={grid.M}")
    w = path.zeta_increment(k)
    rolled = np.roll(w, shift=(-int(n0[0]), -int(n0[1])), axis=(0, 1))
    valid = _shifted_band_mask(grid, (-int(n0[0]), -int(n0[1])))
    sym = cutoff_symbol(grid.mode_norm, N, "le") * _guard_mask(grid)
    coeffs = sym * valid * rolled / TWO_PI
    if return_coeffs:
        return coeffs
    return inverse_values(grid, coeffs)
