"""Post-processing diagnostics for solved trajectories.

Three tools live here:

* ``ParameterLedger`` — the hierarchy of small exponents and constants that
  calibrates the diagnostics.  The raw numbers underflow double precision
  already at ``nu = 0.1``, so every derived scale is stored and compared on a
  log10 axis; linear values are exposed only where they are representable
  (the integrability exponent used for grid norms is capped, and powers of a
  frequency cutoff by a tiny exponent evaluate literally to 1.0).
* ``ansatz_split`` — decomposes a trajectory window into linear stochastic
  objects, heat flows of the split initial connection, a covariant linear
  scalar object, and nonlinear remainders defined by subtraction.
* ``decay_report`` — gauge-invariant decay columns per checkpoint, with
  window growth flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .covheat import Connection, cshe_object
from .grid import (
    ConnectionField,
    TorusGrid,
    divergence_values,
    forward_values,
    inverse_values,
)
from .noise import noise_increment_field
from .sah import SahTrajectory
from .spectral import cutoff_symbol, gauge_invariant_norm, heat_multiplier, lp_norm

__all__ = [
    "ParameterLedger",
    "AnsatzComponents",
    "ansatz_split",
    "admissible_tau",
    "DecayRow",
    "DecayReport",
    "decay_report",
]


# ---------------------------------------------------------------------------
# Parameter ledger.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParameterLedger:
    """Hierarchy of exponents driving the decay diagnostics.

    From the base ``nu`` the ledger derives a chain of regularity exponents
    (``eta`` and its iterated powers), a chain of small exponents (``kappa``
    and its ladder), and an integrability exponent ``r``.  All derived
    quantities are kept as base-10 logarithms: for ``nu <= 0.1`` the linear
    values underflow doubles by hundreds of orders of magnitude.

    ``r`` itself is astronomically large, and on a finite grid every L^p norm
    with huge p saturates to the sup norm, so grid norms use ``min(r, r_cap)``
    (the cap is reported via ``r_cap_applied``).

    The constants ``c0 > c1 > ...`` shrink geometrically (each "sufficiently
    small depending on its predecessor"); their inverses are exposed as
    ``C(j)``.  The fixed structural exponents are ``alpha`` (connection norm
    power), ``beta`` (scalar norm power) and ``gamma`` (decay report power).
    """

    nu: float = 0.1
    r_cap: float = 8.0
    c0: float = 0.5
    c_ratio: float = 0.25
    alpha: float = field(default=0.75, init=False)
    beta: float = field(default=2.5, init=False)
    gamma: float = field(default=2.0 / 7.0, init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < 1.0:
            raise ValueError(f"nu must lie in (0, 1), got {self.nu}")
        if self.r_cap < 1.0:
            raise ValueError(f"r_cap must be >= 1, got {self.r_cap}")
        if not 0.0 < self.c0 < 1.0:
            raise ValueError(f"c0 must lie in (0, 1), got {self.c0}")
        if not 0.0 < self.c_ratio < 1.0:
            raise ValueError(f"c_ratio must lie in (0, 1), got {self.c_ratio}")
        if self.nu <= 0.1 and not self.is_ordered:
            raise ValueError("exponent chain failed to order; ledger inconsistent")

    # -- log10 exponents ----------------------------------------------------

    @property
    def log10_nu(self) -> float:
        return math.log10(self.nu)

    @property
    def log10_eta(self) -> float:
        return 100.0 * self.log10_nu

    def log10_eta_j(self, j: int) -> float:
        """Iterated powers: each level is the previous one to the 10th."""
        if j not in (1, 2, 3):
            raise ValueError(f"eta ladder index must be 1, 2 or 3, got {j}")
        return (10.0**j) * self.log10_eta

    @property
    def log10_kappa1(self) -> float:
        # kappa_1 = 100 * eta * eta_3
        return 2.0 + self.log10_eta + self.log10_eta_j(3)

    def log10_kappa_j(self, j: int) -> float:
        """Ladder kappa_{j+1} = nu^{-10} kappa_j starting from kappa_1."""
        if j not in (1, 2, 3, 4):
            raise ValueError(f"kappa ladder index must be 1..4, got {j}")
        return self.log10_kappa1 - 10.0 * (j - 1) * self.log10_nu

    @property
    def log10_kappa(self) -> float:
        # kappa = nu^10 * kappa_1
        return 10.0 * self.log10_nu + self.log10_kappa1

    @property
    def log10_r(self) -> float:
        # r = kappa^{-10}
        return -10.0 * self.log10_kappa

    # -- linear values where representable -----------------------------------

    def kappa_j(self, j: int) -> float:
        """Literal linear value of the j-th ladder exponent (may underflow
        to 0.0, which is the correct literal evaluation device here)."""
        return 10.0 ** self.log10_kappa_j(j)

    @property
    def kappa(self) -> float:
        return 10.0**self.log10_kappa

    @property
    def r(self) -> float:
        """Integrability exponent actually used for grid norms (capped)."""
        if self.log10_r > math.log10(self.r_cap):
            return float(self.r_cap)
        return float(10.0**self.log10_r)

    @property
    def r_cap_applied(self) -> bool:
        return self.log10_r > math.log10(self.r_cap)

    def cutoff_power(self, L: float, j: int) -> float:
        """Literal evaluation of L**kappa_j (essentially 1.0 at desk scale)."""
        if L < 1.0:
            raise ValueError(f"cutoff must be >= 1, got {L}")
        return math.exp(math.log(L) * self.kappa_j(j))

    # -- constants ------------------------------------------------------------

    def c(self, j: int) -> float:
        """Small constants, geometrically decreasing from c0."""
        if j < 0:
            raise ValueError(f"constant index must be >= 0, got {j}")
        return self.c0 * self.c_ratio**j

    def C(self, j: int) -> float:
        return 1.0 / self.c(j)

    @property
    def c3(self) -> float:
        return self.c(3)

    # -- ordering -------------------------------------------------------------

    def ordering_chain(self) -> list[tuple[str, float]]:
        """The exponent chain, smallest first, as (name, log10 value)."""
        return [
            ("1/r", -self.log10_r),
            ("kappa", self.log10_kappa),
            ("kappa1", self.log10_kappa_j(1)),
            ("kappa2", self.log10_kappa_j(2)),
            ("kappa3", self.log10_kappa_j(3)),
            ("kappa4", self.log10_kappa_j(4)),
            ("eta3", self.log10_eta_j(3)),
            ("eta2", self.log10_eta_j(2)),
            ("eta1", self.log10_eta_j(1)),
            ("eta", self.log10_eta),
        ]

    @property
    def is_ordered(self) -> bool:
        vals = [v for _, v in self.ordering_chain()]
        return all(a < b for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# Admissible time-scales.
# ---------------------------------------------------------------------------


def admissible_tau(
    normA: float, normPhi: float, L: float, ledger: ParameterLedger
) -> tuple[float, float, float]:
    """Admissible time-scale bracket from the initial component norms.

    With m = max(normA**alpha, normPhi**beta, L**kappa3) the admissible
    bracket is [c3/(4 m), 4 c3/m]; the chosen scale is its geometric center
    c3/m.  Returns (tau_lo, tau_hi, tau_chosen).
    """
    if normA < 0 or normPhi < 0:
        raise ValueError("component norms must be nonnegative")
    m = max(
        normA**ledger.alpha,
        normPhi**ledger.beta,
        ledger.cutoff_power(L, 3),
    )
    c3 = ledger.c3
    return 0.25 * c3 / m, 4.0 * c3 / m, c3 / m


# ---------------------------------------------------------------------------
# Ansatz decomposition.
# ---------------------------------------------------------------------------


@dataclass
class AnsatzComponents:
    """Decomposition of a trajectory window, stacked over checkpoints.

    Connection:  a = a_linear + a_low_flow + a_high_flow + a_remainder.
    Scalar:      phi = phi_covariant_low + phi_high + phi_remainder;
    phi_linear is the flat massive linear object driven by the full scalar
    noise (reported for decay columns, not part of the re-sum).

    a_linear solves the flat massive equation driven by the transverse
    vector noise with zero data at t0; a_low_flow / a_high_flow are heat
    flows of the low/high frequency parts of the initial connection (split
    at ``cutoff``); the remainders are defined by subtraction, so the
    re-sum is exact by construction.
    """

    times: np.ndarray
    cutoff: float
    t0: float
    a: np.ndarray
    phi: np.ndarray
    a_linear: np.ndarray
    a_low_flow: np.ndarray
    a_high_flow: np.ndarray
    a_remainder: np.ndarray
    phi_covariant_low: np.ndarray
    phi_linear: np.ndarray
    phi_high: np.ndarray
    phi_remainder: np.ndarray

    @property
    def resum_error(self) -> float:
        """Max abs defect of both component re-sums over the window."""
        ea = np.abs(
            self.a - (self.a_linear + self.a_low_flow + self.a_high_flow + self.a_remainder)
        ).max()
        ep = np.abs(self.phi - (self.phi_covariant_low + self.phi_high + self.phi_remainder)).max()
        return float(max(ea, ep))


class _OffsetPath:
    """Read-only view of a noise path with its step index shifted."""

    def __init__(self, path, k0: int):
        self._path = path
        self._k0 = int(k0)
        self.grid = path.grid

    @property
    def dt(self) -> float:
        return self._path.dt

    @property
    def K(self) -> int:
        return self._path.K - self._k0

    def xi_increment(self, k: int) -> np.ndarray:
        return self._path.xi_increment(k + self._k0)

    def zeta_increment(self, k: int) -> np.ndarray:
        return self._path.zeta_increment(k + self._k0)


def _flat_linear_coeffs(
    path,
    kind: str,
    n_moll: float | None,
    steps: Sequence[int],
    k_offset: int,
    leray: bool = False,
    extra_symbol: np.ndarray | None = None,
) -> dict[int, np.ndarray]:
    """March the flat massive linear object and collect coefficients.

    The object solves (d_t + |n|^2 + 1) c = noise with zero data, advanced
    per mode with the exact-variance convention of the covariant solver.
    ``steps`` are step indices relative to the start; the path is read at
    absolute index k + k_offset.  ``extra_symbol`` multiplies each increment
    (used to restrict to a frequency range).
    """
    grid = path.grid
    dt = path.dt
    lam = grid.mode_norm_sq + 1.0
    efac = np.exp(-dt * lam)
    wfac = np.sqrt((1.0 - np.exp(-2.0 * dt * lam)) / (2.0 * lam * dt))
    wanted = sorted(set(int(s) for s in steps))
    if wanted and wanted[0] < 0:
        raise ValueError("requested step precedes the start of the object")
    shape = (2, grid.M, grid.M) if kind == "xi" else (grid.M, grid.M)
    c = np.zeros(shape, dtype=np.complex128)
    out: dict[int, np.ndarray] = {}
    if wanted and wanted[0] == 0:
        out[0] = c.copy()
    last = wanted[-1] if wanted else 0
    wanted_set = set(wanted)
    for k in range(last):
        inc = noise_increment_field(
            path, k + k_offset, kind, N=n_moll, leray=leray, return_coeffs=True
        )
        if extra_symbol is not None:
            inc = inc * extra_symbol
        c = efac * c + wfac * inc
        if (k + 1) in wanted_set:
            out[k + 1] = c.copy()
    return out


def ansatz_split(
    trajectory: SahTrajectory,
    path,
    cutoff: float,
    t0: float,
    window: tuple[float, float],
) -> AnsatzComponents:
    """Split a trajectory window into linear objects and remainders.

    * the flat linear connection object starts from zero data at ``t0`` and
      is driven by the transverse projection of the same vector noise the
      trajectory consumed;
    * the low/high heat flows propagate the frequency split (at ``cutoff``)
      of the connection at ``t0``;
    * the covariant low-frequency scalar object is driven by the scalar
      noise below ``cutoff`` through the connection given by the low heat
      flow; the flat linear and high-frequency scalar objects are driven by
      the full and above-``cutoff`` scalar noise;
    * both remainders are defined by subtraction.

    ``window = (lo, hi)`` selects the trajectory checkpoints to evaluate;
    it must lie inside the recorded time span and start no earlier than t0.
    """
    grid = trajectory.states[0].A.grid
    if path.grid.M != grid.M:
        raise ValueError("trajectory and noise path live on different grids")
    if cutoff > grid.M // 2:
        raise ValueError(f"cutoff {cutoff} above the resolved band {grid.M // 2}")
    dt = trajectory.config.dt
    lo, hi = float(window[0]), float(window[1])
    tmax = trajectory.times[-1]
    eps = 1e-9 * max(1.0, abs(tmax))
    if lo > hi or lo < t0 - eps or hi > tmax + eps:
        raise ValueError(
            f"window [{lo}, {hi}] outside trajectory span (t0={t0}, end={tmax})"
        )
    state0 = trajectory.at_time(t0)
    k0 = int(round(t0 / dt))
    if abs(k0 * dt - t0) > eps:
        raise ValueError(f"t0={t0} is not an integer number of steps of dt={dt}")

    sel = [
        (t, st)
        for t, st in zip(trajectory.times, trajectory.states)
        if lo - eps <= t <= hi + eps
    ]
    if not sel:
        raise ValueError(f"window [{lo}, {hi}] contains no checkpoints")
    times = np.array([t for t, _ in sel])
    steps = [int(round((t - t0) / dt)) for t in times]
    a_vals = np.stack([st.A.values for _, st in sel])
    phi_vals = np.stack([st.phi.values for _, st in sel])

    # Frequency split of the initial connection.
    a0_coeffs = np.stack(
        [forward_values(grid, state0.A.values[j].astype(np.complex128)) for j in range(2)]
    )
    low_sym = cutoff_symbol(grid.mode_norm, cutoff, "le")
    a0_low_c = a0_coeffs * low_sym
    a0_high_c = a0_coeffs * (1.0 - low_sym)
    a0_low_vals = np.stack([inverse_values(grid, a0_low_c[j]).real for j in range(2)])

    def heat_of(coeffs: np.ndarray, t: float) -> np.ndarray:
        damp = heat_multiplier(grid, max(t - t0, 0.0))
        return np.stack([inverse_values(grid, damp * coeffs[j]).real for j in range(2)])

    low_flow = np.stack([heat_of(a0_low_c, t) for t in times])
    high_flow = np.stack([heat_of(a0_high_c, t) for t in times])

    # Flat linear objects, all driven by the trajectory's own increments.
    n_moll = trajectory.config.N
    lin_c = _flat_linear_coeffs(path, "xi", n_moll, steps, k0, leray=True)
    philin_c = _flat_linear_coeffs(path, "zeta", n_moll, steps, k0)
    phihigh_c = _flat_linear_coeffs(
        path, "zeta", n_moll, steps, k0, extra_symbol=(1.0 - low_sym)
    )
    a_linear = np.stack(
        [
            np.stack([inverse_values(grid, lin_c[s][j]).real for j in range(2)])
            for s in steps
        ]
    )
    phi_linear = np.stack([inverse_values(grid, philin_c[s]) for s in steps])
    phi_high = np.stack([inverse_values(grid, phihigh_c[s]) for s in steps])

    # Covariant low-frequency scalar object through the low heat flow.
    duration = float(times[-1] - t0)
    if duration > 0:
        pos = [s for s in steps if s > 0]
        stride = math.gcd(*pos) if pos else 1
        cov = cshe_object(
            Connection.heat_flow(grid, a0_low_vals, t0),
            n_moll,
            _OffsetPath(path, k0),
            duration,
            low_cutoff=cutoff,
            store_every=stride,
            t0=t0,
        )
        phi_cov = np.stack([cov.at_time(t) for t in times])
    else:
        phi_cov = np.zeros_like(phi_vals)

    a_remainder = a_vals - a_linear - low_flow - high_flow
    phi_remainder = phi_vals - phi_cov - phi_high
    return AnsatzComponents(
        times=times,
        cutoff=float(cutoff),
        t0=float(t0),
        a=a_vals,
        phi=phi_vals,
        a_linear=a_linear,
        a_low_flow=low_flow,
        a_high_flow=high_flow,
        a_remainder=a_remainder,
        phi_covariant_low=phi_cov,
        phi_linear=phi_linear,
        phi_high=phi_high,
        phi_remainder=phi_remainder,
    )


def low_flow_divergence_defect(components: AnsatzComponents, grid: TorusGrid) -> float:
    """Max relative divergence of the low heat flow over the window."""
    worst = 0.0
    for k in range(components.times.size):
        b = components.a_low_flow[k]
        scale = max(np.abs(b).max(), 1e-30)
        div = divergence_values(grid, b.astype(np.complex128)).real
        worst = max(worst, float(np.abs(div).max() / scale))
    return worst


# ---------------------------------------------------------------------------
# Decay report.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayRow:
    """One checkpoint of the decay report."""

    t: float
    gaugeinvA_gamma: float
    psi_Lr: float
    max_col: float
    window_id: int
    raw_gauge_A: float
    raw_gauge_phi: float


@dataclass
class DecayReport:
    """Decay columns per checkpoint plus window growth flags.

    ``gaugeinvA_gamma`` is the gauge-invariant norm of the connection minus
    its flat linear object, raised to the ledger's gamma; ``psi_Lr`` is the
    (capped) L^r norm of the scalar minus its flat linear object; ``max_col``
    is their max.  ``flagged_windows`` lists window ids whose max column
    grew from the first to the last contained checkpoint (or exceeded the
    threshold, when one was given).
    """

    rows: list[DecayRow]
    flagged_windows: list[int]
    r_used: float
    r_cap_applied: bool
    gamma: float
    proxy_alpha: float

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])


def decay_report(
    trajectory: SahTrajectory,
    ledger: ParameterLedger,
    windows: Sequence[tuple[float, float]],
    path=None,
    proxy_alpha: float = -0.125,
    threshold: float | None = None,
) -> DecayReport:
    """Gauge-invariant decay columns for every trajectory checkpoint.

    With a noise path the flat linear objects (connection and scalar,
    started from zero data at the trajectory start) are subtracted before
    taking norms; without one they are zero and the columns reduce to norms
    of the raw state.  ``windows`` is a list of (lo, hi) time intervals;
    each checkpoint is labeled with the id of the first window containing
    it (-1 when none).  A window is flagged when its max column grows from
    its first to its last checkpoint, or exceeds ``threshold``.
    """
    grid = trajectory.states[0].A.grid
    times = list(trajectory.times)
    dt = trajectory.config.dt
    r_used = min(ledger.r, ledger.r_cap)
    gamma = ledger.gamma

    if path is not None:
        t_start = times[0]
        k0 = int(round(t_start / dt))
        steps = [int(round((t - t_start) / dt)) for t in times]
        lin_c = _flat_linear_coeffs(path, "xi", trajectory.config.N, steps, k0, leray=True)
        philin_c = _flat_linear_coeffs(path, "zeta", trajectory.config.N, steps, k0)
        lin_vals = [
            np.stack([inverse_values(grid, lin_c[s][j]).real for j in range(2)])
            for s in steps
        ]
        philin_vals = [inverse_values(grid, philin_c[s]) for s in steps]
    else:
        lin_vals = [np.zeros((2, grid.M, grid.M)) for _ in times]
        philin_vals = [np.zeros((grid.M, grid.M), dtype=np.complex128) for _ in times]

    def window_of(t: float) -> int:
        for i, (wlo, whi) in enumerate(windows):
            if wlo - 1e-12 <= t <= whi + 1e-12:
                return i
        return -1

    rows: list[DecayRow] = []
    for i, (t, st) in enumerate(zip(times, trajectory.states)):
        a_diff = ConnectionField(grid, st.A.values - lin_vals[i])
        ga = gauge_invariant_norm(a_diff, "connection", proxy_alpha)
        psi_lr = lp_norm(grid, st.phi.values - philin_vals[i], r_used)
        col_a = ga**gamma
        rows.append(
            DecayRow(
                t=float(t),
                gaugeinvA_gamma=float(col_a),
                psi_Lr=float(psi_lr),
                max_col=float(max(col_a, psi_lr)),
                window_id=window_of(t),
                raw_gauge_A=float(gauge_invariant_norm(st.A, "connection", proxy_alpha)),
                raw_gauge_phi=float(gauge_invariant_norm(st.phi, "scalar", proxy_alpha)),
            )
        )

    flagged: list[int] = []
    for wid in range(len(windows)):
        inside = [row for row in rows if row.window_id == wid]
        if not inside:
            continue
        grew = inside[-1].max_col > inside[0].max_col
        exceeded = threshold is not None and any(row.max_col > threshold for row in inside)
        if grew or exceeded:
            flagged.append(wid)
    return DecayReport(
        rows=rows,
        flagged_windows=flagged,
        r_used=float(r_used),
        r_cap_applied=ledger.r_cap_applied,
        gamma=gamma,
        proxy_alpha=proxy_alpha,
    )
