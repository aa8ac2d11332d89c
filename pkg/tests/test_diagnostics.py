"""Ledger, time-scale rule, ansatz decomposition, and decay report tests."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ahlab.diagnostics import (
    AnsatzComponents,
    DecayReport,
    ParameterLedger,
    admissible_tau,
    ansatz_split,
    decay_report,
    low_flow_divergence_defect,
)
from ahlab.grid import ConnectionField, ScalarField, TorusGrid
from ahlab.noise import sample_path
from ahlab.sah import SahConfig, SahState, SahTrajectory, make_state, sah_solve, zero_path
from ahlab.spectral import gauge_invariant_norm

# ---------------------------------------------------------------------------
# Parameter ledger.
# ---------------------------------------------------------------------------


def test_ledger_spot_values():
    # Hand-evaluated exponents at nu = 0.1 (log10 nu = -1):
    #   eta ladder: -100, -1000, -1e4, -1e5
    #   kappa1 = log10(100) + (-100) + (-1e5) = -100098
    #   kappa  = -10 + kappa1 = -100108; ladder ascends by +10 per level
    #   r = kappa^{-10}  ->  log10 r = 1001080
    led = ParameterLedger(nu=0.1)
    assert led.log10_eta == -100.0
    assert led.log10_eta_j(1) == -1000.0
    assert led.log10_eta_j(2) == -10_000.0
    assert led.log10_eta_j(3) == -100_000.0
    assert led.log10_kappa1 == -100_098.0
    assert led.log10_kappa == -100_108.0
    assert led.log10_kappa_j(2) == -100_088.0
    assert led.log10_kappa_j(3) == -100_078.0
    assert led.log10_kappa_j(4) == -100_068.0
    assert led.log10_r == 1_001_080.0


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1e-6, max_value=0.1))
def test_ledger_chain_strictly_ordered(nu):
    led = ParameterLedger(nu=nu)
    chain = led.ordering_chain()
    names = [n for n, _ in chain]
    assert names == [
        "1/r",
        "kappa",
        "kappa1",
        "kappa2",
        "kappa3",
        "kappa4",
        "eta3",
        "eta2",
        "eta1",
        "eta",
    ]
    vals = [v for _, v in chain]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    assert led.is_ordered


def test_ledger_constants_scale():
    led = ParameterLedger()
    assert led.c(0) == 0.5
    assert led.c(1) == 0.125
    assert led.c3 == pytest.approx(1.0 / 128.0, rel=0, abs=0)
    assert led.C(3) == pytest.approx(128.0)
    custom = ParameterLedger(c0=0.25, c_ratio=0.5)
    assert custom.c3 == pytest.approx(0.25 * 0.5**3)


def test_ledger_r_is_capped():
    led = ParameterLedger(nu=0.1)
    assert led.r == 8.0
    assert led.r_cap_applied
    wide = ParameterLedger(nu=0.1, r_cap=12.0)
    assert wide.r == 12.0


def test_ledger_rejects_bad_inputs():
    with pytest.raises(ValueError):
        ParameterLedger(nu=0.0)
    with pytest.raises(ValueError):
        ParameterLedger(nu=1.5)
    with pytest.raises(ValueError):
        ParameterLedger(r_cap=0.5)
    with pytest.raises(ValueError):
        ParameterLedger(c0=1.5)
    with pytest.raises(ValueError):
        ParameterLedger(c_ratio=0.0)


def test_ledger_cutoff_power_is_literal():
    led = ParameterLedger(nu=0.1)
    # kappa_3 underflows doubles entirely, so the literal power is exactly 1.
    assert led.cutoff_power(2.0, 3) == 1.0
    assert led.cutoff_power(64.0, 1) == 1.0
    with pytest.raises(ValueError):
        led.cutoff_power(0.5, 3)


# ---------------------------------------------------------------------------
# Admissible time-scales.
# ---------------------------------------------------------------------------


def test_admissible_tau_worked_example():
    led = ParameterLedger()
    c3 = led.c3
    # normA^(3/4) = 8, normPhi^(5/2) = 32, cutoff factor 1 -> m = 32.
    lo, hi, chosen = admissible_tau(16.0, 4.0, 2.0, led)
    assert lo == pytest.approx(c3 / 128.0, rel=1e-15)
    assert hi == pytest.approx(c3 / 8.0, rel=1e-15)
    assert chosen == pytest.approx(c3 / 32.0, rel=1e-15)


def test_admissible_tau_unit_inputs():
    led = ParameterLedger()
    lo, hi, chosen = admissible_tau(1.0, 1.0, 1.0, led)
    # m = max(1, 1, L**kappa3 = 1) = 1
    assert chosen == pytest.approx(led.c3, rel=1e-15)
    assert lo == pytest.approx(led.c3 / 4.0, rel=1e-15)
    assert hi == pytest.approx(4.0 * led.c3, rel=1e-15)


def test_admissible_tau_scalar_norm_scaling():
    led = ParameterLedger()
    _, _, tau4 = admissible_tau(1.0, 4.0, 1.0, led)
    _, _, tau8 = admissible_tau(1.0, 8.0, 1.0, led)
    assert tau4 / tau8 == pytest.approx(2.0**2.5, rel=1e-12)


def test_admissible_tau_rejects_bad_inputs():
    led = ParameterLedger()
    with pytest.raises(ValueError):
        admissible_tau(-1.0, 1.0, 1.0, led)
    with pytest.raises(ValueError):
        admissible_tau(1.0, -1.0, 1.0, led)
    with pytest.raises(ValueError):
        admissible_tau(1.0, 1.0, 0.5, led)


# ---------------------------------------------------------------------------
# Ansatz decomposition.
# ---------------------------------------------------------------------------

M = 16
DT = 1e-3
T = 0.02
CUT = 4.0


def smooth_state(grid: TorusGrid, scale: float = 1.0) -> SahState:
    x1, x2 = grid.x
    phi = scale * ((0.8 + 0.3j) * np.exp(1j * x1) + 0.5 * np.exp(-1j * (x1 + x2)) + 0.2)
    a = np.zeros((2, grid.M, grid.M))
    a[0] = scale * (0.4 * np.cos(x2) + 0.1 * np.sin(x1 + x2))
    a[1] = scale * (0.3 * np.sin(x1) - 0.2 * np.cos(x2))
    return make_state(grid, a, phi)


def run_small(seed=None, scale=1.0, store_every=5, zero_data=False):
    grid = TorusGrid(M)
    cfg = SahConfig(M=M, N=CUT, dt=DT, T=T)
    if zero_data:
        st0 = make_state(grid, np.zeros((2, M, M)), np.zeros((M, M), dtype=complex))
    else:
        st0 = smooth_state(grid, scale)
    if seed is None:
        path = zero_path(grid, DT, cfg.steps)
    else:
        path = sample_path(grid, DT, cfg.steps, seed)
    traj = sah_solve(st0.A, st0.phi, path, cfg, store_every=store_every, record_series=False)
    return grid, traj, path


def test_split_zero_noise_components():
    grid, traj, path = run_small(seed=None)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    assert np.abs(comp.a_linear).max() == 0.0
    assert np.abs(comp.phi_linear).max() == 0.0
    assert np.abs(comp.phi_covariant_low).max() == 0.0
    assert np.abs(comp.phi_high).max() == 0.0
    assert np.array_equal(comp.phi_remainder, comp.phi)
    gap = np.abs(comp.a - comp.a_low_flow - comp.a_high_flow - comp.a_remainder).max()
    assert gap < 1e-12


def test_split_vanishes_at_start_time():
    grid, traj, path = run_small(seed=3)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    assert comp.times[0] == 0.0
    assert np.abs(comp.a_linear[0]).max() == 0.0
    assert np.abs(comp.a_remainder[0]).max() < 1e-12
    assert np.abs(comp.phi_remainder[0] - comp.phi[0]).max() < 1e-12
    # low + high flows reconstruct the initial connection exactly at t0
    rec = comp.a_low_flow[0] + comp.a_high_flow[0]
    assert np.abs(rec - comp.a[0]).max() < 1e-12


def test_split_from_interior_checkpoint():
    grid, traj, path = run_small(seed=5)
    t0 = 0.01
    comp = ansatz_split(traj, path, CUT, t0, (t0, T))
    assert comp.times[0] == pytest.approx(t0)
    assert np.abs(comp.a_remainder[0]).max() < 1e-12
    assert np.abs(comp.phi_remainder[0] - comp.phi[0]).max() < 1e-12


def test_split_resum_exact():
    grid, traj, path = run_small(seed=7)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    assert comp.resum_error < 1e-10


def test_split_components_nontrivial():
    grid, traj, path = run_small(seed=7)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    # with real noise every stochastic object is alive by the window end
    assert np.abs(comp.a_linear[-1]).max() > 0.0
    assert np.abs(comp.phi_linear[-1]).max() > 0.0
    assert np.abs(comp.phi_covariant_low[-1]).max() > 0.0


class _ScaledPath:
    def __init__(self, path, lam):
        self._path = path
        self._lam = lam
        self.grid = path.grid

    @property
    def dt(self):
        return self._path.dt

    @property
    def K(self):
        return self._path.K

    def xi_increment(self, k):
        return self._lam * self._path.xi_increment(k)

    def zeta_increment(self, k):
        return self._lam * self._path.zeta_increment(k)


def _scaled_trajectory(traj, lam):
    grid = traj.states[0].A.grid
    states = [
        SahState(
            s.t,
            ConnectionField(grid, lam * s.A.values, coulomb=s.A.coulomb),
            ScalarField(grid, lam * s.phi.values),
        )
        for s in traj.states
    ]
    return SahTrajectory(traj.config, list(traj.times), states)


def test_split_linear_components_scale():
    lam = 2.5
    grid, traj, path = run_small(seed=11)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    comp2 = ansatz_split(_scaled_trajectory(traj, lam), _ScaledPath(path, lam), CUT, 0.0, (0.0, T))
    for name in ("a_linear", "a_low_flow", "a_high_flow", "phi_linear", "phi_high"):
        ref = lam * getattr(comp, name)
        got = getattr(comp2, name)
        scale = max(np.abs(ref).max(), 1.0)
        assert np.abs(got - ref).max() < 1e-12 * scale, name


def test_split_fully_linear_on_flat_background():
    # With a vanishing connection at t0 the covariant solve is itself linear
    # in the driving noise, so every component scales.
    lam = 3.0
    grid, traj, path = run_small(seed=13, zero_data=True)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    comp2 = ansatz_split(_scaled_trajectory(traj, lam), _ScaledPath(path, lam), CUT, 0.0, (0.0, T))
    for name in (
        "a_linear",
        "a_low_flow",
        "a_high_flow",
        "a_remainder",
        "phi_covariant_low",
        "phi_linear",
        "phi_high",
        "phi_remainder",
    ):
        ref = lam * getattr(comp, name)
        got = getattr(comp2, name)
        scale = max(np.abs(ref).max(), 1.0)
        assert np.abs(got - ref).max() < 1e-12 * scale, name


def test_split_low_flow_stays_divergence_free():
    grid, traj, path = run_small(seed=17)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.0, T))
    assert low_flow_divergence_defect(comp, grid) < 1e-10


def test_split_window_validation():
    grid, traj, path = run_small(seed=19)
    with pytest.raises(ValueError):
        ansatz_split(traj, path, CUT, 0.0, (0.0, 2 * T))  # beyond the end
    with pytest.raises(ValueError):
        ansatz_split(traj, path, CUT, 0.01, (0.0, T))  # starts before t0
    with pytest.raises(ValueError):
        ansatz_split(traj, path, CUT, 0.0012, (0.0012, T))  # t0 not a checkpoint
    with pytest.raises(ValueError):
        ansatz_split(traj, path, M, 0.0, (0.0, T))  # cutoff above the band
    with pytest.raises(ValueError):
        ansatz_split(traj, path, CUT, 0.0, (0.0061, 0.0074))  # no checkpoints


def test_split_window_subset():
    grid, traj, path = run_small(seed=23)
    comp = ansatz_split(traj, path, CUT, 0.0, (0.01, T))
    assert comp.times[0] == pytest.approx(0.01)
    assert comp.times[-1] == pytest.approx(T)
    assert comp.resum_error < 1e-10
    assert np.abs(comp.a_remainder).max() > 0.0


# ---------------------------------------------------------------------------
# Decay report.
# ---------------------------------------------------------------------------


def pure_heat_trajectory():
    grid = TorusGrid(M)
    cfg = SahConfig(M=M, N=CUT, dt=DT, T=0.1, c_g=0.0, sigma_sq=0.0)
    x1, x2 = grid.x
    a = np.zeros((2, M, M))
    a[0] = 0.6 * np.cos(x2) + 0.2 * np.sin(2 * x1 + x2)
    a[1] = 0.5 * np.sin(x1) - 0.3 * np.cos(2 * x2)
    st0 = make_state(grid, a, np.zeros((M, M), dtype=complex))
    path = zero_path(grid, DT, cfg.steps)
    return sah_solve(st0.A, st0.phi, path, cfg, store_every=20, record_series=False)


def test_decay_pure_heat_monotone_no_flags():
    traj = pure_heat_trajectory()
    led = ParameterLedger()
    rep = decay_report(traj, led, [(0.0, 0.1)])
    col = rep.column("gaugeinvA_gamma")
    assert np.all(col[1:] <= col[:-1] * (1 + 1e-12))
    assert col[0] > col[-1]  # strict decay overall
    assert np.all(rep.column("psi_Lr") == 0.0)
    assert rep.flagged_windows == []


def test_decay_gamma_column_matches_raw_power():
    traj = pure_heat_trajectory()
    led = ParameterLedger()
    rep = decay_report(traj, led, [(0.0, 0.1)])
    for row in rep.rows:
        assert row.gaugeinvA_gamma == pytest.approx(row.raw_gauge_A ** led.gamma, rel=1e-12)
        assert row.max_col == max(row.gaugeinvA_gamma, row.psi_Lr)
    assert rep.r_used == 8.0
    assert rep.r_cap_applied
    assert rep.gamma == pytest.approx(2.0 / 7.0)


def test_decay_zero_data_bounded_and_growth_flagged():
    grid, traj, path = run_small(seed=29, zero_data=True, store_every=4)
    led = ParameterLedger()
    rep = decay_report(traj, led, [(0.0, T)], path=path)
    # short noise-driven runs from zero data stay at modest size
    assert all(row.max_col < 10.0 for row in rep.rows)
    # the max column starts at zero and is driven up by the noise
    assert rep.rows[0].max_col == 0.0
    assert rep.rows[-1].max_col > 0.0
    assert rep.flagged_windows == [0]


def test_decay_threshold_flags_window():
    traj = pure_heat_trajectory()
    led = ParameterLedger()
    rep = decay_report(traj, led, [(0.0, 0.1)], threshold=1e-12)
    assert rep.flagged_windows == [0]


def test_decay_window_labels():
    traj = pure_heat_trajectory()
    led = ParameterLedger()
    rep = decay_report(traj, led, [(0.0, 0.02), (0.06, 0.1)])
    ids = rep.column("window_id")
    times = rep.column("t")
    for t, wid in zip(times, ids):
        if t <= 0.02 + 1e-12:
            assert wid == 0
        elif t >= 0.06 - 1e-12:
            assert wid == 1
        else:
            assert wid == -1


def test_decay_linear_subtraction_shrinks_columns():
    # From zero data the state is dominated by its linear part, so removing
    # it must shrink the connection column compared to the raw norm.
    grid, traj, path = run_small(seed=31, zero_data=True, store_every=10)
    led = ParameterLedger()
    with_lin = decay_report(traj, led, [(0.0, T)], path=path)
    without = decay_report(traj, led, [(0.0, T)])
    last_with = with_lin.rows[-1]
    last_without = without.rows[-1]
    assert last_with.gaugeinvA_gamma < last_without.gaugeinvA_gamma
