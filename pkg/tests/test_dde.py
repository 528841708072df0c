"""Delay integrator: convergence, invariants, spectra and the CSV dump."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from giantqed.analytic import exact_solution
from giantqed.dde import (AmplitudeTrajectory, DriveSchedule,
                          excitation_balance, field_amplitudes,
                          frequency_grid, integrate, integrate_with_drive,
                          to_csv)
from giantqed.model import InitialState, SystemConfig, delay_table


def _implicit_euler_population(config, parity, t_end, steps_per_delay):
    """First-order implicit Euler for the collective scalar delay equation.

    Deliberately a different scheme from the package integrator (implicit
    first order vs explicit fourth order) so the two can cross-check each
    other.  Returns |c|^2 at t_end with c(0) = 1.
    """
    coeffs = delay_table(config).collective(parity)
    a0 = coeffs.pop(0)
    K = steps_per_delay
    h = config.delay / K
    n = round(t_end / h)
    c = [0j] * (n + 1)
    c[0] = 1.0 + 0j
    for k in range(n):
        rhs = c[k]
        for lag, a_n in coeffs.items():
            j = k + 1 - lag * K
            if j >= 0:
                rhs -= h * a_n * c[j]
        c[k + 1] = rhs / (1.0 + h * a0)
    return abs(c[n]) ** 2


# Richardson-extrapolated implicit Euler (K = 32000 and 64000), frozen:
# separate, eta = 0.15, phi = 2*pi, symmetric, |c(2.5*delay)|^2.
EULER_FROZEN_POP = 0.12537276691883054


def test_against_frozen_implicit_euler_value():
    cfg = SystemConfig.from_phase("separate", eta=0.15, phi=2 * math.pi)
    traj = integrate(cfg, InitialState.symmetric(), t_max=2.5 * cfg.delay,
                     steps_per_delay=100)
    k = traj.nearest_index(2.5 * cfg.delay)
    assert traj.t[k] == pytest.approx(2.5 * cfg.delay, abs=1e-12)
    pop = 2.0 * abs(traj.c_a[k]) ** 2          # collective normalisation
    assert pop == pytest.approx(EULER_FROZEN_POP, abs=1e-9)


def test_live_implicit_euler_cross_check():
    """Re-derive the frozen number (coarsely) inside the test run."""
    cfg = SystemConfig.from_phase("separate", eta=0.15, phi=2 * math.pi)
    coarse = _implicit_euler_population(cfg, +1, 2.5 * cfg.delay, 4000)
    fine = _implicit_euler_population(cfg, +1, 2.5 * cfg.delay, 8000)
    richardson = 2.0 * fine - coarse
    assert richardson == pytest.approx(EULER_FROZEN_POP, abs=1e-7)


def test_matches_exact_series_and_converges():
    cfg = SystemConfig.from_phase("braided", eta=0.2, phi=1.3 * math.pi)
    state = InitialState.symmetric()
    sol = exact_solution(cfg, state, n_branches=5)
    t_probe = 3.5 * cfg.delay
    ref_a, _ = sol.atomic(t_probe)

    errs = {}
    for K in (25, 50, 100):
        traj = integrate(cfg, state, t_max=t_probe, steps_per_delay=K)
        k = traj.nearest_index(t_probe)
        errs[K] = abs(traj.c_a[k] - ref_a)
    assert errs[100] < 1e-8
    # at least third-order gain per halving (the scheme aims for fourth)
    assert errs[50] < errs[25] / 6.0
    assert errs[100] < errs[50] / 6.0


@settings(max_examples=12, deadline=None)
@given(topology=st.sampled_from(["separate", "braided"]),
       phi_over_pi=st.floats(0.0, 4.0),
       eta=st.floats(0.05, 1.0),
       sym=st.booleans())
def test_parity_is_preserved(topology, phi_over_pi, eta, sym):
    """The two-atom equations are exchange symmetric, so parity eigenstates
    stay parity eigenstates for every parameter choice."""
    cfg = SystemConfig.from_phase(topology, eta=eta, phi=phi_over_pi * math.pi)
    state = InitialState.symmetric() if sym else InitialState.antisymmetric()
    traj = integrate(cfg, state, t_max=2.0 * cfg.delay, steps_per_delay=60)
    sign = 1.0 if sym else -1.0
    assert np.max(np.abs(traj.c_b - sign * traj.c_a)) < 1e-13


def test_early_window_is_single_atom_decay():
    """Before the first retardation echo each amplitude decays at the bare
    collective rate A_0 = gamma, whatever the topology or phase."""
    for topology in ("separate", "braided"):
        cfg = SystemConfig.from_phase(topology, eta=0.4, phi=0.77 * math.pi)
        traj = integrate(cfg, InitialState.symmetric(), t_max=0.9 * cfg.delay,
                         steps_per_delay=80)
        expect = np.exp(-cfg.gamma * traj.t) / math.sqrt(2.0)
        assert np.max(np.abs(np.abs(traj.c_a) - expect)) < 1e-10


def test_drive_single_segment_is_bit_identical():
    cfg = SystemConfig.from_phase("separate", eta=0.3, phi=0.9 * math.pi)
    state = InitialState.antisymmetric()
    plain = integrate(cfg, state, t_max=1.5, steps_per_delay=60)
    driven = integrate_with_drive(cfg, state, t_max=1.5,
                                  schedule=DriveSchedule.constant(cfg.omega0),
                                  steps_per_delay=60)
    assert np.array_equal(plain.c_a, driven.c_a)
    assert np.array_equal(plain.c_b, driven.c_b)


def test_drive_switch_changes_late_dynamics_only():
    cfg = SystemConfig.from_phase("separate", eta=0.2, phi=2 * math.pi)
    state = InitialState.antisymmetric()
    t_s = 3.0
    sched = DriveSchedule.switch_at(t_s, cfg.omega0, cfg.omega0 * 1.25)
    base = integrate(cfg, state, t_max=6.0, steps_per_delay=50)
    kicked = integrate_with_drive(cfg, state, t_max=6.0, schedule=sched,
                                  steps_per_delay=50)
    before = base.t <= t_s + 1e-12
    # same dynamics before the switch (only the phase bookkeeping differs
    # by float rounding between the static and windowed code paths)
    assert np.max(np.abs(base.c_a[before] - kicked.c_a[before])) < 1e-13
    # the dark state is phase-matched to the old drive, so the kick releases it
    k_end = len(base.t) - 1
    assert kicked.pop_a[k_end] < base.pop_a[k_end] - 1e-3


def test_schedule_validation():
    with pytest.raises(ValueError):
        DriveSchedule((1.0,), (0.5,))          # must start at 0
    with pytest.raises(ValueError):
        DriveSchedule((0.0, 0.0), (1.0, 2.0))  # strictly increasing
    with pytest.raises(ValueError):
        DriveSchedule((0.0,), ())
    sched = DriveSchedule.switch_at(2.0, 10.0, 12.0)
    assert sched.omega_at(1.9) == 10.0
    assert sched.omega_at(2.0) == 12.0
    # accumulated phase is continuous across the switch
    eps = 1e-9
    assert sched.accumulated(2.0 + eps) - sched.accumulated(2.0 - eps) == \
        pytest.approx(0.0, abs=1e-6)


def test_step_floor_validation():
    cfg = SystemConfig.from_phase("separate", eta=0.2, phi=0.0)
    with pytest.raises(ValueError):
        integrate(cfg, InitialState.symmetric(), t_max=1.0, steps_per_delay=0)
    with pytest.raises(ValueError):
        integrate(cfg, InitialState.symmetric(), t_max=-1.0)
    big = SystemConfig.from_phase("separate", eta=20.0, phi=0.0)
    with pytest.raises(ValueError):
        integrate(big, InitialState.symmetric(), t_max=1.0,
                  steps_per_delay=100)
    # a tiny delay is allowed to use a single step per delay
    dicke = SystemConfig.from_phase("separate", eta=1e-6, phi=0.0)
    traj = integrate(dicke, InitialState.symmetric(), t_max=20 * dicke.delay,
                     steps_per_delay=1)
    assert len(traj.t) == 21


def test_zero_delay_closed_form():
    """delay = 0 collapses to coupled exponentials: the symmetric channel
    decays at the full constructive rate, the antisymmetric one is dark."""
    cfg = SystemConfig(topology="braided", delay=0.0, omega0=3.0)
    sym = integrate(cfg, InitialState.symmetric(), t_max=1.0)
    assert np.allclose(sym.excited_population, np.exp(-8.0 * sym.t),
                       rtol=0.0, atol=1e-12)
    dark = integrate(cfg, InitialState.antisymmetric(), t_max=1.0)
    assert np.allclose(dark.excited_population, 1.0, rtol=0.0, atol=1e-12)


def test_interpolate_nodes_and_midpoints():
    cfg = SystemConfig.from_phase("separate", eta=0.25, phi=0.6 * math.pi)
    state = InitialState.symmetric()
    traj = integrate(cfg, state, t_max=3.0 * cfg.delay, steps_per_delay=40)
    sol = exact_solution(cfg, state, n_branches=4)
    k = len(traj.t) // 2
    c_a, c_b = traj.interpolate(traj.t[k])
    assert c_a == traj.c_a[k] and c_b == traj.c_b[k]
    t_mid = 0.5 * (traj.t[k] + traj.t[k + 1])
    ref_a, _ = sol.atomic(t_mid)
    c_a_mid, _ = traj.interpolate(t_mid)
    assert abs(c_a_mid - ref_a) < 1e-8
    arr_a, arr_b = traj.interpolate(np.array([0.0, t_mid]))
    assert arr_a.shape == (2,) and arr_b.shape == (2,)
    assert arr_a[0] == traj.c_a[0]
    with pytest.raises(ValueError):
        traj.interpolate(traj.t[-1] + 1.0)
    with pytest.raises(ValueError):
        traj.interpolate(-0.5)


# ---------------------------------------------------------------------------
# emitted spectrum
# ---------------------------------------------------------------------------

def test_spectrum_mirror_symmetry_and_balance():
    """Parity eigenstates emit mirror-symmetrically (|phi_R| = |phi_L|) and
    atomic population plus field norm stays at the initial excitation."""
    cfg = SystemConfig.from_phase("braided", eta=0.2, phi=0.7 * math.pi,
                                  gamma=1.0)
    traj = integrate(cfg, InitialState.symmetric(), t_max=6.0,
                     steps_per_delay=100)
    grid = frequency_grid(cfg, half_width=1200.0, n_points=6001)
    phi_r, phi_l = field_amplitudes(traj, grid, 6.0)
    assert phi_r.shape == grid.shape
    assert np.max(np.abs(np.abs(phi_r) - np.abs(phi_l))) < 1e-12
    total = excitation_balance(traj, grid, 6.0)
    assert total == pytest.approx(1.0, abs=2e-3)


def test_excitation_balance_improves_with_window():
    cfg = SystemConfig.from_phase("separate", eta=0.2, phi=math.pi)
    traj = integrate(cfg, InitialState.antisymmetric(), t_max=4.0,
                     steps_per_delay=160)
    errs = []
    for half_width, n in ((300.0, 8001), (2400.0, 16001)):
        grid = frequency_grid(cfg, half_width=half_width, n_points=n)
        errs.append(abs(excitation_balance(traj, grid, 4.0) - 1.0))
    assert errs[1] < errs[0]
    assert errs[1] < 1e-3


def test_field_amplitudes_amortised_sweep_matches_single_calls():
    """One increasing-time sweep must give the same amplitudes as separate
    calls, including across a drive switch that is not grid aligned."""
    cfg = SystemConfig.from_phase("separate", eta=0.2, phi=2 * math.pi)
    sched = DriveSchedule.switch_at(1.23, cfg.omega0, 1.3 * cfg.omega0)
    traj = integrate_with_drive(cfg, InitialState.antisymmetric(), 3.0,
                                sched, steps_per_delay=100)
    grid = frequency_grid(cfg, half_width=30.0, n_points=401)
    times = [0.8, 1.23, 2.9]
    swept_r, swept_l = field_amplitudes(traj, grid, times)
    for i, t_probe in enumerate(times):
        one_r, one_l = field_amplitudes(traj, grid, t_probe)
        assert np.max(np.abs(swept_r[i] - one_r)) < 1e-14
        assert np.max(np.abs(swept_l[i] - one_l)) < 1e-14
    with pytest.raises(ValueError):
        field_amplitudes(traj, grid, [2.0, 1.0])


def test_frequency_grid_defaults():
    cfg = SystemConfig.from_phase("separate", eta=0.5, phi=1.0, gamma=1.0)
    grid = frequency_grid(cfg)
    assert len(grid) == 4001
    assert grid[len(grid) // 2] == pytest.approx(cfg.omega0)
    assert grid[-1] - grid[0] == pytest.approx(2 * 40.0 / cfg.delay)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def test_to_csv_format(tmp_path):
    cfg = SystemConfig.from_phase("separate", eta=0.2, phi=2 * math.pi)
    traj = integrate(cfg, InitialState.antisymmetric(), t_max=0.5,
                     steps_per_delay=50)
    path = tmp_path / "traj.csv"
    to_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# giantqed amplitude trajectory"
    assert any("topology = separate" in s for s in lines if s.startswith("#"))
    header_i = lines.index("t,re_ca,im_ca,re_cb,im_cb,pop_a,pop_b")
    rows = [line.split(",") for line in lines[header_i + 1:]]
    assert len(rows) == len(traj.t)
    got = np.array([[float(v) for v in row] for row in rows])
    assert np.array_equal(got[:, 0], traj.t)
    assert np.array_equal(got[:, 1], traj.c_a.real)
    assert np.array_equal(got[:, 6], traj.pop_b)
    assert "np.float64" not in path.read_text()
    # single-segment runs do not advertise a schedule
    assert not any(s.startswith("# schedule") for s in lines)


def test_to_csv_includes_multi_segment_schedule(tmp_path):
    cfg = SystemConfig.from_phase("separate", eta=0.2, phi=2 * math.pi)
    sched = DriveSchedule.switch_at(0.3, cfg.omega0, 0.5 * cfg.omega0)
    traj = integrate_with_drive(cfg, InitialState.antisymmetric(), 0.6,
                                sched, steps_per_delay=50)
    path = tmp_path / "traj.csv"
    to_csv(traj, path)
    sched_lines = [s for s in path.read_text().splitlines()
                   if s.startswith("# schedule")]
    assert len(sched_lines) == 1
    assert "0.3" in sched_lines[0]
