"""Delay-equation integrator for the two-atom amplitudes.

The excited amplitudes obey a pair of linear delay differential equations
whose delayed coefficients are the DelayTable entries.  The integrator works
in the rotating (interaction) picture: no free omega0 oscillation, all the
propagation phases live in the delay coefficients.  It steps with classical
RK4 on a grid aligned with the delay (h = delay/K), so every delayed node
value is read exactly from storage and only the half-step stage values need
interpolation (cubic Hermite from stored values and one-sided derivatives).
Multiples of the delay are breakpoints: derivative jumps there are kept on
interval boundaries and never interpolated across.

A piecewise-constant frequency schedule ("drive") is supported by replacing
the static phase exp(i n phi) of each delayed term with the phase actually
accumulated over the retardation window, exp(i Int_{t-n*delay}^t omega0(s) ds).
With a single segment this reproduces the undriven integrator bit for bit.
"""

from __future__ import annotations

import cmath
import math
from bisect import bisect_right
from dataclasses import dataclass, replace

import numpy as np

from .model import InitialState, SystemConfig, delay_table


@dataclass(frozen=True)
class DriveSchedule:
    """Piecewise-constant transition frequency omega0(t).

    ``starts`` must begin at 0.0 and increase; ``omegas[i]`` applies on
    [starts[i], starts[i+1]).
    """

    starts: tuple[float, ...]
    omegas: tuple[float, ...]

    def __post_init__(self):
        if len(self.starts) != len(self.omegas) or not self.starts:
            raise ValueError("schedule needs matching, non-empty starts/omegas")
        if self.starts[0] != 0.0:
            raise ValueError("first schedule segment must start at t=0")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("schedule start times must strictly increase")

    @classmethod
    def constant(cls, omega0: float) -> "DriveSchedule":
        return cls((0.0,), (float(omega0),))

    @classmethod
    def switch_at(cls, t_switch: float, omega_before: float,
                  omega_after: float) -> "DriveSchedule":
        return cls((0.0, float(t_switch)), (float(omega_before), float(omega_after)))

    def omega_at(self, t: float) -> float:
        return self.omegas[bisect_right(self.starts, t) - 1]

    def accumulated(self, t: float) -> float:
        """Phase integral Int_0^t omega0(s) ds (t < 0 extends segment 0)."""
        i = bisect_right(self.starts, t) - 1
        if i < 0:
            return self.omegas[0] * t
        acc = 0.0
        for k in range(i):
            acc += self.omegas[k] * (self.starts[k + 1] - self.starts[k])
        return acc + self.omegas[i] * (t - self.starts[i])

    def window_phase(self, t: float, span: float) -> float:
        """Phase accumulated over the retardation window [t-span, t]."""
        return self.accumulated(t) - self.accumulated(t - span)


@dataclass(frozen=True)
class AmplitudeTrajectory:
    """Dense solution record of one integration run.

    ``deriv_*`` are the stored node derivatives used for Hermite
    interpolation; the ``_left`` variants differ from the ``_right`` ones
    only at breakpoint nodes (delayed terms switch on there).
    """

    t: np.ndarray
    c_a: np.ndarray
    c_b: np.ndarray
    deriv_a_right: np.ndarray
    deriv_b_right: np.ndarray
    deriv_a_left: np.ndarray
    deriv_b_left: np.ndarray
    config: SystemConfig
    schedule: DriveSchedule
    steps_per_delay: int

    @property
    def pop_a(self) -> np.ndarray:
        return np.abs(self.c_a) ** 2

    @property
    def pop_b(self) -> np.ndarray:
        return np.abs(self.c_b) ** 2

    @property
    def excited_population(self) -> np.ndarray:
        return self.pop_a + self.pop_b

    def interpolate(self, t):
        """(c_a, c_b) at arbitrary times via piecewise cubic Hermite."""
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        if tq.size and (tq.min() < -1e-12 or tq.max() > self.t[-1] + 1e-12):
            raise ValueError("interpolation time outside the stored run")
        h = self.t[1] - self.t[0]
        idx = np.clip((tq / h).astype(int), 0, len(self.t) - 2)
        u = tq / h - idx
        out = []
        for y, dr, dl in ((self.c_a, self.deriv_a_right, self.deriv_a_left),
                          (self.c_b, self.deriv_b_right, self.deriv_b_left)):
            y0, y1 = y[idx], y[idx + 1]
            d0, d1 = dr[idx], dl[idx + 1]
            h00 = (1 + 2 * u) * (1 - u) ** 2
            h10 = u * (1 - u) ** 2
            h01 = u * u * (3 - 2 * u)
            h11 = u * u * (u - 1)
            out.append(h00 * y0 + h * h10 * d0 + h01 * y1 + h * h11 * d1)
        ca, cb = out
        if np.isscalar(t) or np.asarray(t).shape == ():
            return complex(ca[0]), complex(cb[0])
        return ca, cb

    def nearest_index(self, t: float) -> int:
        i = int(round(t / (self.t[1] - self.t[0])))
        return min(max(i, 0), len(self.t) - 1)


def integrate(config: SystemConfig, state: InitialState, t_max: float,
              steps_per_delay: int = 100) -> AmplitudeTrajectory:
    """Integrate the two-amplitude delay equations on [0, t_max].

    Args:
        config: system parameters; ``config.delay == 0`` falls back to the
            instantaneous (ordinary differential) limit solved in closed form.
        state: initial atomic amplitudes.
        t_max: end time (the grid extends to the next whole step).
        steps_per_delay: K, grid resolution per delay; the step
            delay/K must not exceed 0.02/gamma (so K >= 50*eta).

    Returns:
        AmplitudeTrajectory sampled on the aligned grid.
    """
    return integrate_with_drive(config, state, t_max,
                                DriveSchedule.constant(config.omega0),
                                steps_per_delay)


def integrate_with_drive(config: SystemConfig, state: InitialState,
                         t_max: float, schedule: DriveSchedule,
                         steps_per_delay: int = 100) -> AmplitudeTrajectory:
    """Integrate with a piecewise-constant frequency schedule.

    The delayed term at lag n*delay picks up the phase accumulated over its
    own retardation window, exp(i [Omega(t) - Omega(t - n*delay)]) with
    Omega the integral of omega0(s).  For a single-segment schedule this is
    bit-identical to :func:`integrate`.
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if steps_per_delay < 1:
        raise ValueError("steps_per_delay must be at least 1")
    # accuracy floor on the step against the decay timescale, not the
    # delay: tiny delays may use K = 1, large ones need K >= 50*eta
    if config.delay > 0 and \
            config.delay / steps_per_delay > 0.02 / config.gamma + 1e-15:
        raise ValueError("step too coarse: steps_per_delay must keep "
                         "gamma*delay/K <= 0.02 (K >= 50*eta)")
    if config.delay == 0.0:
        return _integrate_instantaneous(config, state, t_max, steps_per_delay, schedule)

    # magnitude-only coefficients (phases applied per evaluation time)
    table0 = delay_table(replace(config, omega0=0.0))
    gamma0 = table0.self_terms[0].real
    lags = sorted(n for n in set(table0.self_terms) | set(table0.cross_terms) if n > 0)
    s_self = [table0.self_terms.get(n, 0.0 + 0j).real for n in lags]
    s_cross = [table0.cross_terms.get(n, 0.0 + 0j).real for n in lags]

    K = steps_per_delay
    h = config.delay / K
    n_steps = max(1, int(math.ceil(t_max / h - 1e-9)))
    delay = config.delay

    static = len(schedule.omegas) == 1
    if static:
        phi1 = schedule.omegas[0] * delay
        static_phase = [cmath.exp(1j * n * phi1) for n in lags]

    def phases(t: float) -> list[complex]:
        if static:
            return static_phase
        return [cmath.exp(1j * schedule.window_phase(t, n * delay)) for n in lags]

    ca = np.empty(n_steps + 1, dtype=complex)
    cb = np.empty(n_steps + 1, dtype=complex)
    dra = np.empty(n_steps + 1, dtype=complex)
    drb = np.empty(n_steps + 1, dtype=complex)
    dla = np.empty(n_steps + 1, dtype=complex)
    dlb = np.empty(n_steps + 1, dtype=complex)

    ca[0] = complex(state.c_a)
    cb[0] = complex(state.c_b)
    dra[0] = -gamma0 * ca[0]
    drb[0] = -gamma0 * cb[0]
    dla[0] = dra[0]
    dlb[0] = drb[0]

    active: list[int] = []           # indices into lags live on this interval

    def deriv(t: float, ya: complex, yb: complex, delayed) -> tuple[complex, complex]:
        fa = -gamma0 * ya
        fb = -gamma0 * yb
        for i, va, vb, ph in delayed:
            fa -= ph * (s_self[i] * va + s_cross[i] * vb)
            fb -= ph * (s_cross[i] * va + s_self[i] * vb)
        return fa, fb

    for j in range(n_steps):
        t0 = j * h
        tm = t0 + 0.5 * h
        t1 = t0 + h
        ph_m = phases(tm)
        ph_e = phases(t1)
        # delayed inputs for the half-step stages: Hermite midpoint of the
        # history interval [j-nK, j-nK+1], and for the endpoint stage the
        # stored node j+1-nK.
        mids = []
        ends = []
        for i in active:
            base = j - lags[i] * K
            mids.append((i,
                         0.5 * (ca[base] + ca[base + 1]) + 0.125 * h * (dra[base] - dla[base + 1]),
                         0.5 * (cb[base] + cb[base + 1]) + 0.125 * h * (drb[base] - dlb[base + 1]),
                         ph_m[i]))
            ends.append((i, ca[base + 1], cb[base + 1], ph_e[i]))

        k1a, k1b = dra[j], drb[j]
        k2a, k2b = deriv(tm, ca[j] + 0.5 * h * k1a, cb[j] + 0.5 * h * k1b, mids)
        k3a, k3b = deriv(tm, ca[j] + 0.5 * h * k2a, cb[j] + 0.5 * h * k2b, mids)
        k4a, k4b = deriv(t1, ca[j] + h * k3a, cb[j] + h * k3b, ends)
        ca[j + 1] = ca[j] + (h / 6.0) * (k1a + 2.0 * (k2a + k3a) + k4a)
        cb[j + 1] = cb[j] + (h / 6.0) * (k1b + 2.0 * (k2b + k3b) + k4b)

        # node derivatives: left sense (terms live on the closing interval),
        # then right sense after switching on any lag activating at t1.
        ends_node = [(i, ca[j + 1 - lags[i] * K], cb[j + 1 - lags[i] * K], ph_e[i])
                     for i in active]
        fla, flb = deriv(t1, ca[j + 1], cb[j + 1], ends_node)
        dla[j + 1], dlb[j + 1] = fla, flb
        if (j + 1) % K == 0 and (j + 1) // K in lags:
            active.append(lags.index((j + 1) // K))
            ends_node = [(i, ca[j + 1 - lags[i] * K], cb[j + 1 - lags[i] * K], ph_e[i])
                         for i in active]
            dra[j + 1], drb[j + 1] = deriv(t1, ca[j + 1], cb[j + 1], ends_node)
        else:
            dra[j + 1], drb[j + 1] = fla, flb

    t_grid = np.arange(n_steps + 1) * h
    return AmplitudeTrajectory(t=t_grid, c_a=ca, c_b=cb,
                               deriv_a_right=dra, deriv_b_right=drb,
                               deriv_a_left=dla, deriv_b_left=dlb,
                               config=config, schedule=schedule,
                               steps_per_delay=steps_per_delay)


def _integrate_instantaneous(config: SystemConfig, state: InitialState,
                             t_max: float, steps_per_delay: int,
                             schedule: DriveSchedule) -> AmplitudeTrajectory:
    """delay = 0: all retardation windows collapse, closed-form exponentials."""
    table = delay_table(config)           # phi = omega0*0 = 0, real table
    plus = sum(table.collective(+1).values()).real
    minus = sum(table.collective(-1).values()).real
    n = max(steps_per_delay, 50) * max(1, int(math.ceil(t_max * config.gamma)))
    t = np.linspace(0.0, t_max, n + 1)
    cp0 = state.c_a + state.c_b
    cm0 = state.c_a - state.c_b
    ep = np.exp(-plus * t)
    em = np.exp(-minus * t)
    ca = 0.5 * (cp0 * ep + cm0 * em)
    cb = 0.5 * (cp0 * ep - cm0 * em)
    da = 0.5 * (-plus * cp0 * ep - minus * cm0 * em)
    db = 0.5 * (-plus * cp0 * ep + minus * cm0 * em)
    return AmplitudeTrajectory(t=t, c_a=ca, c_b=cb,
                               deriv_a_right=da, deriv_b_right=db,
                               deriv_a_left=da.copy(), deriv_b_left=db.copy(),
                               config=config, schedule=schedule,
                               steps_per_delay=steps_per_delay)


# -- emitted spectrum ---------------------------------------------------------

def frequency_grid(config: SystemConfig, half_width: float | None = None,
                   n_points: int = 4001) -> np.ndarray:
    """Uniform grid centred on omega0; default half-width 40/delay.

    The model linearises the dispersion around omega0, so the window is
    allowed to extend below zero frequency for narrow-band configs.
    """
    if half_width is None:
        if config.delay <= 0:
            raise ValueError("default frequency window needs delay > 0")
        half_width = 40.0 / config.delay
    return np.linspace(config.omega0 - half_width, config.omega0 + half_width,
                       n_points)


def _filon_weights(theta):
    """Endpoint weights of Int_0^1 f(u) exp(i theta u) du for linear f.

    Returns (w0, w1) with the integral = w0*f(0) + w1*f(1); both reduce to
    the trapezoid 1/2 as theta -> 0 (a short series avoids the 0/0 there).
    """
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-4
    th = np.where(small, 1.0, theta)
    e = np.exp(1j * th)
    w1 = (e * (1.0 - 1j * th) - 1.0) / th ** 2
    w0 = (e - 1.0) / (1j * th) - w1
    ts = np.where(small, theta, 0.0)
    w0 = np.where(small, 0.5 + 1j * ts / 6.0 - ts ** 2 / 24.0, w0)
    w1 = np.where(small, 0.5 + 1j * ts / 3.0 - ts ** 2 / 8.0, w1)
    return w0, w1


def field_amplitudes(traj: AmplitudeTrajectory, omega_grid: np.ndarray,
                     t, chunk: int | None = None):
    """Right/left-moving photon amplitudes phi_R, phi_L at time(s) t.

    Evaluates the formal time integral

        phi_R(omega, t) = -i g0 sum_m Lm_R(omega) Int_0^t c_m(tau)
                           exp(i [omega tau - Omega(tau)]) dtau

    with g0 = sqrt(gamma/(4 pi)), Lm_R(omega) = sum_legs exp(-i omega x/v_g)
    (phi_L uses the conjugate leg factors).  ``t`` snaps to the nearest
    node; pass an increasing sequence of times to amortise one sweep over
    the trajectory.

    The quadrature treats c_m as linear on each node interval and the
    oscillatory factor exp(i (omega - omega0) tau) exactly (Filon-type
    trapezoid), so arbitrarily wide windows stay alias-free; the only
    resolution requirement is the integrator's own step floor.  An interval
    containing a mid-step drive switch is weighted with the pre-switch
    drive, an O(h) slice of a single node.

    Returns (phi_R, phi_L) with shape (len(omega_grid),), or
    (len(t), len(omega_grid)) for a sequence of times.
    """
    scalar = np.isscalar(t) or np.asarray(t).shape == ()
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(np.diff(times) < 0):
        raise ValueError("times must be non-decreasing")
    idxs = [traj.nearest_index(tv) for tv in times]

    omega = np.asarray(omega_grid, dtype=float)
    cfg = traj.config
    g0 = math.sqrt(cfg.gamma / (4.0 * math.pi))
    # leg phase factors per atom and direction
    leg_r = []
    leg_l = []
    for atom in (0, 1):
        x = np.asarray(cfg.leg_positions(atom))
        leg_r.append(np.exp(-1j * np.outer(omega, x) / cfg.v_g).sum(axis=1))
        leg_l.append(np.exp(+1j * np.outer(omega, x) / cfg.v_g).sum(axis=1))

    tau = traj.t
    omega_acc = np.array([traj.schedule.accumulated(tv) for tv in tau])
    rot_a = traj.c_a * np.exp(-1j * omega_acc)
    rot_b = traj.c_b * np.exp(-1j * omega_acc)

    if chunk is None:
        chunk = max(8, int(4_000_000 / max(omega.size, 1)))  # ~64 MB blocks
    h = tau[1] - tau[0]
    n_nodes = tau.size
    # node opening each schedule segment; the boundary node belongs to both
    # the closing and the opening segment (it ends one interval run and
    # starts the next)
    seg_first = [0] + [min(n_nodes - 1, int(math.ceil(s / h - 1e-9)))
                       for s in traj.schedule.starts[1:]]

    def seg_last(j: int) -> int:
        return seg_first[j + 1] if j + 1 < len(seg_first) else n_nodes - 1

    def seg_setup(j: int):
        theta = (omega - traj.schedule.omegas[j]) * h
        w0, w1 = _filon_weights(theta)
        return w0, w1 * np.exp(-1j * theta)

    out_r = np.zeros((len(times), omega.size), dtype=complex)
    out_l = np.zeros((len(times), omega.size), dtype=complex)
    done_a = np.zeros(omega.size, dtype=complex)   # closed segments' integral
    done_b = np.zeros(omega.size, dtype=complex)
    acc_a = np.zeros(omega.size, dtype=complex)    # open segment's node sum
    acc_b = np.zeros(omega.size, dtype=complex)
    seg = 0
    w0, w1s = seg_setup(0)
    bot_a = np.full(omega.size, rot_a[0], dtype=complex)   # tau[0] = 0
    bot_b = np.full(omega.size, rot_b[0], dtype=complex)
    pos = 0
    for which, stop in enumerate(idxs):
        while True:
            target = min(stop, seg_last(seg))
            while pos <= target:
                hi = min(target + 1, pos + chunk)
                block = np.exp(1j * np.outer(tau[pos:hi], omega))
                acc_a += rot_a[pos:hi] @ block
                acc_b += rot_b[pos:hi] @ block
                pos = hi
            if stop <= seg_last(seg):
                break
            # close the segment at its boundary node, reopen there
            end = seg_last(seg)
            top_a = rot_a[end] * np.exp(1j * tau[end] * omega)
            top_b = rot_b[end] * np.exp(1j * tau[end] * omega)
            done_a += h * (w0 * (acc_a - top_a) + w1s * (acc_a - bot_a))
            done_b += h * (w0 * (acc_b - top_b) + w1s * (acc_b - bot_b))
            seg += 1
            w0, w1s = seg_setup(seg)
            bot_a, bot_b = top_a, top_b
            acc_a, acc_b = top_a.copy(), top_b.copy()
        top_a = rot_a[stop] * np.exp(1j * tau[stop] * omega)
        top_b = rot_b[stop] * np.exp(1j * tau[stop] * omega)
        ia = done_a + h * (w0 * (acc_a - top_a) + w1s * (acc_a - bot_a))
        ib = done_b + h * (w0 * (acc_b - top_b) + w1s * (acc_b - bot_b))
        out_r[which] = -1j * g0 * (leg_r[0] * ia + leg_r[1] * ib)
        out_l[which] = -1j * g0 * (leg_l[0] * ia + leg_l[1] * ib)
    if scalar:
        return out_r[0], out_l[0]
    return out_r, out_l


def excitation_balance(traj: AmplitudeTrajectory, omega_grid: np.ndarray, t) -> float:
    """Total excitation |c_a|^2 + |c_b|^2 + sum_dirs Int |phi|^2 domega at t.

    Equals 1 exactly in the model; the deficit measures quadrature error
    (finite window, node resolution) and is the standard conservation check.
    """
    phi_r, phi_l = field_amplitudes(traj, omega_grid, t)
    field = np.trapezoid(np.abs(phi_r) ** 2 + np.abs(phi_l) ** 2, omega_grid)
    i = traj.nearest_index(float(t))
    return float(traj.pop_a[i] + traj.pop_b[i] + field)


def to_csv(traj: AmplitudeTrajectory, path) -> None:
    """Write the trajectory as CSV with a config-echo comment header."""
    lines = ["# giantqed amplitude trajectory"]
    lines += [f"# {s}" for s in traj.config.summary_lines()]
    lines.append(f"# steps_per_delay = {traj.steps_per_delay}")
    if len(traj.schedule.omegas) > 1:
        seg = ", ".join(f"({float(s)!r}, {float(w)!r})" for s, w in
                        zip(traj.schedule.starts, traj.schedule.omegas))
        lines.append(f"# schedule = [{seg}]")
    lines.append("t,re_ca,im_ca,re_cb,im_cb,pop_a,pop_b")
    rows = zip(traj.t.tolist(), traj.c_a.tolist(), traj.c_b.tolist(),
               traj.pop_a.tolist(), traj.pop_b.tolist())
    for t_k, a_k, b_k, pa_k, pb_k in rows:
        lines.append(f"{t_k!r},{a_k.real!r},{a_k.imag!r},"
                     f"{b_k.real!r},{b_k.imag!r},{pa_k!r},{pb_k!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
