"""Single-photon scattering and collective decay poles (two legs per atom).

A photon with detuning Delta_k from the atomic resonance scatters off the
four coupling legs; the transmission/reflection amplitudes share one
denominator whose complex zeros (in Delta_k, continued off the real axis)
are the collective decay poles.  With Gamma = 2i Delta_k each pole gives a
collective rate whose real part is the population decay rate.  Everything
here uses the exchange coupling J0 = gamma/2; the conversion is fixed at
this module boundary and never leaks out.

Frozen retardation (exp(i k Delta_x) -> exp(i phi)) makes the denominator a
quadratic in Delta_k whose roots are the Markovian rates; they seed a damped
complex Newton iteration on the full transcendental denominator for the
non-Markovian poles.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import analytic
from .model import SystemConfig, delay_table


class NonConvergence(Exception):
    """Newton iteration failed to reach the residual target."""


def _check_two_legs(config: SystemConfig) -> None:
    if config.n_legs != 2:
        raise ValueError("scattering formulas are available for n_legs=2 only")


def scattering(config: SystemConfig, delta_k):
    """Transmission and reflection amplitudes (t, r) at detuning delta_k.

    ``delta_k`` is the detuning (omega - omega0) of the incoming photon;
    scalars or arrays work.  |t|^2 + |r|^2 = 1 on the real axis.

    Exactly on a trapping resonance (phi on its dark multiple of pi AND
    delta_k = 0) numerator and denominator share a zero and the entry is
    nan; the limit is smooth, so any neighbouring detuning gives it.
    """
    _check_two_legs(config)
    j0 = 0.5 * config.gamma
    dk = np.asarray(delta_k, dtype=complex)
    # k Delta_x = phi + delta_k * delay (linear dispersion)
    kdx = config.phi + dk * config.delay
    z = np.exp(1j * kdx)
    z2 = z * z
    # reflection phase is referenced to the array centre (legs span
    # +-3 dx/2 about x=0), hence the z**-3 relative to a first-leg-at-origin
    # convention; transmission is reference independent.
    with np.errstate(invalid="ignore", divide="ignore"):
        if config.topology == "separate":
            den = ((1 + z) ** 2 * (-4 + z2 + 2 * z ** 3 + z ** 4) * j0 ** 2
                   + 4j * (1 + z) * j0 * dk + dk ** 2)
            t = (dk + 1j * j0 * (z - 1 / z)) ** 2 / den
            r = -(1 + z) ** 2 * j0 * (2 * j0 * (-1 - z + z ** 3 + z ** 4)
                                      + 1j * dk * (1 + z ** 4)) / (z ** 3 * den)
        else:
            den = ((-4 + z2 + 2 * z2 ** 2 + z2 ** 3) * j0 ** 2
                   + 4j * (1 + z2) * j0 * dk + dk ** 2)
            t = np.exp(-2j * kdx) * ((-1 + z2) ** 2 * j0 ** 2
                                     + 2j * (-1 + z2 ** 2) * j0 * dk + z2 * dk ** 2) / den
            r = -(1 + z2) ** 2 * j0 * (2 * j0 * (-1 + z2) + 1j * dk * (1 + z2)) / (z ** 3 * den)
    if t.shape:
        return t, r
    return complex(t), complex(r)


def markovian_rates(config: SystemConfig) -> tuple[complex, complex]:
    """Frozen-retardation collective rates (Gamma_plus, Gamma_minus).

    These are 2*sum(A_n) over the parity-reduced delay coefficients -- the
    quadratic-denominator roots with exp(i k Delta_x) pinned at exp(i phi).
    """
    _check_two_legs(config)
    table = delay_table(config)
    return (2.0 * sum(table.collective(+1).values()),
            2.0 * sum(table.collective(-1).values()))


def characteristic(config: SystemConfig, delta):
    """Dimensionless scattering denominator chi(delta); zeros = decay poles.

    ``delta`` is the complex detuning in units of gamma=1 carried by the
    config (pass rate-unit values; internally everything is scaled by gamma
    so residuals are comparable across configs).
    """
    _check_two_legs(config)
    g = config.gamma
    j0 = 0.5
    dk = np.asarray(delta, dtype=complex) / g
    z = np.exp(1j * (config.phi + dk * (config.delay * g)))
    if config.topology == "separate":
        out = ((1 + z) ** 2 * (-4 + z ** 2 + 2 * z ** 3 + z ** 4) * j0 ** 2
               + 4j * (1 + z) * j0 * dk + dk ** 2)
    else:
        z2 = z * z
        out = ((-4 + z2 + 2 * z2 ** 2 + z2 ** 3) * j0 ** 2
               + 4j * (1 + z2) * j0 * dk + dk ** 2)
    return out if out.shape else complex(out)


def characteristic_derivative(config: SystemConfig, delta):
    """d chi / d delta (same dimensionless scaling as ``characteristic``)."""
    _check_two_legs(config)
    g = config.gamma
    j0 = 0.5
    eta = config.delay * g
    dk = complex(delta) / g
    z = cmath.exp(1j * (config.phi + dk * eta))
    dz = 1j * eta * z
    if config.topology == "separate":
        dpoly = (2 * (1 + z) * (-4 + z ** 2 + 2 * z ** 3 + z ** 4)
                 + (1 + z) ** 2 * (2 * z + 6 * z ** 2 + 4 * z ** 3)) * dz
        return (j0 ** 2 * dpoly + 4j * j0 * (dk * dz + (1 + z)) + 2 * dk) / g
    z2 = z * z
    dz2 = 2 * z * dz
    dpoly = dz2 + 4 * z2 * dz2 + 3 * z2 ** 2 * dz2
    return (j0 ** 2 * dpoly + 4j * j0 * (dk * dz2 + (1 + z2)) + 2 * dk) / g


@dataclass(frozen=True)
class Pole:
    """One converged decay pole.

    ``rate`` = 2i*delta is the collective rate: Re is the population decay
    rate, Im the collective frequency shift.  ``parity`` records which
    parity-reduced Laplace denominator is (numerically) zero at the root.
    """

    delta: complex
    rate: complex
    parity: int
    residual: float
    iterations: int


def _newton(config: SystemConfig, seed: complex, tol: float,
            max_iter: int) -> tuple[complex, float, int]:
    x = complex(seed)
    fx = characteristic(config, x)
    for it in range(1, max_iter + 1):
        if abs(fx) < tol:
            return x, abs(fx), it - 1
        dfx = characteristic_derivative(config, x)
        if dfx == 0:
            raise NonConvergence(f"vanishing derivative at {x}")
        step = -fx / dfx
        # halve the step while it fails to reduce the residual
        for _ in range(60):
            x_new = x + step
            f_new = characteristic(config, x_new)
            if abs(f_new) <= abs(fx) or abs(step) < 1e-16 * max(1.0, abs(x)):
                break
            step *= 0.5
        x, fx = x_new, f_new
    if abs(fx) < tol:
        return x, abs(fx), max_iter
    raise NonConvergence(
        f"no root from seed {seed} after {max_iter} iterations (|chi|={abs(fx):.2e})")


def _classify(config: SystemConfig, delta: complex) -> int:
    s = -1j * delta
    dp = abs(analytic.laplace_denominator(config, +1, s))
    dm = abs(analytic.laplace_denominator(config, -1, s))
    return +1 if dp <= dm else -1


def nonmarkovian_poles(config: SystemConfig, seeds=None, tol: float = 1e-10,
                       max_iter: int = 200,
                       search_grid: bool = False) -> list[Pole]:
    """Find decay poles of the full retarded problem by damped Newton.

    Args:
        config: two-leg system.
        seeds: complex detuning seeds; defaults to the two Markovian poles
            delta = Gamma_M/(2i).
        tol: residual target on |characteristic|.
        max_iter: Newton iteration cap (damped steps count once).
        search_grid: additionally seed a coarse grid over
            Im(delta)/gamma in [-10, 0] to pick up further roots.

    Returns:
        Poles with duplicates (|delta_i - delta_j| < 1e-8*gamma) collapsed,
        in seed order.
    """
    if seeds is None:
        gp, gm = markovian_rates(config)
        seeds = [gp / 2j, gm / 2j]
    seeds = list(seeds)
    if search_grid:
        g = config.gamma
        seeds += [complex(re, im) * g
                  for im in np.linspace(-10.0, 0.0, 11)
                  for re in np.linspace(-8.0, 8.0, 9)]
    poles: list[Pole] = []
    for seed in seeds:
        try:
            root, res, its = _newton(config, seed, tol, max_iter)
        except NonConvergence:
            if search_grid:
                continue
            raise
        if any(abs(root - p.delta) < 1e-8 * config.gamma for p in poles):
            continue  # duplicate root, keep the first
        poles.append(Pole(delta=root, rate=2j * root,
                          parity=_classify(config, root),
                          residual=res, iterations=its))
    return poles


@dataclass(frozen=True)
class DecayRateScan:
    """Collective rates versus the leg separation phase omega0*dx/pi."""

    omega0_dx_over_pi: np.ndarray
    rate_plus: np.ndarray        # complex non-Markovian Gamma_+
    rate_minus: np.ndarray
    markov_plus: np.ndarray      # complex Markovian Gamma_+,M
    markov_minus: np.ndarray
    residual_plus: np.ndarray
    residual_minus: np.ndarray
    topology: str
    omega0: float
    gamma: float

    def peak(self) -> tuple[float, float]:
        """(omega0_dx/pi at peak, peak Re rate) over both parity branches."""
        re_all = np.maximum(self.rate_plus.real, self.rate_minus.real)
        i = int(np.argmax(re_all))
        return float(self.omega0_dx_over_pi[i]), float(re_all[i])

    def to_csv(self, path) -> None:
        lines = ["# giantqed collective decay rate scan",
                 f"# topology = {self.topology}",
                 f"# omega0 = {self.omega0!r}",
                 f"# gamma = {self.gamma!r}",
                 "omega0_dx_over_pi,re_g_plus_nm,im_g_plus_nm,re_g_minus_nm,"
                 "im_g_minus_nm,re_g_plus_m,re_g_minus_m,residual_plus,residual_minus"]
        cols = zip(self.omega0_dx_over_pi.tolist(), self.rate_plus.tolist(),
                   self.rate_minus.tolist(), self.markov_plus.tolist(),
                   self.markov_minus.tolist(), self.residual_plus.tolist(),
                   self.residual_minus.tolist())
        for x, gp, gm, mp, mm, rp, rm in cols:
            lines.append(
                f"{x!r},{gp.real!r},{gp.imag!r},{gm.real!r},{gm.imag!r},"
                f"{mp.real!r},{mm.real!r},{rp!r},{rm!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _newton_reduced(config: SystemConfig, parity: int, seed_s: complex,
                    tol: float, max_iter: int = 100) -> complex | None:
    """Newton root of the parity-reduced Laplace denominator D_p(s).

    Working per parity keeps a continuation tracker from hopping onto the
    other parity family.  Returns None instead of raising on failure.
    """
    s = complex(seed_s)
    f = analytic.laplace_denominator(config, parity, s)
    for _ in range(max_iter):
        if abs(f) < tol:
            return s
        df = analytic.laplace_denominator_derivative(config, parity, s)
        if df == 0:
            return None
        step = -f / df
        for _ in range(60):
            s_new = s + step
            f_new = analytic.laplace_denominator(config, parity, s_new)
            if abs(f_new) <= abs(f) or abs(step) < 1e-16 * max(1.0, abs(s)):
                break
            step *= 0.5
        s, f = s_new, f_new
    return s if abs(f) < tol else None


def connected_pole(config: SystemConfig, parity: int,
                   tol: float = 1e-12) -> complex:
    """The decay pole continuously connected to the Markovian one.

    Ramps the retardation up from zero at fixed phase phi: at each ramp
    step Newton re-converges the root of the parity-reduced Laplace
    denominator from the previous one, subdividing the ramp adaptively
    when the root moves fast.  Returns the pole position s (rate = -2s).
    Continuation along other parameter paths can land on a different
    sheet, so the ramp in retardation *is* the definition used here.
    """
    phi = config.phi
    eta_t = config.delay * config.gamma
    if eta_t == 0:
        parity_idx = 0 if parity > 0 else 1
        return -markovian_rates(config)[parity_idx] / 2.0
    tol = tol * config.gamma

    def cfg_at(eta: float) -> SystemConfig:
        delay = eta / config.gamma
        return SystemConfig(topology=config.topology, gamma=config.gamma,
                            delay=delay, omega0=phi / delay, v_g=config.v_g,
                            n_legs=config.n_legs)

    def advance(eta0: float, s0: complex, eta1: float, depth: int = 0) -> complex:
        root = _newton_reduced(cfg_at(eta1), parity, s0, tol)
        if root is not None and abs(root - s0) <= 0.3 * (config.gamma + abs(s0)):
            return root
        if depth >= 24:
            if root is not None:
                return root
            raise NonConvergence(
                f"lost parity {parity:+d} branch at eta={eta1:.6f}")
        mid = 0.5 * (eta0 + eta1)
        s_mid = advance(eta0, s0, mid, depth + 1)
        return advance(mid, s_mid, eta1, depth + 1)

    gp, gm = markovian_rates(cfg_at(eta_t))  # phi-dependent only, eta-free
    s = -(gp if parity > 0 else gm) / 2.0
    n_coarse = 16
    eta_prev = 0.0
    for k in range(1, n_coarse + 1):
        eta_next = eta_t * k / n_coarse
        s = advance(eta_prev, s, eta_next)
        eta_prev = eta_next
    return s


def scan_decay_rates(topology: str, n_points: int = 600, x_max: float = 3.0,
                     omega0: float = 50.0, gamma: float = 1.0,
                     v_g: float = 1.0, x_min: float | None = None) -> DecayRateScan:
    """Both parity poles over x = omega0*dx/pi in (0, x_max].

    omega0 is held fixed (default 50*gamma) while the leg spacing dx
    varies, so the retardation eta = pi*x*gamma/omega0 grows along the
    scan.  Each point reports the pole connected to the Markovian one
    (see ``connected_pole``); the previous point's root primes the ramp's
    final Newton solve as a cheap consistency cross-check via the
    characteristic residual column.  ``x_min`` defaults to one grid step.
    """
    if x_min is None:
        x_min = x_max / n_points
    if not 0 < x_min <= x_max:
        raise ValueError("need 0 < x_min <= x_max")
    xs = np.linspace(x_min, x_max, n_points)
    out = {name: np.empty(n_points, dtype=complex) for name in
           ("rate_plus", "rate_minus", "markov_plus", "markov_minus")}
    res = {+1: np.empty(n_points), -1: np.empty(n_points)}
    for i, x in enumerate(xs):
        cfg = SystemConfig(topology=topology, gamma=gamma,
                           delay=x * math.pi / omega0, omega0=omega0, v_g=v_g)
        gp, gm = markovian_rates(cfg)
        out["markov_plus"][i] = gp
        out["markov_minus"][i] = gm
        for parity, key in ((+1, "rate_plus"), (-1, "rate_minus")):
            root = connected_pole(cfg, parity)
            out[key][i] = -2.0 * root            # Gamma = -2 s
            res[parity][i] = abs(characteristic(cfg, 1j * root))
    return DecayRateScan(omega0_dx_over_pi=xs,
                         rate_plus=out["rate_plus"], rate_minus=out["rate_minus"],
                         markov_plus=out["markov_plus"], markov_minus=out["markov_minus"],
                         residual_plus=res[+1], residual_minus=res[-1],
                         topology=topology, omega0=omega0, gamma=gamma)
