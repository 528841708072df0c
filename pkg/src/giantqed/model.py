"""Physical description of two multi-leg emitters coupled to a linear waveguide.

Two identical two-level emitters ("atom a" and "atom b") attach to a 1D
waveguide at several coupling legs each.  Adjacent legs are separated by a
fixed propagation delay ``delay`` (time for light to travel between
neighbouring coupling points), and the two atoms' legs are interleaved in one
of two ways:

* ``"separate"`` -- all of atom a's legs sit to the left of all of atom b's
  (ordering a1 a2 ... b1 b2 ...),
* ``"braided"``  -- the legs alternate (a1 b1 a2 b2 ...).

Everything downstream (delay equations, spectra, bound states, emitted
fields) is parameterised by the dimensionless retardation ``eta = gamma*delay``
and the propagation phase ``phi = omega0*delay`` accumulated between legs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

TOPOLOGIES = ("separate", "braided")

#: Error budget for "is this phase an exact multiple of pi" decisions.
PHASE_TOL = 1e-9


@dataclass(frozen=True)
class SystemConfig:
    """Static parameters of the two-atom/waveguide system.

    Attributes:
        topology: leg interleaving, ``"separate"`` or ``"braided"``.
        gamma: per-leg emission rate into the waveguide (both directions).
        delay: propagation time between adjacent coupling legs.
        omega0: atomic transition frequency.
        n_legs: number of coupling legs per atom (N >= 1).
        v_g: group velocity in the waveguide.
    """

    topology: str
    gamma: float = 1.0
    delay: float = 1.0
    omega0: float = 0.0
    n_legs: int = 2
    v_g: float = 1.0

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")
        if self.n_legs < 1:
            raise ValueError("n_legs must be at least 1")
        if self.v_g <= 0:
            raise ValueError("v_g must be positive")

    # -- derived quantities -------------------------------------------------

    @property
    def eta(self) -> float:
        """Dimensionless retardation gamma*delay."""
        return self.gamma * self.delay

    @property
    def phi(self) -> float:
        """Propagation phase omega0*delay between adjacent legs."""
        return self.omega0 * self.delay

    @property
    def k0(self) -> float:
        """Resonant wavenumber omega0/v_g."""
        return self.omega0 / self.v_g

    @property
    def spacing(self) -> float:
        """Distance d = v_g*delay between adjacent legs."""
        return self.v_g * self.delay

    @property
    def max_delay_steps(self) -> int:
        """Largest leg-to-leg separation in units of ``delay``."""
        return 2 * self.n_legs - 1

    @classmethod
    def from_phase(cls, topology: str, eta: float, phi: float, *,
                   gamma: float = 1.0, v_g: float = 1.0,
                   n_legs: int = 2) -> "SystemConfig":
        """Build a config from (eta, phi) by back-solving delay and omega0.

        ``delay = eta/gamma`` and ``omega0 = phi/delay``; handy when a target
        phase (e.g. exactly 2*pi) matters more than the raw frequency.
        """
        if eta <= 0:
            raise ValueError("from_phase requires eta > 0 (use delay=0 directly otherwise)")
        delay = eta / gamma
        return cls(topology=topology, gamma=gamma, delay=delay,
                   omega0=phi / delay, n_legs=n_legs, v_g=v_g)

    # -- geometry -----------------------------------------------------------

    def leg_slots(self, atom: int) -> tuple[int, ...]:
        """Integer slot indices (0..2N-1, left to right) occupied by one atom.

        ``atom`` is 0 for atom a, 1 for atom b.
        """
        if atom not in (0, 1):
            raise ValueError("atom must be 0 (a) or 1 (b)")
        n = self.n_legs
        if self.topology == "separate":
            return tuple(range(atom * n, atom * n + n))
        return tuple(range(atom, 2 * n, 2))

    def leg_positions(self, atom: int) -> tuple[float, ...]:
        """Physical leg coordinates of one atom, centred so x=0 is mid-array."""
        half = (2 * self.n_legs - 1) / 2.0
        d = self.spacing
        return tuple((s - half) * d for s in self.leg_slots(atom))

    def phase_class(self) -> int | None:
        """Classify phi against multiples of pi: 0 (even), 1 (odd) or None.

        Returns 0 when phi is an even multiple of pi, 1 when odd, None when
        phi is not a multiple of pi (within PHASE_TOL of a multiple).
        """
        m = self.phi / math.pi
        n = round(m)
        if abs(m - n) > PHASE_TOL:
            return None
        return n % 2

    def summary_lines(self) -> list[str]:
        """Config echo used in CSV headers, one 'key = value' string each."""
        return [
            f"topology = {self.topology}",
            f"gamma = {self.gamma!r}",
            f"delay = {self.delay!r}",
            f"omega0 = {self.omega0!r}",
            f"n_legs = {self.n_legs}",
            f"v_g = {self.v_g!r}",
            f"eta = {self.eta!r}",
            f"phi = {self.phi!r}",
        ]


@dataclass(frozen=True)
class InitialState:
    """Single-excitation atomic state (c_a, c_b) at t=0 with no photons."""

    c_a: complex
    c_b: complex

    def __post_init__(self):
        if self.norm() > 1.0 + 1e-9:
            raise ValueError("initial amplitudes exceed unit norm")

    def norm(self) -> float:
        return abs(self.c_a) ** 2 + abs(self.c_b) ** 2

    @classmethod
    def symmetric(cls) -> "InitialState":
        s = 1.0 / math.sqrt(2.0)
        return cls(s, s)

    @classmethod
    def antisymmetric(cls) -> "InitialState":
        s = 1.0 / math.sqrt(2.0)
        return cls(s, -s)

    @property
    def parity(self) -> int | None:
        """+1 (symmetric), -1 (antisymmetric) or None for anything else."""
        if cmath.isclose(self.c_a, self.c_b, abs_tol=1e-12):
            return +1
        if cmath.isclose(self.c_a, -self.c_b, abs_tol=1e-12):
            return -1
        return None


@dataclass(frozen=True)
class DelayTable:
    """Retarded coupling coefficients of the amplitude equations.

    The excited amplitudes obey (interaction picture, Theta = unit step)

        dc_a/dt = -sum_n self_terms[n]  * c_a(t - n*delay) * Theta(t - n*delay)
                  -sum_n cross_terms[n] * c_b(t - n*delay) * Theta(t - n*delay)

    and the same with a<->b swapped.  Keys are delays in units of ``delay``;
    values carry the propagation phase exp(i*n*phi).  The instantaneous term
    is self_terms[0] = N*gamma/2.
    """

    self_terms: dict[int, complex]
    cross_terms: dict[int, complex]

    @property
    def max_step(self) -> int:
        return max([*self.self_terms, *self.cross_terms])

    def collective(self, parity: int) -> dict[int, complex]:
        """Coefficients A_n of the parity-reduced scalar equation.

        For c_b = parity * c_a the pair of equations collapses to
        dc/dt = -sum_n A_n c(t - n*delay) with A_n = self_n + parity*cross_n.
        """
        if parity not in (+1, -1):
            raise ValueError("parity must be +1 or -1")
        out: dict[int, complex] = {}
        for n, v in self.self_terms.items():
            out[n] = out.get(n, 0.0) + v
        for n, v in self.cross_terms.items():
            out[n] = out.get(n, 0.0) + parity * v
        return {n: out[n] for n in sorted(out)}


def delay_table(config: SystemConfig) -> DelayTable:
    """Count retarded leg pairs to build the DelayTable for ``config``.

    Every ordered pair of legs (one on the receiving atom, one on the
    emitting atom) separated by n slots contributes (gamma/2) exp(i*n*phi)
    at delay n.  Working with integer slot indices keeps the delays exact.
    """
    slots_a = config.leg_slots(0)
    slots_b = config.leg_slots(1)
    phi = config.phi
    half = 0.5 * config.gamma

    def tally(src: tuple[int, ...]) -> dict[int, complex]:
        counts: dict[int, int] = {}
        for i in slots_a:
            for j in src:
                n = abs(i - j)
                counts[n] = counts.get(n, 0) + 1
        return {n: counts[n] * half * cmath.exp(1j * n * phi)
                for n in sorted(counts)}

    return DelayTable(self_terms=tally(slots_a), cross_terms=tally(slots_b))
