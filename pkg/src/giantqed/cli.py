"""Command-line front end.

Five subcommands map onto the compute modules::

    simulate     amplitude dynamics (dde / exact series / both)
    decay-rates  complex collective decay rates vs leg spacing
    fdd          space-time map of the emitted field intensity
    bic          bound-state-in-the-continuum report
    detect       detector signal, including drive-switch re-release

System parameters resolve in order: built-in defaults, then an INI config
file (``--config``, sections ``[system]`` and ``[run]``), then environment
variables prefixed ``GIANTQED_`` (e.g. ``GIANTQED_ETA``), then explicit
flags.  Geometry is given either as the dimensionless pair ``--eta/--phi``
or as the physical pair ``--omega0/--dx``; mixing the two is a usage
error.  Angles accept multiples of pi ("2pi", "0.5pi").

All artifacts are plain CSV (and NDJSON for the bic report) with
config-echo comment headers; identical parameters produce byte-identical
files.  SVG plots are optional conveniences behind ``--svg``.  Exit codes:
0 success, 2 usage/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytic import OutOfHorizon, exact_solution
from .bic import bic_field_profile, bic_state, field_norm, overlap_with_initial
from .dde import DriveSchedule, integrate_with_drive, to_csv as traj_to_csv
from .field import detector_signal, fdd as compute_fdd, released_energy
from .model import InitialState, SystemConfig
from .spectral import NonConvergence, scan_decay_rates

ENV_PREFIX = "GIANTQED_"
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

_SYSTEM_KEYS = ("topology", "eta", "phi", "omega0", "dx", "gamma", "v_g")
_RUN_KEYS = ("state", "engine", "out")
_ANGLE_KEYS = {"phi", "phi_after"}


class UsageError(Exception):
    """Bad flags/config-file input; maps to exit code 2."""


def parse_angle(text: str) -> float:
    """Float parser that also accepts '2pi', '-pi', '0.5pi'."""
    s = str(text).strip().lower().replace(" ", "").replace("*", "")
    if s.endswith("pi"):
        head = s[:-2]
        if head in ("", "+", "-"):
            head += "1"
        try:
            return float(head) * math.pi
        except ValueError:
            raise UsageError(f"cannot parse angle {text!r}") from None
    try:
        return float(s)
    except ValueError:
        raise UsageError(f"cannot parse angle {text!r}") from None


# ---------------------------------------------------------------------------
# parameter resolution
# ---------------------------------------------------------------------------

def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from None
    known = {"system": _SYSTEM_KEYS, "run": _RUN_KEYS}
    out: dict = {}
    for section in parser.sections():
        if section not in known:
            raise UsageError(f"unknown config section [{section}]")
        for key, value in parser.items(section):
            if key not in known[section]:
                raise UsageError(f"unknown key '{key}' in [{section}]")
            out[key] = value
    return out


def _env_overrides() -> dict:
    out = {}
    for key in _SYSTEM_KEYS + _RUN_KEYS:
        value = os.environ.get(ENV_PREFIX + key.upper())
        if value is not None:
            out[key] = value
    return out


def resolve_params(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < environment < explicit flags.

    Returns a dict whose values are still strings when they came from the
    file/environment; ``build_config`` does the typed conversion.  A key
    is present only if some layer actually set it.
    """
    merged: dict = {}
    if getattr(args, "config", None):
        merged.update(_read_config_file(args.config))
    merged.update(_env_overrides())
    for key in _SYSTEM_KEYS + _RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def build_config(params: dict, default_omega0: float | None = None) -> SystemConfig:
    """Typed SystemConfig from the merged parameter dict.

    The (eta, phi) and (omega0, dx) parameterizations are mutually
    exclusive.  ``default_omega0`` lets scan-style commands default the
    frequency without tripping the conflict rule.
    """
    def as_float(key):
        value = params[key]
        if key in _ANGLE_KEYS:
            return parse_angle(value)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise UsageError(f"cannot parse --{key} value {value!r}") from None

    topology = str(params.get("topology", "separate"))
    if topology not in ("separate", "braided"):
        raise UsageError(f"unknown topology {topology!r}")
    gamma = as_float("gamma") if "gamma" in params else 1.0
    v_g = as_float("v_g") if "v_g" in params else 1.0

    has_phase = "eta" in params or "phi" in params
    has_physical = "omega0" in params or "dx" in params
    if has_phase and has_physical:
        raise UsageError("give either (--eta, --phi) or (--omega0, --dx), "
                         "not a mix")
    try:
        if has_physical:
            if not ("omega0" in params and "dx" in params):
                raise UsageError("--omega0 and --dx must be given together")
            dx = as_float("dx")
            return SystemConfig(topology=topology, gamma=gamma,
                                delay=dx / v_g, omega0=as_float("omega0"),
                                v_g=v_g)
        eta = as_float("eta") if "eta" in params else 0.2
        phi = as_float("phi") if "phi" in params else 0.0
        if eta == 0.0:
            if phi != 0.0:
                raise UsageError("eta = 0 (no retardation) requires phi = 0")
            omega0 = default_omega0 if default_omega0 is not None else 0.0
            return SystemConfig(topology=topology, gamma=gamma, delay=0.0,
                                omega0=omega0, v_g=v_g)
        return SystemConfig.from_phase(topology, eta, phi, gamma=gamma,
                                       v_g=v_g)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_state(params: dict) -> InitialState:
    name = str(params.get("state", "symmetric")).lower()
    if name in ("symmetric", "sym", "+"):
        return InitialState.symmetric()
    if name in ("antisymmetric", "antisym", "asym", "-"):
        return InitialState.antisymmetric()
    raise UsageError(f"unknown state {name!r} "
                     "(use symmetric or antisymmetric)")


# ---------------------------------------------------------------------------
# run manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    """What a run was: subcommand, resolved config, destination, version."""

    command: str
    config: SystemConfig
    out_dir: str
    deterministic: bool = True
    version: str = __version__

    def lines(self) -> list[str]:
        out = ["# giantqed run manifest",
               f"command = {self.command}",
               f"version = {self.version}",
               f"deterministic = {str(self.deterministic).lower()}",
               f"out_dir = {self.out_dir}"]
        out += self.config.summary_lines()
        return out

    def write(self) -> None:
        name = f"{self.command.replace('-', '_')}_manifest.txt"
        with open(os.path.join(self.out_dir, name), "w") as fh:
            fh.write("\n".join(self.lines()) + "\n")


def _prepare_out(params: dict) -> str:
    out_dir = str(params.get("out", "."))
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _fit_rate(t: np.ndarray, population: np.ndarray) -> float | None:
    """Least-squares exponential rate of a population record, or None."""
    mask = population > 1e-12
    if mask.sum() < 3:
        return None
    slope = np.polyfit(t[mask], np.log(population[mask]), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    config = build_config(params)
    state = build_state(params)
    engine = str(params.get("engine", "dde"))
    if engine not in ("dde", "analytic", "both"):
        raise UsageError(f"unknown engine {engine!r}")
    if engine in ("analytic", "both") and config.delay == 0.0:
        raise UsageError("the analytic engine needs eta > 0")
    out_dir = _prepare_out(params)
    t_max = args.t_max * (1.0 / config.gamma)

    schedule = DriveSchedule((0.0,), (config.omega0,))
    traj = None
    if engine in ("dde", "both"):
        traj = integrate_with_drive(config, state, t_max, schedule,
                                    steps_per_delay=args.steps_per_delay)
        traj_to_csv(traj, os.path.join(out_dir, "trajectory.csv"))
        print(f"wrote {os.path.join(out_dir, 'trajectory.csv')}")
    if engine in ("analytic", "both"):
        sol = exact_solution(config, state, t_max=t_max * (1 + 1e-9))
        if traj is not None:
            ts = traj.t
        else:
            n = max(int(round(t_max * args.steps_per_delay
                              / max(config.delay, 1.0 / config.gamma))), 200)
            ts = np.linspace(0.0, t_max, n + 1)
        c_a, c_b = sol.atomic(np.minimum(ts, sol.horizon - 1e-9 * config.delay))
        name = os.path.join(out_dir, "trajectory_analytic.csv")
        lines = ["# giantqed amplitude trajectory (exact series)"]
        lines += [f"# {s}" for s in config.summary_lines()]
        lines.append("t,re_ca,im_ca,re_cb,im_cb,pop_a,pop_b")
        for k in range(len(ts)):
            lines.append(f"{ts[k]!r},{c_a[k].real!r},{c_a[k].imag!r},"
                         f"{c_b[k].real!r},{c_b[k].imag!r},"
                         f"{abs(c_a[k]) ** 2!r},{abs(c_b[k]) ** 2!r}")
        with open(name, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {name}")
        if traj is not None:
            diff = float(np.max(np.abs(np.abs(c_a) ** 2 - traj.pop_a)))
            print(f"max_abs_diff = {diff!r}")

    record = traj if traj is not None else None
    if record is not None:
        rate = _fit_rate(record.t, record.excited_population)
    else:
        rate = _fit_rate(ts, np.abs(c_a) ** 2 + np.abs(c_b) ** 2)
    if rate is not None:
        print(f"fit_rate = {rate!r}")

    if args.svg:
        _plot_trajectory(record, ts if record is None else record.t,
                         out_dir, config)
    RunManifest("simulate", config, out_dir).write()
    return EXIT_OK


def _plot_trajectory(traj, ts, out_dir, config) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise UsageError("--svg requires matplotlib (install the 'svg' extra)")
    fig, ax = plt.subplots()
    if traj is not None:
        ax.plot(traj.t, traj.excited_population, label="|c_a|^2 + |c_b|^2")
    ax.set_xlabel("t")
    ax.set_ylabel("excited population")
    ax.set_title(f"{config.topology}, eta={config.eta:g}, phi={config.phi:g}")
    ax.legend()
    path = os.path.join(out_dir, "trajectory.svg")
    fig.savefig(path, format="svg")
    plt.close(fig)
    print(f"wrote {path}")


def _parse_scan(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"--scan expects start:stop:step, got {text!r}") from None
    if not (lo > 0 and hi > lo and step > 0):
        raise UsageError("--scan needs 0 < start < stop and step > 0")
    n = int(round((hi - lo) / step)) + 1
    return lo, hi, n


def cmd_decay_rates(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    topology = str(params.get("topology", "separate"))
    if topology not in ("separate", "braided"):
        raise UsageError(f"unknown topology {topology!r}")
    gamma = float(params.get("gamma", 1.0))
    v_g = float(params.get("v_g", 1.0))
    omega0 = float(params.get("omega0", 50.0))
    lo, hi, n = _parse_scan(args.scan)
    out_dir = _prepare_out(params)

    scan = scan_decay_rates(topology, n_points=n, x_max=hi, x_min=lo,
                            omega0=omega0, gamma=gamma, v_g=v_g)
    path = os.path.join(out_dir, "decay_rates.csv")
    scan.to_csv(path)
    print(f"wrote {path}")
    x_peak, peak = scan.peak()
    print(f"peak: x = {x_peak!r}, max_re_rate = {peak!r}")
    cfg = SystemConfig(topology=topology, gamma=gamma,
                       delay=x_peak * math.pi / omega0, omega0=omega0, v_g=v_g)
    RunManifest("decay-rates", cfg, out_dir).write()
    return EXIT_OK


def cmd_fdd(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    config = build_config(params)
    if config.delay == 0.0:
        raise UsageError("fdd needs eta > 0 (finite leg spacing)")
    state = build_state(params)
    out_dir = _prepare_out(params)
    t_max = args.t_max / config.gamma
    span = args.x_span if args.x_span is not None else \
        1.5 * config.spacing + config.v_g * t_max
    x_grid = np.linspace(-span, span, args.nx)
    t_grid = np.linspace(0.0, t_max, args.nt)

    sol = exact_solution(config, state, t_max=t_max * (1 + 1e-9) + config.delay)
    grid = compute_fdd(sol, config, state.parity, x_grid, t_grid)
    path = os.path.join(out_dir, "fdd.csv")
    grid.to_csv(path)
    print(f"wrote {path}")

    interior = np.abs(x_grid) <= 1.5 * config.spacing
    late = grid.intensity[-1, interior].max() if interior.any() else 0.0
    metric = float(late / max(grid.intensity.max(), 1e-300))
    print(f"interior_trapping = {metric!r}")

    if args.svg:
        spath = os.path.join(out_dir, "fdd.svg")
        try:
            grid.to_svg(spath)
        except RuntimeError as exc:
            raise UsageError(str(exc))
        print(f"wrote {spath}")
    RunManifest("fdd", config, out_dir).write()
    return EXIT_OK


def cmd_bic(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    config = build_config(params)
    if config.delay == 0.0:
        raise UsageError("bic needs eta > 0 (finite leg spacing)")
    out_dir = _prepare_out(params)
    bound = bic_state(config)

    report: dict = {"topology": config.topology, "eta": config.eta,
                    "phi": config.phi, "exists": bool(bound)}
    if not bound:
        print(f"NoBic (topology {config.topology}, phi/pi = "
              f"{config.phi / math.pi!r})")
    else:
        norm = field_norm(bound)
        report.update({
            "phase_class": bound.phase_class,
            "epsilon1_sq": abs(bound.epsilon1) ** 2,
            "atomic_weight": bound.atomic_weight,
            "field_weight": bound.field_weight,
            "field_norm_quadrature": norm,
            "k0": bound.k0,
            "overlap_symmetric": overlap_with_initial(
                bound, InitialState.symmetric()),
            "overlap_antisymmetric": overlap_with_initial(
                bound, InitialState.antisymmetric()),
        })
        print(f"BIC exists: |eps1|^2 = {report['epsilon1_sq']!r}, "
              f"atomic weight = {report['atomic_weight']!r}, "
              f"field weight = {report['field_weight']!r}")
        print(f"field norm (quadrature) = {norm!r}")
        profile = bic_field_profile(bound)
        ppath = os.path.join(out_dir, "bic_profile.csv")
        profile.to_csv(ppath)
        print(f"wrote {ppath}")

    rpath = os.path.join(out_dir, "bic_report.ndjson")
    with open(rpath, "w") as fh:
        fh.write(json.dumps(report, sort_keys=True) + "\n")
    print(f"wrote {rpath}")
    RunManifest("bic", config, out_dir).write()
    return EXIT_OK


def cmd_detect(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    config = build_config(params)
    if config.delay == 0.0:
        raise UsageError("detect needs eta > 0 (finite leg spacing)")
    state = build_state(params)
    out_dir = _prepare_out(params)
    t_max = args.t_max / config.gamma

    if (args.switch_at is None) != (args.phi_after is None):
        raise UsageError("--switch-at and --phi-after must be given together")
    if args.switch_at is not None:
        t_s = args.switch_at / config.gamma
        if not 0.0 < t_s < t_max:
            raise UsageError("--switch-at must fall inside (0, t_max)")
        omega_after = parse_angle(args.phi_after) / config.delay
        schedule = DriveSchedule((0.0, t_s), (config.omega0, omega_after))
    else:
        schedule = DriveSchedule((0.0,), (config.omega0,))

    traj = integrate_with_drive(config, state, t_max, schedule,
                                steps_per_delay=args.steps_per_delay)
    t_bar = np.linspace(0.0, t_max, args.n_points)
    x0 = args.x0 if args.x0 is not None else config.spacing
    record = detector_signal(traj, config, x0, t_bar)
    path = os.path.join(out_dir, "detector.csv")
    record.to_csv(path)
    print(f"wrote {path}")

    if args.switch_at is not None:
        released = released_energy(record, (t_s, t_max))
        print(f"released_both_directions = {2 * released!r}")
        pre = (t_bar >= 0.5 * t_s) & (t_bar <= t_s)
        print(f"pre_switch_max_intensity = {float(record.intensity[pre].max())!r}")
    else:
        print(f"released_both_directions = {2 * released_energy(record)!r}")
    RunManifest("detect", config, out_dir).write()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser, geometry: bool = True) -> None:
    sub.add_argument("--config", help="INI config file ([system]/[run])")
    sub.add_argument("--out", help="output directory (default '.')")
    sub.add_argument("--topology", choices=("separate", "braided"))
    sub.add_argument("--gamma", type=float, help="per-leg decay rate")
    sub.add_argument("--v-g", dest="v_g", type=float, help="group velocity")
    if geometry:
        sub.add_argument("--eta", type=float,
                         help="retardation gamma*delay (pairs with --phi)")
        sub.add_argument("--phi", help="inter-leg phase, e.g. 2pi or 3.14")
        sub.add_argument("--omega0", type=float,
                         help="atomic frequency (pairs with --dx)")
        sub.add_argument("--dx", type=float, help="leg spacing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="giantqed",
        description="Two giant atoms coupled to a 1D waveguide: exact "
                    "non-Markovian dynamics, spectra, bound states and "
                    "emitted-field maps.")
    parser.add_argument("--version", action="version",
                        version=f"giantqed {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="amplitude dynamics")
    _add_common(sim)
    sim.add_argument("--state", help="symmetric | antisymmetric")
    sim.add_argument("--engine", help="dde | analytic | both")
    sim.add_argument("--t-max", type=float, default=10.0,
                     help="run length in units of 1/gamma (default 10)")
    sim.add_argument("--steps-per-delay", type=int, default=100)
    sim.add_argument("--svg", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    scan = subs.add_parser("decay-rates", help="collective decay-rate scan")
    _add_common(scan, geometry=False)
    scan.add_argument("--omega0", type=float,
                      help="fixed frequency of the scan (default 50)")
    scan.add_argument("--scan", default="0.005:3.0:0.005",
                      help="omega0*dx/pi grid as start:stop:step")
    scan.set_defaults(func=cmd_decay_rates)

    fd = subs.add_parser("fdd", help="emitted intensity map I(x, t)")
    _add_common(fd)
    fd.add_argument("--state", help="symmetric | antisymmetric")
    fd.add_argument("--t-max", type=float, default=8.0,
                    help="map length in units of 1/gamma (default 8)")
    fd.add_argument("--nx", type=int, default=481)
    fd.add_argument("--nt", type=int, default=121)
    fd.add_argument("--x-span", type=float,
                    help="half-width of the x grid (default: light cone)")
    fd.add_argument("--svg", action="store_true")
    fd.set_defaults(func=cmd_fdd)

    bi = subs.add_parser("bic", help="bound-state-in-the-continuum report")
    _add_common(bi)
    bi.set_defaults(func=cmd_bic)

    det = subs.add_parser("detect", help="detector signal / re-release")
    _add_common(det)
    det.add_argument("--state", help="symmetric | antisymmetric")
    det.add_argument("--x0", type=float,
                     help="detector offset past the last leg (default d)")
    det.add_argument("--t-max", type=float, default=85.0,
                     help="record length in units of 1/gamma (default 85)")
    det.add_argument("--switch-at", type=float,
                     help="drive switch time in units of 1/gamma")
    det.add_argument("--phi-after", help="inter-leg phase after the switch")
    det.add_argument("--n-points", type=int, default=8501)
    det.add_argument("--steps-per-delay", type=int, default=100)
    det.set_defaults(func=cmd_detect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, OutOfHorizon, FloatingPointError,
            ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
