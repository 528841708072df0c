"""End-to-end checks of the command-line front end.

Everything goes through ``main(argv)`` in-process so exit codes, stdout
lines and written artifacts are all visible to assertions.
"""

import json
import math
import os

import pytest

from giantqed.cli import (EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, UsageError,
                          main, parse_angle)


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("GIANTQED_"):
            monkeypatch.delenv(key)


def _line_value(out: str, prefix: str) -> str:
    for line in out.splitlines():
        if line.startswith(prefix):
            return line[len(prefix):]
    raise AssertionError(f"no line starting with {prefix!r} in:\n{out}")


def test_parse_angle():
    assert parse_angle("2pi") == 2 * math.pi
    assert parse_angle("-pi") == -math.pi
    assert parse_angle("0.5pi") == 0.5 * math.pi
    assert parse_angle(" 0.5 * pi ") == 0.5 * math.pi
    assert parse_angle("3.25") == 3.25
    with pytest.raises(UsageError):
        parse_angle("two pi")


def test_simulate_both_engines_agree(tmp_path, capsys):
    rc = main(["simulate", "--engine", "both", "--topology", "braided",
               "--eta", "0.15", "--phi", "0.4pi", "--state", "antisymmetric",
               "--t-max", "2", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert (tmp_path / "trajectory.csv").exists()
    assert (tmp_path / "trajectory_analytic.csv").exists()
    assert (tmp_path / "simulate_manifest.txt").exists()
    diff = float(_line_value(out, "max_abs_diff = "))
    assert diff < 1e-6


def test_simulate_dicke_limit_rate(tmp_path, capsys):
    """eta = 0 collapses to the instantaneous model: the symmetric state
    decays at exactly 4 * N * gamma / 2 = 8 gamma for four legs."""
    rc = main(["simulate", "--eta", "0", "--phi", "0", "--state", "symmetric",
               "--t-max", "3", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    rate = float(_line_value(capsys.readouterr().out, "fit_rate = "))
    assert rate == pytest.approx(8.0, abs=1e-6)


def test_simulate_missing_config_file(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "absent.ini")])
    assert rc == EXIT_USAGE
    assert "config file not found" in capsys.readouterr().err


def test_geometry_parameterizations_are_exclusive(tmp_path, capsys):
    rc = main(["simulate", "--eta", "0.2", "--omega0", "31.4",
               "--out", str(tmp_path)])
    assert rc == EXIT_USAGE
    assert "not a mix" in capsys.readouterr().err


def test_unknown_ini_key_is_rejected(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[system]\netta = 0.2\n")
    rc = main(["simulate", "--config", str(cfg)])
    assert rc == EXIT_USAGE
    assert "unknown key 'etta'" in capsys.readouterr().err


def test_layering_file_env_flags(tmp_path, capsys, monkeypatch):
    """Config file < environment < flags, each layer visible in the manifest."""
    cfg = tmp_path / "run.ini"
    cfg.write_text("[system]\ntopology = braided\neta = 0.25\nphi = pi\n"
                   f"[run]\nout = {tmp_path}\n")
    monkeypatch.setenv("GIANTQED_PHI", "3pi")
    rc = main(["simulate", "--config", str(cfg), "--topology", "separate",
               "--t-max", "1"])
    assert rc == EXIT_OK
    manifest = (tmp_path / "simulate_manifest.txt").read_text()
    assert "topology = separate" in manifest          # flag beat the file
    assert float(_line_value(manifest, "phi = ")) == pytest.approx(
        3 * math.pi, rel=1e-12)                       # env beat the file
    assert float(_line_value(manifest, "eta = ")) == pytest.approx(0.25)


def test_reruns_are_byte_identical(tmp_path):
    argv = ["simulate", "--topology", "separate", "--eta", "0.2",
            "--phi", "2pi", "--state", "antisymmetric", "--t-max", "2"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == \
        (b / "trajectory.csv").read_bytes()


def test_decay_rates_scan(tmp_path, capsys):
    rc = main(["decay-rates", "--topology", "braided",
               "--scan", "0.9:1.1:0.05", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    body = [line for line in
            (tmp_path / "decay_rates.csv").read_text().splitlines()
            if line and not line.startswith("#")]
    assert body[0].startswith("omega0_dx_over_pi,")
    assert len(body) == 1 + 5
    x_peak = float(_line_value(out, "peak: x = ").split(",")[0])
    assert 0.9 <= x_peak <= 1.1
    assert (tmp_path / "decay_rates_manifest.txt").exists()


def test_decay_rates_bad_scan_spec(tmp_path, capsys):
    rc = main(["decay-rates", "--scan", "1:2", "--out", str(tmp_path)])
    assert rc == EXIT_USAGE
    assert "start:stop:step" in capsys.readouterr().err


def test_bic_report_when_bound_state_exists(tmp_path, capsys):
    rc = main(["bic", "--topology", "braided", "--eta", "0.2",
               "--phi", "2pi", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "BIC exists" in out
    report = json.loads((tmp_path / "bic_report.ndjson").read_text())
    assert report["exists"] is True
    assert report["atomic_weight"] == pytest.approx(1 / 1.2, rel=1e-12)
    assert report["field_weight"] == pytest.approx(0.2 / 1.2, rel=1e-12)
    assert report["field_norm_quadrature"] == pytest.approx(
        report["field_weight"], abs=1e-5)
    assert report["overlap_symmetric"] == pytest.approx(0.0, abs=1e-15)
    assert (tmp_path / "bic_profile.csv").exists()


def test_bic_report_when_none_exists(tmp_path, capsys):
    rc = main(["bic", "--topology", "braided", "--eta", "0.2",
               "--phi", "3pi", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    assert "NoBic" in capsys.readouterr().out
    report = json.loads((tmp_path / "bic_report.ndjson").read_text())
    assert report["exists"] is False
    assert not (tmp_path / "bic_profile.csv").exists()


def test_fdd_map_and_trapping_metric(tmp_path, capsys):
    rc = main(["fdd", "--topology", "separate", "--eta", "0.2",
               "--phi", "2pi", "--state", "antisymmetric", "--t-max", "6",
               "--nx", "81", "--nt", "13", "--out", str(tmp_path)])
    assert rc == EXIT_OK
    metric = float(_line_value(capsys.readouterr().out,
                               "interior_trapping = "))
    # dark configuration: the late interior still holds an O(1) fraction
    # of the brightest transient
    assert metric > 0.01
    body = [line for line in (tmp_path / "fdd.csv").read_text().splitlines()
            if line and not line.startswith("#")]
    assert len(body) == 1 + 81 * 13


def test_detect_switch_flags_must_pair(tmp_path, capsys):
    rc = main(["detect", "--eta", "0.2", "--phi", "2pi",
               "--switch-at", "5", "--out", str(tmp_path)])
    assert rc == EXIT_USAGE
    assert "--phi-after" in capsys.readouterr().err


def test_detect_with_drive_switch(tmp_path, capsys):
    rc = main(["detect", "--topology", "separate", "--eta", "0.2",
               "--phi", "2pi", "--state", "antisymmetric",
               "--t-max", "12", "--switch-at", "6", "--phi-after", "2.5pi",
               "--n-points", "801", "--steps-per-delay", "50",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    released = float(_line_value(out, "released_both_directions = "))
    quiet = float(_line_value(out, "pre_switch_max_intensity = "))
    assert released > 1e-3            # the stored excitation leaks out
    assert quiet < 1e-6               # ... and nothing leaked before
    assert (tmp_path / "detector.csv").exists()


def test_version_banner(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("giantqed ")
