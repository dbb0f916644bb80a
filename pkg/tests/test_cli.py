import csv
import math

import pytest

from phonon_berry.berry import circle_path
from phonon_berry.cli import main, parse_config
from phonon_berry.errors import ParseError, ValidationError


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_minimal_trace_config_fills_defaults():
    cfg = parse_config("[medium]\nkind = homogeneous\n", "trace")
    assert cfg["trace"]["hbar_scale"] == 1.0
    assert cfg["trace"]["rel_tol"] == 1e-9 and cfg["trace"]["abs_tol"] == 1e-12
    assert "[trace] hbar_scale = 1.0" in cfg.defaults_applied
    assert "[medium] kind = homogeneous" not in cfg.defaults_applied


def test_unknown_key_names_nearest():
    text = "[medium]\nkind = homogeneous\n[trace]\nhbar_scal = 0.5\n"
    with pytest.raises(ValidationError, match=r":4: unknown key 'hbar_scal'.*did you mean 'hbar_scale'"):
        parse_config(text, "trace", "cfg.ini")


def test_unknown_section_rejected():
    with pytest.raises(ValidationError, match=r"section \[noise\]"):
        parse_config("[noise]\nD = 1\n", "trace")


def test_resolution_floor():
    with pytest.raises(ValidationError, match="resolution floor"):
        parse_config("[noise]\nperiod = 10\ndt = 0.05\n", "noise-ensemble")


def test_malformed_text():
    with pytest.raises(ParseError):
        parse_config("kind = homogeneous\n", "trace")
    with pytest.raises(ValidationError, match="cannot parse"):
        parse_config("[trace]\nr0 = 1, 2\n", "trace")
    with pytest.raises(ValidationError, match="not one of"):
        parse_config("[medium]\nkind = prism\n", "trace")


def test_effective_config_round_trip():
    text = "[run]\nseed = 7\n[medium]\nkind = gaussian_lens\namplitude = 0.2\nwidth = 5\n[trace]\np0 = 1, 0.1, 0\n"
    cfg = parse_config(text, "trace")
    again = parse_config(cfg.to_ini(), "trace")
    assert again.sections == cfg.sections
    assert again.defaults_applied == []


def test_loop_phase_third_circle(tmp_path):
    circle_path(math.pi / 3, n=8192).to_csv(tmp_path / "loop.csv")
    cfg = write(tmp_path / "lp.ini", f"[path]\nsource = csv\ncsv = {tmp_path / 'loop.csv'}\n")
    out = tmp_path / "out"
    assert main(["loop-phase", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    with open(out / "phases.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["method"] for r in rows] == ["LineIntegral", "SolidAngle", "PolarizationTransport"]
    for r in rows:
        assert abs(math.remainder(float(r["gamma"]) - math.pi, 2 * math.pi)) < 1e-6


def test_trace_duct_gamma_per_revolution(tmp_path):
    cfg = write(tmp_path / "tr.ini",
                "[medium]\nkind = axial_duct\nkappa = 1\n[trace]\nhelix_radius = 1\np_mag = 100\nrevolutions = 2\n")
    out = tmp_path / "out"
    assert main(["trace", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    with open(out / "trajectory.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    cos_cone = [float(r["p_z"]) / math.sqrt(sum(float(r[k]) ** 2 for k in ("p_x", "p_y", "p_z"))) for r in rows]
    cos_cone = sum(cos_cone) / len(cos_cone)
    per_rev = float(rows[-1]["gamma"]) / 2
    assert abs(per_rev - 2 * math.pi * cos_cone) < 1e-6
    summary = (out / "summary.txt").read_text()
    assert "terminated: Completed" in summary


def test_noise_ensemble_is_byte_identical(tmp_path):
    cfg = write(tmp_path / "ne.ini", "[run]\nworkers = 2\n[noise]\nperiod = 10\nn = 300\ndump_raw = true\n")
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["noise-ensemble", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    for name in ("ensemble.txt", "delta_gamma.csv", "effective_config.ini"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    raw = (outs[0] / "delta_gamma.csv").read_text().splitlines()
    assert raw[0] == "delta_gamma" and len(raw) == 301


def test_seed_override_changes_output(tmp_path):
    cfg = write(tmp_path / "ne.ini", "[noise]\nperiod = 10\nn = 50\n")
    main(["noise-ensemble", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"])
    main(["noise-ensemble", "--config", str(cfg), "--out", str(tmp_path / "b"), "--quiet", "--seed", "5"])
    assert (tmp_path / "a" / "ensemble.txt").read_bytes() != (tmp_path / "b" / "ensemble.txt").read_bytes()
    assert "seed = 5" in (tmp_path / "b" / "effective_config.ini").read_text()


def test_error_exit_codes(tmp_path, capsys):
    bad = write(tmp_path / "bad.ini", "[trace]\nhbar_scal = 1\n")
    assert main(["trace", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: CONFIG_VALIDATION:")
    assert main(["trace", "--out", str(tmp_path / "o")]) == 2
    assert main(["trace", "--config", str(tmp_path / "missing.ini"), "--out", str(tmp_path / "o")]) == 2
    write(tmp_path / "open.csv", "t,p_x,p_y,p_z\n0,1,0,0\n1,0.99,0.05,0\n2,0.98,0.1,0\n")
    cfg = write(tmp_path / "lp.ini", f"[path]\nsource = csv\ncsv = {tmp_path / 'open.csv'}\nclosed = true\n")
    assert main(["loop-phase", "--config", str(cfg), "--out", str(tmp_path / "o2"), "--quiet"]) == 1
    assert capsys.readouterr().err.splitlines()[-1].startswith("error: NOT_CLOSED:")
