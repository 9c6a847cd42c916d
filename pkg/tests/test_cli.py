import csv
import json
import math

import pytest

from nngf.cli import main


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _manifest_files(out):
    data = json.loads((out / "manifest.json").read_text())
    return {e["file"] for e in data["files"]}


def test_kernel_probe(capsys):
    assert main(["kernel", "--kind", "relu", "--probe", "0"]) == 0
    assert capsys.readouterr().out.strip() == "0.3183099"
    assert main(["kernel", "--series", "0.3,0.5,0.2", "--probe", "1"]) == 0
    assert capsys.readouterr().out.strip() == "1"


def test_kernel_json(capsys):
    assert main(["kernel", "--kind", "relu", "--probe", "0,0.5", "--depth", "2", "--format", "json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["values"][0] == pytest.approx(0.4937311, abs=1e-7)
    assert data["kprime1"] == pytest.approx(1.0, abs=1e-12)


def test_negative_coefficient_rejected(capsys):
    assert main(["kernel", "--series", "0.5,-0.1,0.6"]) == 2
    assert "negative coefficient" in capsys.readouterr().err


def test_regime_json(capsys):
    assert main(["regime", "--series", "0,0.9,0,0,0,0,0,0,0,0,0.1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["regime"] == "high-disorder"
    assert rep["nu"] == pytest.approx(math.log(1 / 0.9) / math.log(1.9), rel=1e-10)


def test_spectrum_outputs(tmp_path):
    out = tmp_path / "spec"
    assert main(["spectrum", "--kind", "relu", "--depths", "1,5", "--lmax", "200", "--out", str(out)]) == 0
    rows = _rows(out / "spectrum.csv")
    for L in ("1", "5"):
        mass = sum(float(r["mode_mass"]) for r in rows if r["L"] == L)
        assert mass == pytest.approx(1.0, abs=1e-4)
    assert {"spectrum.csv", "spectrum.svg"} <= _manifest_files(out)


def test_moments_outputs(tmp_path):
    out = tmp_path / "mom"
    assert main(["moments", "--kind", "relu", "--depths", "10,20", "--q", "2", "--out", str(out)]) == 0
    rows = _rows(out / "moments.csv")
    assert [r["L"] for r in rows] == ["10", "20"]
    assert float(rows[1]["moment"]) < float(rows[0]["moment"])
    assert {"moments.csv", "moments.svg"} <= _manifest_files(out)


def _write_cfg(tmp_path, **over):
    cfg = {"version": 1, "kernel": {"kind": "series", "coeffs": [0, 0.9, 0, 0, 0, 0, 0, 0, 0, 0, 0.1]},
           "d": 2, "depths": [30, 50], "observable": {"kind": "hermite", "order": 2},
           "replicates": 3000, "seed": 0, "output": str(tmp_path / "run"),
           "checks": [{"type": "stability", "name": "ks"},
                      {"type": "skewness", "name": "skew"}]}
    cfg.update(over)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


def test_experiment_verdicts(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["experiment", "--config", str(cfg)]) == 0
    out = tmp_path / "run"
    verdicts = json.loads((out / "verdicts.json").read_text())
    names = {v["name"] for v in verdicts} if isinstance(verdicts, list) else set(verdicts)
    assert {"ks", "skew"} <= names
    assert {"samples.csv", "prediction.json", "verdicts.json"} <= _manifest_files(out)
    assert "PASS" in capsys.readouterr().out


def test_simulate_seed_override_changes_samples(tmp_path):
    cfg = _write_cfg(tmp_path, replicates=64, depths=[30])
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b), "--seed", "1"]) == 0
    assert (a / "samples.csv").read_bytes() != (b / "samples.csv").read_bytes()
    assert len(_rows(a / "samples.csv")) == 64


def test_config_errors(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
    bad = _write_cfg(tmp_path, colour="blue")
    assert main(["simulate", "--config", str(bad)]) == 2


def test_verify(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out
