import csv
import io
import math

import numpy as np

from nngf.report import config_hash, csv_text, fmt, json_text, svg_lineplot, write_csv, write_manifest


def test_fmt_round_trips_doubles():
    for x in (math.pi, 1e-300, -2.5e17, 0.1 + 0.2):
        assert float(fmt(x)) == x
    assert fmt(np.float64(1 / 3)) == "0.33333333333333331"
    assert fmt(7) == "7" and fmt(True) == "true" and fmt(None) == ""


def test_csv_uses_crlf_and_quotes():
    text = csv_text(["a", "b"], [[1, "x,y"], [2.5, "z"]])
    assert text == 'a,b\r\n1,"x,y"\r\n2.5,z\r\n'
    assert list(csv.reader(io.StringIO(text))) == [["a", "b"], ["1", "x,y"], ["2.5", "z"]]


def test_config_hash_stable_under_key_order():
    a = {"seed": 0, "kernel": {"kind": "relu"}, "depths": [1, 2]}
    b = {"depths": [1, 2], "kernel": {"kind": "relu"}, "seed": 0}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "seed": 1})


def test_json_handles_numpy_and_nonfinite():
    text = json_text({"x": np.arange(3), "y": np.float64("inf")})
    assert '"inf"' in text and "[\n    0," in text


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    svg = svg_lineplot([("a<b", [1, 10, 100], [1.0, 0.1, 0.01])], title="t", logx=True, logy=True)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert any(el.tag.endswith("polyline") for el in root.iter())


def test_manifest_inventory(tmp_path):
    f = write_csv(tmp_path / "x.csv", ["a"], [[1]])
    m = write_manifest(tmp_path, "kernel", {"seed": 0}, {"seed": 0}, [f], "2026-01-01T00:00:00+00:00")
    import json

    data = json.loads(m.read_text())
    assert [e["file"] for e in data["files"]] == ["x.csv"]
    assert data["files"][0]["bytes"] == len("a\r\n1\r\n")
    assert data["config_hash"] == config_hash({"seed": 0})
