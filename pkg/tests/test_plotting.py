import json
import re

import numpy as np
import pytest

from behaviometry.errors import ValidationError
from behaviometry.expressions import multiscale_decompose
from behaviometry.plotting import emit_plot
from behaviometry.signal import ExpressionTrack, LandmarkTrack, Signal

URL = re.compile(r"(https?:|ftp:|//[a-z0-9]|src=|href=|@import|url\()", re.I)


def embedded(doc):
    m = re.search(r'<script type="application/json" id="plot-data">(.*?)</script>', doc, re.S)
    return json.loads(m.group(1).replace("<\\/", "</"))


def test_one_marker_per_peak(tmp_path, rng):
    e = ExpressionTrack.from_array(rng.standard_normal((300, 3)).cumsum(0), 30).signal
    dec = multiscale_decompose(e, [0.5, 1.0])
    peaks = {c: [p.frame for p in dec.peaks[0][c]] for c in range(3)}
    out = emit_plot(e, tmp_path / "p.html", peaks=peaks)
    doc = out.read_text()
    assert doc.count('class="peak"') == sum(len(v) for v in peaks.values()) > 0


def test_no_external_references(tmp_path, rng):
    s = Signal(rng.standard_normal((40, 2)), 30, ["a", "b"])
    lm = LandmarkTrack.from_points(rng.standard_normal((40, 51, 3)), 30, "ibug51").signal
    doc = emit_plot(s, tmp_path / "p.html", overlays=[lm]).read_text()
    assert not URL.search(doc)
    assert "landmarks" in embedded(doc)


def test_embedded_sample_count(tmp_path, rng):
    s = Signal(rng.standard_normal((10, 3)), 30, ["a", "b", "c"])
    data = embedded(emit_plot(s, tmp_path / "p.html").read_text())
    assert {k: len(v) for k, v in data["channels"].items()} == {"a": 10, "b": 10, "c": 10}


def test_nan_samples_become_null(tmp_path):
    s = Signal(np.array([[1.0], [np.nan], [2.0]]), 30, ["a"])
    data = embedded(emit_plot(s, tmp_path / "p.html").read_text())
    assert data["channels"]["a"] == [1.0, None, 2.0]


def test_svg_export(tmp_path, rng):
    s = Signal(rng.standard_normal((20, 2)), 30, ["a", "b"])
    doc = emit_plot(s, tmp_path / "p.svg", peaks={"a": [3, 9]}).read_text()
    assert doc.startswith("<?xml") and doc.count('class="peak"') == 2


def test_empty_rejected(tmp_path):
    with pytest.raises(ValidationError):
        emit_plot(Signal(np.zeros((0, 1)), 30, ["a"]), tmp_path / "p.html")


def test_unknown_format(tmp_path):
    with pytest.raises(ValidationError):
        emit_plot(Signal(np.zeros((3, 1)), 30, ["a"]), tmp_path / "p.png", fmt="png")
