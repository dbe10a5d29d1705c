import xml.etree.ElementTree as ET

import numpy as np
import pytest

from alignor.plotsvg import Series, emit_plot


class TestEmitPlot:
    def test_minimal_plot_is_valid_svg_with_sidecar(self, tmp_path):
        s = Series("points", np.array([0.0, 1.0, 2.0]), np.array([1.0, -1.0, 0.5]))
        out = emit_plot([s], tmp_path / "p.svg", title="t", xlabel="x", ylabel="y")
        root = ET.parse(out).getroot()
        assert root.tag.endswith("svg")
        sidecar = out.with_suffix(".dat")
        rows = [ln for ln in sidecar.read_text().splitlines()
                if ln and not ln.startswith("#")]
        assert len(rows) == 3

    def test_two_branch_styling(self, tmp_path):
        x = np.linspace(-1, 1, 20)
        up = Series("up", x, np.tanh(3 * x), color="#1f77b4")
        down = Series("down", x[::-1], np.tanh(3 * x[::-1]) - 0.2,
                      color="#d62728", dashed=True)
        out = emit_plot([up, down], tmp_path / "b.svg")
        text = out.read_text()
        assert text.count("<polyline") == 2
        assert "#1f77b4" in text and "#d62728" in text
        assert "stroke-dasharray" in text

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            Series("bad", np.arange(3.0), np.arange(4.0))

    def test_empty_inputs_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot([], tmp_path / "e.svg")
        with pytest.raises(ValueError):
            Series("empty", np.array([]), np.array([]))

    def test_constant_series_does_not_crash(self, tmp_path):
        s = Series("flat", np.array([1.0, 2.0]), np.array([3.0, 3.0]))
        out = emit_plot([s], tmp_path / "f.svg")
        assert out.exists()
