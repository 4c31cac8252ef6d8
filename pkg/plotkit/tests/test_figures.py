import math
from pathlib import Path

import numpy as np
import pytest

from plotkit.figures import (FigureRequest, overlay_curve, parse_overlay,
                             render)
from plotkit.io import SchemaError

GOLDEN = Path(__file__).parent / "golden"


def test_parse_overlay_basic():
    assert parse_overlay("d=2,t2=1") == {"d": 2.0, "t2": 1.0}
    assert parse_overlay("d=5.0,t2=0.5") == {"d": 5.0, "t2": 0.5}


def test_parse_overlay_defaults_t2():
    assert parse_overlay("d=3") == {"d": 3.0, "t2": 1.0}


def test_parse_overlay_infinite():
    spec = parse_overlay("d=inf,t2=2")
    assert math.isinf(spec["d"]) and spec["t2"] == 2.0


@pytest.mark.parametrize("bad", ["", "d=", "t2=1", "q=3", "d=2;t2=1"])
def test_parse_overlay_rejects(bad):
    with pytest.raises(SchemaError):
        parse_overlay(bad)


def test_overlay_curve_values():
    t = np.array([0.0, 1.0, 8.0])
    np.testing.assert_allclose(overlay_curve(2.0, 1.0, t),
                               np.exp(-t ** (2.0 / 3.0)), rtol=1e-15)
    np.testing.assert_allclose(overlay_curve(math.inf, 2.0, t),
                               np.exp(-(t / 2.0) ** 2), rtol=1e-15)


def test_overlay_curve_t2_scaling():
    t = np.linspace(0.1, 3.0, 7)
    slow = overlay_curve(3.0, 2.0, t)
    base = overlay_curve(3.0, 1.0, t / 2.0)
    np.testing.assert_allclose(slow, base, rtol=1e-15)


def test_render_series(tmp_path):
    out = render(FigureRequest(kind="series",
                               inputs=(GOLDEN / "hahn_small",),
                               overlays=(parse_overlay("d=2,t2=1"),),
                               out=str(tmp_path / "fig.png")))
    assert out.is_file() and out.stat().st_size > 0


def test_render_series_multiple_inputs(tmp_path):
    out = render(FigureRequest(kind="series",
                               inputs=(GOLDEN / "hahn_small",
                                       GOLDEN / "train_small"),
                               logy=True,
                               out=str(tmp_path / "two.png")))
    assert out.is_file() and out.stat().st_size > 0


def test_render_map(tmp_path):
    out = render(FigureRequest(kind="floquet_map",
                               inputs=(GOLDEN / "floquet_small",),
                               out=str(tmp_path / "map.png")))
    assert out.is_file() and out.stat().st_size > 0


def test_render_empty_map_warns_but_renders(tmp_path):
    with pytest.warns(UserWarning, match="empty after thresholding"):
        out = render(FigureRequest(kind="floquet_map",
                                   inputs=(GOLDEN / "floquet_empty",),
                                   out=str(tmp_path / "blank.png")))
    assert out.is_file() and out.stat().st_size > 0


def test_render_histogram_density_and_counts(tmp_path):
    for counts in (False, True):
        out = render(FigureRequest(kind="histogram",
                                   inputs=(GOLDEN / "floquet_small",),
                                   counts=counts, logy=not counts,
                                   out=str(tmp_path / f"h{counts}.png")))
        assert out.is_file() and out.stat().st_size > 0


def test_render_is_deterministic(tmp_path):
    req = {"kind": "series", "inputs": (GOLDEN / "train_small",),
           "overlays": (parse_overlay("d=2,t2=1"),)}
    a = render(FigureRequest(**req, out=str(tmp_path / "a.png")))
    b = render(FigureRequest(**req, out=str(tmp_path / "b.png")))
    assert a.read_bytes() == b.read_bytes()


def test_render_rejects_unknown_kind(tmp_path):
    with pytest.raises(SchemaError, match="unknown figure kind"):
        render(FigureRequest(kind="surface", inputs=(GOLDEN / "hahn_small",),
                             out=str(tmp_path / "x.png")))


def test_render_rejects_multi_input_map(tmp_path):
    with pytest.raises(SchemaError, match="single input"):
        render(FigureRequest(kind="floquet_map",
                             inputs=(GOLDEN / "floquet_small",
                                     GOLDEN / "floquet_small"),
                             out=str(tmp_path / "x.png")))


def test_render_needs_input(tmp_path):
    with pytest.raises(SchemaError, match="no input"):
        render(FigureRequest(kind="series", out=str(tmp_path / "x.png")))


def test_render_does_not_mutate_inputs(tmp_path):
    before = (GOLDEN / "hahn_small" / "response.csv").read_bytes()
    render(FigureRequest(kind="series", inputs=(GOLDEN / "hahn_small",),
                         out=str(tmp_path / "probe.png")))
    assert (GOLDEN / "hahn_small" / "response.csv").read_bytes() == before
