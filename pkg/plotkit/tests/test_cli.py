import json
import shutil
from pathlib import Path

import pytest

from plotkit.cli import build_request, main

GOLDEN = Path(__file__).parent / "golden"


def test_build_request_series():
    req = build_request(["series", "--in", "a", "--in", "b",
                         "--overlay", "d=2,t2=1", "--logy",
                         "--out", "x.png"])
    assert req.kind == "series"
    assert req.inputs == ("a", "b")
    assert req.overlays == ({"d": 2.0, "t2": 1.0},)
    assert req.logy and not req.logx
    assert req.out == "x.png"


def test_build_request_histogram_counts():
    req = build_request(["histogram", "--in", "a", "--counts"])
    assert req.counts and req.out == "figure.png"


def test_main_renders_series(tmp_path, capsys):
    out = tmp_path / "fig.png"
    code = main(["series", "--in", str(GOLDEN / "hahn_small"),
                 "--overlay", "d=2,t2=1", "--out", str(out)])
    assert code == 0
    assert out.is_file()
    assert str(out) in capsys.readouterr().out


def test_main_empty_map_exits_zero(tmp_path):
    out = tmp_path / "blank.png"
    with pytest.warns(UserWarning):
        code = main(["floquet_map", "--in", str(GOLDEN / "floquet_empty"),
                     "--out", str(out)])
    assert code == 0 and out.is_file()


def test_main_rejects_wrong_schema(tmp_path, capsys):
    run = tmp_path / "run"
    shutil.copytree(GOLDEN / "hahn_small", run)
    meta = json.loads((run / "metadata.json").read_text())
    meta["schema_version"] = 99
    (run / "metadata.json").write_text(json.dumps(meta))
    code = main(["series", "--in", str(run),
                 "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "schema_version" in capsys.readouterr().err


def test_main_rejects_bad_overlay(tmp_path, capsys):
    code = main(["series", "--in", str(GOLDEN / "hahn_small"),
                 "--overlay", "q=1", "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "overlay" in capsys.readouterr().err


def test_main_usage_error_is_nonzero(capsys):
    code = main(["series"])  # --in is required
    capsys.readouterr()
    assert code == 2


def test_main_missing_directory(tmp_path, capsys):
    code = main(["series", "--in", str(tmp_path / "absent"),
                 "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "error" in capsys.readouterr().err
