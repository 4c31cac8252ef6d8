"""RunConfig plumbing, CLI parsing, dispatch, persistence, parallel mode."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from echotrain import closedform
from echotrain.cli import cli_parse, main
from echotrain.errors import ConfigError
from echotrain.model import (AXIS_ALTERNATING_X, AXIS_PLUS_X,
                             EPSILON_PER_PULSE, VARIANT_REDUCED)
from echotrain.runner import RunConfig, SCHEMA_VERSION, run


def quick_config(experiment, tmp_path, **overrides):
    base = dict(experiment=experiment, d=2.0, n_spins=5, density=0.6,
                target_t2=None, variant=VARIANT_REDUCED, n_realizations=2,
                master_seed=11, parallelism=1, out=str(tmp_path / "run"))
    base.update(overrides)
    return RunConfig(**base)


# --- config object --------------------------------------------------------------


def test_config_dict_round_trip():
    cfg = RunConfig(experiment="cpmg", d=math.inf, target_t2=0.5, tau=0.2,
                    times=(0.1, 0.2), epsilon=0.07, parallelism=3)
    clone = RunConfig.from_dict(cfg.to_dict())
    assert clone == cfg
    assert json.dumps(cfg.to_dict())  # serializable as-is


def test_config_rejects_unknown_experiment_and_keys():
    with pytest.raises(ConfigError):
        RunConfig(experiment="ramsey")
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"experiment": "hahn", "bogus": 1})


def test_hahn_grid_defaults_and_override():
    cfg = RunConfig(experiment="hahn", tmax=2.0, points=7)
    grid = cfg.hahn_times()
    assert grid.shape == (7,)
    assert grid[0] == pytest.approx(2.0 / 50.0)
    assert grid[-1] == pytest.approx(2.0)
    explicit = RunConfig(experiment="hahn", times=(0.1, 0.4))
    assert np.array_equal(explicit.hahn_times(), [0.1, 0.4])


# --- CLI parsing ------------------------------------------------------------------


def test_cli_parse_cpmg_flags():
    cfg = cli_parse(["cpmg", "--d", "2", "--ns", "20", "--tau", "0.07",
                     "--epsilon", "0.07", "--samples", "200", "--seed", "42",
                     "--out", "run/"])
    assert cfg.experiment == "cpmg"
    assert cfg.d == 2.0 and cfg.n_spins == 20
    assert cfg.tau == 0.07 and cfg.epsilon == 0.07
    assert cfg.n_realizations == 200 and cfg.master_seed == 42
    assert cfg.out == "run/"
    assert cfg.target_t2 == 1.0  # times arrive in units of the echo decay


def test_cli_parse_infinite_d():
    cfg = cli_parse(["hahn", "--d", "inf", "--ns", "20"])
    assert math.isinf(cfg.d)
    with pytest.raises(ConfigError):
        cli_parse(["hahn", "--d", "inf", "--ns", "20", "--density", "0.5"])


def test_cli_density_replaces_default_target():
    cfg = cli_parse(["hahn", "--d", "3", "--density", "0.7"])
    assert cfg.density == 0.7
    assert cfg.target_t2 is None


def test_cli_axis_and_policy_mapping():
    cfg = cli_parse(["cpmg", "--axis", "apcp", "--epsilon-policy",
                     "per-pulse"])
    assert cfg.axis_policy == AXIS_ALTERNATING_X
    assert cfg.epsilon_policy == EPSILON_PER_PULSE


def test_cli_config_file_with_flag_override(tmp_path):
    path = tmp_path / "base.json"
    path.write_text(json.dumps({"tau": 0.3, "n_spins": 8, "epsilon": 0.02}))
    cfg = cli_parse(["cpmg", "--config", str(path), "--tau", "0.5"])
    assert cfg.tau == 0.5          # flag wins
    assert cfg.n_spins == 8        # file fills the rest
    assert cfg.epsilon == 0.02


def test_cli_unknown_flag_is_usage_error(capsys):
    assert main(["cpmg", "--frequency", "3"]) == 2
    capsys.readouterr()


def test_cli_floquet_defaults_fit_dense_limit():
    cfg = cli_parse(["floquet", "--tau", "0.25"])
    assert cfg.n_spins <= 14


def test_main_maps_resource_errors(tmp_path, capsys):
    code = main(["floquet", "--ns", "16", "--d", "2", "--t2", "1.0",
                 "--out", str(tmp_path / "x")])
    assert code == 3
    capsys.readouterr()


# --- running experiments -----------------------------------------------------------


def test_run_is_deterministic(tmp_path):
    a = run(quick_config("hahn", tmp_path / "a", points=5, tmax=1.0,
                         n_realizations=1))
    b = run(quick_config("hahn", tmp_path / "b", points=5, tmax=1.0,
                         n_realizations=1))
    text_a = (Path(a.out_dir) / "response.csv").read_text()
    text_b = (Path(b.out_dir) / "response.csv").read_text()
    assert text_a == text_b


def test_parallel_matches_serial_bytes(tmp_path):
    serial = run(quick_config("cpmg", tmp_path / "s", tau=0.1, n_pulses=4,
                              n_realizations=3, parallelism=1))
    parallel = run(quick_config("cpmg", tmp_path / "p", tau=0.1, n_pulses=4,
                                n_realizations=3, parallelism=2))
    assert (Path(serial.out_dir) / "response.csv").read_text() == \
        (Path(parallel.out_dir) / "response.csv").read_text()


def test_response_csv_layout(tmp_path):
    rec = run(quick_config("longitudinal", tmp_path, tau=0.15, n_pulses=3))
    lines = (Path(rec.out_dir) / "response.csv").read_text().splitlines()
    assert lines[0] == "time,mean,stderr,echo_index,parity"
    first = lines[1].split(",")
    assert float(first[0]) == 0.0 and float(first[1]) == 1.0
    assert len(lines) == 1 + 4  # t=0 plus one row per echo
    meta = json.loads((Path(rec.out_dir) / "metadata.json").read_text())
    assert meta["schema_version"] == SCHEMA_VERSION
    assert meta["outputs"] == {"response": "response.csv"}
    assert RunConfig.from_dict(meta["config"]).experiment == "longitudinal"


def test_apcp_dispatch_forces_alternating_axis(tmp_path):
    rec = run(quick_config("apcp", tmp_path, tau=0.15, n_pulses=2,
                           axis_policy=AXIS_PLUS_X))
    meta = json.loads((Path(rec.out_dir) / "metadata.json").read_text())
    # the stored config keeps the user's value; the dispatch replaces it
    assert meta["config"]["axis_policy"] == AXIS_PLUS_X
    assert meta["experiment"] == "apcp"


def test_floquet_outputs(tmp_path):
    rec = run(quick_config("floquet", tmp_path, n_spins=4, tau=0.3,
                           epsilon=0.07, threshold=0.05, beta=0.05,
                           n_realizations=2))
    out = Path(rec.out_dir)
    for name in ("quasienergies.csv", "map.csv", "histogram.csv",
                 "sigma.csv", "metadata.json"):
        assert (out / name).exists()
    phis = [float(x) for x in
            (out / "quasienergies.csv").read_text().splitlines()[1:]]
    assert len(phis) == 16
    assert all(-math.pi < p <= math.pi for p in phis)
    hist = np.loadtxt(out / "histogram.csv", delimiter=",", skiprows=1)
    assert hist[:, 1].sum() == pytest.approx(16 * 17 / 2)  # averaged counts
    sigma = np.loadtxt(out / "sigma.csv", delimiter=",", skiprows=1)
    width = 2 * 0.05
    assert (sigma[:, 1] * width).sum() == pytest.approx(1.0, abs=1e-9)
    map_rows = (out / "map.csv").read_text().splitlines()
    assert map_rows[0] == "phi_j,phi_k,value"
    for row in map_rows[1:]:
        assert float(row.split(",")[2]) >= 0.05


def test_calibrate_then_hahn_crossing(tmp_path):
    rec = run(RunConfig(experiment="calibrate", d=3.0, n_spins=12,
                        target_t2=1.0, out=str(tmp_path / "cal")))
    payload = json.loads((Path(rec.out_dir) / "calibration.json").read_text())
    assert payload["density"] > 0
    grid = tuple(np.linspace(0.7, 1.3, 13))
    hahn = run(RunConfig(experiment="hahn", d=3.0, n_spins=12,
                         density=payload["density"], target_t2=None,
                         variant=VARIANT_REDUCED, times=grid,
                         n_realizations=200, master_seed=17, parallelism=1,
                         out=str(tmp_path / "hahn")))
    data = np.loadtxt(Path(hahn.out_dir) / "response.csv", delimiter=",",
                      skiprows=1)
    t, mean = data[1:, 0], data[1:, 1]
    crossing = np.interp(math.exp(-1.0), mean[::-1], t[::-1])
    assert abs(crossing - 1.0) < 0.05


def test_tables_outputs(tmp_path):
    rec = run(RunConfig(experiment="tables", out=str(tmp_path / "tab")))
    out = Path(rec.out_dir)
    rows = (out / "constants.csv").read_text().splitlines()
    assert rows[0] == "d,angular_integral,lattice_constant,t2_at_unit_density"
    d3 = rows[2].split(",")
    assert float(d3[1]) == pytest.approx(closedform.angular_integral(3))
    j = np.loadtxt(out / "infinite_couplings.csv", delimiter=",", skiprows=1)
    assert j[0, 0] == 2
    assert np.all(np.diff(j[:, 1]) < 0)  # more spins, weaker pair coupling


def test_default_out_dir_under_results(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rec = run(RunConfig(experiment="tables"))
    assert Path(rec.out_dir).parent.name == "results"
    assert (Path(rec.out_dir) / "metadata.json").exists()
