"""Run configuration, ensemble orchestration, and on-disk results.

A RunConfig is the single serializable description of an invocation: which
experiment, the ensemble geometry, the pulse model, the sequence shape,
realization count, seed, and engine overrides.  ``run`` dispatches it,
farms realizations over a process pool when asked, and writes one output
directory holding plain CSV data plus a metadata.json with enough
provenance to re-run the job serially and get the same bytes.

CSV schemas (consumed by the plotting package, so they are stable):
  response.csv      time, mean, stderr, echo_index, parity
  histogram.csv     bin_center, value
  sigma.csv         bin_center, value
  map.csv           phi_j, phi_k, value
  quasienergies.csv phi
Spectral maps come from the first realization (a typical one); histograms
are averaged over all of them.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import closedform, disorder, floquet, protocol
from .disorder import EnsembleConfig
from .engine import EvolutionPlan, METHOD_AUTO
from .errors import ConfigError
from .model import (AXIS_ALTERNATING_X, AXIS_PLUS_X, EPSILON_UNIFORM,
                    PulseModel, PulseSchedule, VARIANT_FULL, build_model)
from .protocol import KIND_HAHN, KIND_TRAIN, SequenceSpec, _child_seed

SCHEMA_VERSION = 1

EXPERIMENTS = ("hahn", "cpmg", "apcp", "longitudinal", "floquet",
               "calibrate", "tables")

# exit codes used by the CLI wrapper
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_DIVERGENCE = 4

AUTO = "auto"


@dataclass
class RunConfig:
    """Everything one invocation needs, in serializable form."""

    experiment: str
    # ensemble
    d: float = 2.0
    n_spins: int = 20
    density: float | None = None
    target_t2: float | None = 1.0
    field_sigma: float | None = None  # None: module default
    field_distribution: str = "gaussian"
    axis_mode: str = closedform.AXIS_NORMAL_TO_PLANE
    variant: str = VARIANT_FULL
    # pulse model
    epsilon: float = 0.0
    epsilon_policy: str = EPSILON_UNIFORM
    axis_policy: str = AXIS_PLUS_X
    # sequence
    tau: float = 0.07
    n_pulses: int = 50
    times: tuple = ()       # explicit Hahn grid; empty -> tmin/tmax/points
    tmin: float | None = None
    tmax: float = 3.0
    points: int = 40
    alpha: str = "x"
    # floquet products
    threshold: float = 0.25
    beta: float | None = None  # None: module default bin half-width
    # execution
    n_realizations: int = 100
    master_seed: int = 1
    method: str = METHOD_AUTO
    trotter_step: float | None = None
    parallelism: int | str = AUTO
    out: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.n_realizations < 1:
            raise ConfigError("need at least one realization")
        if self.parallelism != AUTO and int(self.parallelism) < 1:
            raise ConfigError("parallelism must be positive or 'auto'")

    def ensemble(self) -> EnsembleConfig:
        kwargs = dict(d=self.d, n_spins=self.n_spins, density=self.density,
                      target_t2=self.target_t2,
                      field_distribution=self.field_distribution,
                      axis_mode=self.axis_mode)
        if self.field_sigma is not None:
            kwargs["field_sigma"] = self.field_sigma
        return EnsembleConfig(**kwargs)

    def pulse_model(self) -> PulseModel:
        return PulseModel(epsilon=self.epsilon,
                          epsilon_policy=self.epsilon_policy,
                          axis_policy=self.axis_policy)

    def plan(self) -> EvolutionPlan | None:
        if self.method == METHOD_AUTO and self.trotter_step is None:
            return None
        return EvolutionPlan(method=self.method,
                             trotter_step=self.trotter_step)

    def hahn_times(self) -> np.ndarray:
        if self.times:
            return np.asarray(self.times, dtype=float)
        lo = self.tmin if self.tmin is not None else self.tmax / 50.0
        return np.geomspace(lo, self.tmax, self.points)

    def workers(self) -> int:
        if self.parallelism == AUTO:
            return os.cpu_count() or 1
        return int(self.parallelism)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["d"] = "inf" if math.isinf(self.d) else self.d
        data["times"] = list(self.times)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        kwargs = dict(data)
        d = kwargs.get("d")
        if d in ("inf", "infinite"):
            kwargs["d"] = math.inf
        if "times" in kwargs:
            kwargs["times"] = tuple(kwargs["times"])
        unknown = set(kwargs) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class ResultRecord:
    """What a finished run produced and where."""

    config: RunConfig
    out_dir: str
    outputs: dict
    elapsed_seconds: float
    n_realizations: int


# --- persistence helpers -----------------------------------------------------


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_csv(path: Path, header: list, columns: list):
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(
            str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))
            for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_response(path: Path, series: protocol.ResponseSeries):
    _write_csv(path, ["time", "mean", "stderr", "echo_index", "parity"],
               [series.times, series.mean, series.stderr,
                series.echo_index.astype(int), series.parity.astype(int)])


def _prepare_out_dir(config: RunConfig) -> Path:
    if config.out is not None:
        out = Path(config.out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        out = Path("results") / f"{stamp}-{config.experiment}"
        k = 1
        while out.exists():
            out = Path("results") / f"{stamp}-{config.experiment}-{k}"
            k += 1
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- experiment dispatch ------------------------------------------------------


def _sequence_spec(config: RunConfig) -> SequenceSpec:
    pulses = config.pulse_model()
    if config.experiment == "hahn":
        return SequenceSpec(kind=KIND_HAHN, alpha=config.alpha,
                            variant=config.variant, pulses=pulses,
                            times=tuple(config.hahn_times()))
    if config.experiment == "apcp":
        pulses = dataclasses.replace(pulses, axis_policy=AXIS_ALTERNATING_X)
    alpha = "z" if config.experiment == "longitudinal" else config.alpha
    return SequenceSpec(kind=KIND_TRAIN, alpha=alpha, variant=config.variant,
                        pulses=pulses, tau=config.tau,
                        n_echoes=config.n_pulses)


def _run_response(config: RunConfig, out_dir: Path) -> dict:
    spec = _sequence_spec(config)
    workers = config.workers()
    pool = None
    map_fn = None
    if workers > 1 and config.n_realizations > 1:
        pool = concurrent.futures.ProcessPoolExecutor(max_workers=workers)
        map_fn = pool.map
    try:
        series = protocol.run_spec(config.ensemble(), spec,
                                   config.n_realizations, config.master_seed,
                                   map_fn=map_fn, plan=config.plan())
    finally:
        if pool is not None:
            pool.shutdown()
    _write_response(out_dir / "response.csv", series)
    return {"response": "response.csv"}


def _run_floquet(config: RunConfig, out_dir: Path) -> dict:
    # memory-bound: always serial, one dense operator at a time
    ens = config.ensemble()
    pulses = config.pulse_model()
    beta = config.beta if config.beta is not None else floquet.DEFAULT_BETA
    plan = config.plan()
    hist_acc = sigma_acc = centers = None
    outputs = {}
    for i in range(config.n_realizations):
        real = disorder.realize(ens, _child_seed(config.master_seed, i, 0))
        model = build_model(real, config.variant)
        sched = PulseSchedule(pulses, model.n_spins,
                              _child_seed(config.master_seed, i, 2))
        u = floquet.build_floquet(model, sched, config.tau, plan=plan)
        spectrum = floquet.diagonalize(u)
        if i == 0:
            _write_csv(out_dir / "quasienergies.csv", ["phi"],
                       [spectrum.quasienergies])
            emitted = floquet.matrix_elements(spectrum, config.alpha,
                                              config.threshold)
            _write_csv(out_dir / "map.csv", ["phi_j", "phi_k", "value"],
                       [emitted.phi_j, emitted.phi_k, emitted.value])
            outputs.update({"quasienergies": "quasienergies.csv",
                            "map": "map.csv"})
        hist = floquet.histogram_P(spectrum, beta)
        sigma = floquet.weighted_sigma(spectrum, config.alpha, beta)
        if hist_acc is None:
            centers = hist.bin_centers
            hist_acc = hist.values.copy()
            sigma_acc = sigma.values.copy()
        else:
            hist_acc += hist.values
            sigma_acc += sigma.values
    r = config.n_realizations
    _write_csv(out_dir / "histogram.csv", ["bin_center", "value"],
               [centers, hist_acc / r])
    _write_csv(out_dir / "sigma.csv", ["bin_center", "value"],
               [centers, sigma_acc / r])
    outputs.update({"histogram": "histogram.csv", "sigma": "sigma.csv"})
    return outputs


def _run_calibrate(config: RunConfig, out_dir: Path) -> dict:
    if math.isinf(config.d):
        raise ConfigError("d = inf calibrates the coupling in closed form; "
                          "nothing to simulate")
    if config.target_t2 is None:
        raise ConfigError("calibrate needs a target_t2")
    density = disorder.calibrate_density(config.d, config.n_spins,
                                         config.target_t2,
                                         axis_mode=config.axis_mode)
    payload = {"schema_version": SCHEMA_VERSION, "d": config.d,
               "n_spins": config.n_spins, "target_t2": config.target_t2,
               "axis_mode": config.axis_mode, "density": density}
    _atomic_write(out_dir / "calibration.json",
                  json.dumps(payload, indent=2) + "\n")
    return {"calibration": "calibration.json"}


def _run_tables(config: RunConfig, out_dir: Path) -> dict:
    ds = [2, 3, 4, 5, 6, 7, 8]
    ang = [closedform.angular_integral(d) for d in ds]
    # the lattice sum and with it the closed-form T2 diverge at d >= 6
    lat = [closedform.lattice_constant(d) if d < 6 else math.nan for d in ds]
    t2 = [closedform.t2_from_density(d, 1.0) if d < 6 else math.nan
          for d in ds]
    _write_csv(out_dir / "constants.csv",
               ["d", "angular_integral", "lattice_constant",
                "t2_at_unit_density"],
               [ds, ang, lat, t2])
    ns = list(range(2, 25))
    js = [closedform.couplings_infinite_d(n, 1.0) for n in ns]
    _write_csv(out_dir / "infinite_couplings.csv", ["n_spins", "coupling"],
               [ns, js])
    return {"constants": "constants.csv",
            "infinite_couplings": "infinite_couplings.csv"}


def run(config: RunConfig) -> ResultRecord:
    """Dispatch one configured experiment and persist its outputs."""
    start = time.monotonic()
    out_dir = _prepare_out_dir(config)
    if config.experiment in ("hahn", "cpmg", "apcp", "longitudinal"):
        outputs = _run_response(config, out_dir)
    elif config.experiment == "floquet":
        outputs = _run_floquet(config, out_dir)
    elif config.experiment == "calibrate":
        outputs = _run_calibrate(config, out_dir)
    else:
        outputs = _run_tables(config, out_dir)
    elapsed = time.monotonic() - start
    meta = {
        "schema_version": SCHEMA_VERSION,
        "experiment": config.experiment,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_seconds": elapsed,
        "n_realizations": config.n_realizations,
        "outputs": outputs,
        "config": config.to_dict(),
    }
    # metadata lands last: its presence marks a complete directory
    _atomic_write(out_dir / "metadata.json", json.dumps(meta, indent=2) + "\n")
    return ResultRecord(config=config, out_dir=str(out_dir), outputs=outputs,
                        elapsed_seconds=elapsed,
                        n_realizations=config.n_realizations)
