"""Pulse-sequence experiments over disorder ensembles.

A sequence spec describes one experiment shape: either a Hahn scan (one
ideal refocusing pulse at t/2 for every total time on a grid) or a pulse
train (pulses at (2n+1) tau, records at the echo times 2n tau).  Running a
spec over an ensemble produces a ResponseSeries: the realization mean of
the normalized response at every record time, with the t = 0 value pinned
to 1 per realization by construction (each typicality estimate is divided
by its own t = 0 sample), so ensemble curves start at exactly 1.

Realizations are embarrassingly parallel; ``realization_response`` is the
picklable unit of work and all randomness is keyed by (master seed,
realization index, channel), never by execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import disorder
from .disorder import EnsembleConfig
from .engine import (EvolutionPlan, Propagator, apply_collective,
                     collective_dot, random_state)
from .errors import ConfigError
from .model import (AXIS_ALTERNATING_X, IDEAL_PULSES, PulseModel,
                    PulseSchedule, VARIANT_FULL, build_model)

KIND_HAHN = "hahn"
KIND_TRAIN = "train"

_ALPHAS = ("x", "y", "z")


@dataclass(frozen=True)
class SequenceSpec:
    """What to run on each realization; immutable and picklable."""

    kind: str
    alpha: str = "x"
    variant: str = VARIANT_FULL
    pulses: PulseModel = IDEAL_PULSES
    tau: float = 0.0       # train spacing; echoes at 2 n tau
    n_echoes: int = 0      # train length
    times: tuple = ()      # hahn total-time grid

    def __post_init__(self):
        if self.alpha not in _ALPHAS:
            raise ConfigError(f"unknown response axis {self.alpha!r}")
        if self.kind == KIND_HAHN:
            t = tuple(float(v) for v in self.times)
            if not t:
                raise ConfigError("hahn scan needs a non-empty time grid")
            if t[0] <= 0 or any(b <= a for a, b in zip(t, t[1:])):
                raise ConfigError(
                    "hahn grid must be strictly increasing and positive")
            object.__setattr__(self, "times", t)
        elif self.kind == KIND_TRAIN:
            if not self.tau > 0:
                raise ConfigError("pulse spacing tau must be positive")
            if self.n_echoes < 1:
                raise ConfigError("need at least one echo")
        else:
            raise ConfigError(f"unknown sequence kind {self.kind!r}")

    def record_times(self) -> np.ndarray:
        """Full output grid including the t = 0 normalization point."""
        if self.kind == KIND_HAHN:
            return np.concatenate([[0.0], self.times])
        return 2.0 * self.tau * np.arange(self.n_echoes + 1)

    def echo_indices(self) -> np.ndarray:
        if self.kind == KIND_HAHN:
            # every grid point is the first (and only) echo of its own run
            return np.concatenate([[0], np.ones(len(self.times), dtype=int)])
        return np.arange(self.n_echoes + 1)


@dataclass(frozen=True)
class ResponseSeries:
    """Ensemble-averaged normalized response on a fixed record grid."""

    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    echo_index: np.ndarray
    parity: np.ndarray
    alpha: str
    n_realizations: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("record times must be strictly increasing")
        shapes = {a.shape for a in (self.times, self.mean, self.stderr,
                                    self.echo_index, self.parity)}
        if len(shapes) != 1:
            raise ConfigError("series columns must have equal length")


@dataclass(frozen=True)
class AsymmetryMetric:
    """Even/odd echo means inside a window and their ratio."""

    even_mean: float
    odd_mean: float
    ratio: float           # nan when |odd_mean| is below the floor
    even_stderr: float
    odd_stderr: float
    ratio_stderr: float
    n_even: int
    n_odd: int
    window: tuple


def _child_seed(master_entropy: int, index: int, channel: int
                ) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_entropy,
                                  spawn_key=(index, channel))


def realization_response(config: EnsembleConfig, spec: SequenceSpec,
                         master_entropy: int, index: int,
                         plan: EvolutionPlan | None = None) -> np.ndarray:
    """Normalized response of realization ``index`` on the record grid.

    Seed channels: 0 draws geometry and local fields, 1 the typicality
    vector, 2 the pulse angles.  Any subset of indices reproduces bit-for-
    bit in any execution order.
    """
    real = disorder.realize(config, _child_seed(master_entropy, index, 0))
    model = build_model(real, spec.variant)
    n = model.n_spins
    prop = Propagator(model, plan)
    r0 = random_state(n, _child_seed(master_entropy, index, 1))
    a0 = apply_collective(r0, spec.alpha, n)
    base = collective_dot(r0, a0, spec.alpha, n)
    schedule = PulseSchedule(spec.pulses, n, _child_seed(master_entropy,
                                                         index, 2))
    values = [1.0]
    if spec.kind == KIND_HAHN:
        az, ang = schedule.angles(0)
        for t in spec.times:
            r, a = r0.copy(), a0.copy()
            for vec in (r, a):
                prop.evolve(vec, 0.5 * t)
                prop.pulse(vec, az, ang)
                prop.evolve(vec, 0.5 * t)
            values.append((collective_dot(r, a, spec.alpha, n) / base).real)
    else:
        r, a = r0.copy(), a0.copy()
        for echo in range(1, spec.n_echoes + 1):
            az, ang = schedule.angles(echo - 1)
            for vec in (r, a):
                prop.evolve(vec, spec.tau)
                prop.pulse(vec, az, ang)
                prop.evolve(vec, spec.tau)
            values.append((collective_dot(r, a, spec.alpha, n) / base).real)
    return np.asarray(values)


def run_spec(config: EnsembleConfig, spec: SequenceSpec,
             n_realizations: int, seed: int, map_fn=None,
             plan: EvolutionPlan | None = None) -> ResponseSeries:
    """Average ``realization_response`` over an ensemble.

    ``map_fn`` must behave like the builtin map (order preserving); pass
    an executor's map to parallelize.  Aggregation happens on the stacked
    result matrix, so the output is identical for any worker count.
    """
    if n_realizations < 1:
        raise ConfigError("need at least one realization")
    if map_fn is None:
        map_fn = map
    rows = list(map_fn(_RealizationTask(config, spec, seed, plan),
                       range(n_realizations)))
    matrix = np.stack(rows)
    mean = matrix.mean(axis=0)
    if n_realizations > 1:
        stderr = matrix.std(axis=0, ddof=1) / math.sqrt(n_realizations)
    else:
        stderr = np.zeros_like(mean)
    echo = spec.echo_indices()
    return ResponseSeries(
        times=spec.record_times(), mean=mean, stderr=stderr,
        echo_index=echo, parity=echo % 2, alpha=spec.alpha,
        n_realizations=n_realizations,
        metadata={"config": config.to_dict(), "spec": spec_to_dict(spec),
                  "seed": seed})


@dataclass(frozen=True)
class _RealizationTask:
    """Picklable closure for executor maps."""

    config: EnsembleConfig
    spec: SequenceSpec
    seed: int
    plan: EvolutionPlan | None = None

    def __call__(self, index: int) -> np.ndarray:
        return realization_response(self.config, self.spec, self.seed, index,
                                    self.plan)


def spec_to_dict(spec: SequenceSpec) -> dict:
    return {"kind": spec.kind, "alpha": spec.alpha, "variant": spec.variant,
            "pulses": spec.pulses.to_dict(), "tau": spec.tau,
            "n_echoes": spec.n_echoes, "times": list(spec.times)}


def spec_from_dict(data: dict) -> SequenceSpec:
    return SequenceSpec(kind=data["kind"], alpha=data["alpha"],
                        variant=data["variant"],
                        pulses=PulseModel.from_dict(data["pulses"]),
                        tau=data["tau"], n_echoes=data["n_echoes"],
                        times=tuple(data["times"]))


# --- the standard experiments ---------------------------------------------------


def run_hahn(config: EnsembleConfig, times, n_realizations: int, seed: int,
             variant: str = VARIANT_FULL, map_fn=None) -> ResponseSeries:
    """Single ideal refocusing pulse at t/2 for every total time in ``times``."""
    spec = SequenceSpec(kind=KIND_HAHN, alpha="x", variant=variant,
                        pulses=IDEAL_PULSES, times=tuple(times))
    return run_spec(config, spec, n_realizations, seed, map_fn)


def run_cpmg(config: EnsembleConfig, tau: float, n_pulses: int,
             n_realizations: int, seed: int,
             pulses: PulseModel = IDEAL_PULSES, alpha: str = "x",
             variant: str = VARIANT_FULL, map_fn=None) -> ResponseSeries:
    """Pulse train at (2n+1) tau with echoes recorded at 2n tau."""
    spec = SequenceSpec(kind=KIND_TRAIN, alpha=alpha, variant=variant,
                        pulses=pulses, tau=tau, n_echoes=n_pulses)
    return run_spec(config, spec, n_realizations, seed, map_fn)


def run_apcp(config: EnsembleConfig, tau: float, n_pulses: int,
             n_realizations: int, seed: int,
             pulses: PulseModel = IDEAL_PULSES, alpha: str = "x",
             variant: str = VARIANT_FULL, map_fn=None) -> ResponseSeries:
    """Same train with the pulse axis alternating between +x and -x."""
    flipped = replace(pulses, axis_policy=AXIS_ALTERNATING_X)
    return run_cpmg(config, tau, n_pulses, n_realizations, seed,
                    pulses=flipped, alpha=alpha, variant=variant,
                    map_fn=map_fn)


def run_longitudinal(config: EnsembleConfig, tau: float, n_pulses: int,
                     n_realizations: int, seed: int,
                     pulses: PulseModel = IDEAL_PULSES,
                     variant: str = VARIANT_FULL, map_fn=None
                     ) -> ResponseSeries:
    """z-axis response at the echo times of the same pulse train.

    Total z is conserved between pulses, so each record represents the
    whole inter-pulse window after the corresponding pulse count.
    """
    return run_cpmg(config, tau, n_pulses, n_realizations, seed,
                    pulses=pulses, alpha="z", variant=variant, map_fn=map_fn)


# --- derived metrics -------------------------------------------------------------


class MatrixCapture:
    """map_fn shim that keeps the per-realization response matrix.

    Pass an instance as ``map_fn`` to any run function; after the run,
    ``rows`` holds the stacked (n_realizations, n_records) array that the
    series statistics were computed from.  Statistics that need the
    realization axis (jackknife errors, windowed per-realization means)
    start from here instead of re-running the ensemble.
    """

    def __init__(self, inner=map):
        self.inner = inner
        self.rows = None

    def __call__(self, fn, iterable):
        out = list(self.inner(fn, iterable))
        self.rows = np.stack(out)
        return out


def windowed_mean(series: ResponseSeries, matrix: np.ndarray,
                  window: tuple) -> tuple[float, float]:
    """Mean response over a time window with a realization-level error.

    Echoes inside one realization are correlated, so the standard error
    of a windowed mean must come from the spread of per-realization
    window means, not from combining per-time standard errors.
    """
    lo, hi = window
    keep = (series.times >= lo) & (series.times <= hi) & \
           (series.echo_index > 0)
    if not keep.any():
        raise ConfigError("window contains no echoes")
    w = matrix[:, keep].mean(axis=1)
    if w.shape[0] < 2:
        raise ConfigError("need at least two realizations for an error")
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(w.shape[0]))


def matched_even_odd_ratio(series: ResponseSeries, matrix: np.ndarray,
                           window: tuple) -> AsymmetryMetric:
    """Even/odd echo ratio with the even curve sampled at odd echo times.

    The plain windowed-mean ratio of a decaying train sits above one even
    without any parity physics, because even echoes sample earlier times
    than odd ones.  Here every interior odd echo is compared against the
    log-midpoint of its two even neighbors, which removes that skew to
    second order in the envelope curvature; a genuine parity alternation
    survives the interpolation untouched.  Errors are leave-one-out
    jackknife over realizations, so echo-echo and even-odd correlations
    are fully accounted for.  The estimator needs a positive even-echo
    envelope inside the window (true wherever the ratio is a meaningful
    observable); pairs with a non-positive anchor are dropped and the
    metric is nan when none survive.
    """
    lo, hi = window
    if matrix.ndim != 2 or matrix.shape[1] != series.times.size:
        raise ConfigError("matrix does not match the series record grid")
    inside = (series.times >= lo) & (series.times <= hi) & \
             (series.echo_index > 0) & (series.parity == 1)
    # interior only: both even neighbors must themselves be echoes
    idx = [j for j in np.nonzero(inside)[0]
           if j - 1 >= 1 and j + 1 < series.times.size]
    if not idx:
        raise ConfigError("window needs an odd echo with even neighbors")
    idx = np.asarray(idx)

    col_sums = matrix.sum(axis=0)
    n_real = matrix.shape[0]

    def evaluate(sums, count):
        mbar = sums / count
        good = (mbar[idx - 1] > 0) & (mbar[idx + 1] > 0)
        if not good.any():
            return math.nan, math.nan, math.nan
        even = float(np.sqrt(mbar[idx - 1][good] * mbar[idx + 1][good]).mean())
        odd = float(mbar[idx[good]].mean())
        return (even / odd if odd else math.nan), even, odd

    ratio, even_mean, odd_mean = evaluate(col_sums, n_real)
    if n_real < 2:
        raise ConfigError("need at least two realizations for an error")
    reps = np.array([evaluate(col_sums - matrix[i], n_real - 1)
                     for i in range(n_real)])

    def jack_se(values):
        # se_jk = sqrt((n-1)/n sum (theta_i - mean)^2)
        if np.isnan(values).any():
            return math.nan
        return float(values.std(ddof=0) * math.sqrt(n_real - 1.0))

    return AsymmetryMetric(
        even_mean=even_mean, odd_mean=odd_mean, ratio=ratio,
        even_stderr=jack_se(reps[:, 1]), odd_stderr=jack_se(reps[:, 2]),
        ratio_stderr=jack_se(reps[:, 0]),
        n_even=int(np.unique(np.concatenate([idx - 1, idx + 1])).size),
        n_odd=int(idx.size), window=(lo, hi))


def even_odd_asymmetry(series: ResponseSeries, window: tuple,
                       floor: float = 1e-12) -> AsymmetryMetric:
    """Mean echo response split by echo parity inside [window0, window1].

    The ratio is even_mean/odd_mean, reported as nan when |odd_mean| does
    not clear ``floor``.  Group standard errors combine the per-time
    standard errors in quadrature; the ratio error uses first-order
    propagation, which overstates the uncertainty when the two groups are
    positively correlated (they share realizations), so significance
    conclusions drawn from it are conservative.
    """
    lo, hi = window
    inside = (series.times >= lo) & (series.times <= hi) & \
             (series.echo_index > 0)
    even = inside & (series.parity == 0)
    odd = inside & (series.parity == 1)
    if not even.any() or not odd.any():
        raise ConfigError("window needs at least one echo of each parity")

    def group(mask):
        k = int(mask.sum())
        m = float(series.mean[mask].mean())
        se = float(np.sqrt(np.sum(series.stderr[mask] ** 2)) / k)
        return m, se, k

    even_mean, even_se, n_even = group(even)
    odd_mean, odd_se, n_odd = group(odd)
    if abs(odd_mean) > floor:
        ratio = even_mean / odd_mean
        ratio_se = abs(ratio) * math.hypot(
            even_se / even_mean if even_mean else 0.0, odd_se / odd_mean)
    else:
        ratio, ratio_se = math.nan, math.nan
    return AsymmetryMetric(even_mean=even_mean, odd_mean=odd_mean,
                           ratio=ratio, even_stderr=even_se,
                           odd_stderr=odd_se, ratio_stderr=ratio_se,
                           n_even=n_even, n_odd=n_odd, window=(lo, hi))


def relative_tail_drop(series: ResponseSeries, fraction: float = 0.5
                       ) -> float:
    """Relative fall of |mean| from the start to the end of the trailing
    ``fraction`` of the time span; small or negative values mean plateau."""
    if not 0 < fraction <= 1:
        raise ConfigError("fraction must be in (0, 1]")
    t_end = series.times[-1]
    cut = t_end - fraction * (t_end - series.times[0])
    idx = np.nonzero(series.times >= cut)[0]
    if idx.size < 2:
        raise ConfigError("tail window needs at least two records")
    first, last = abs(series.mean[idx[0]]), abs(series.mean[idx[-1]])
    if first == 0:
        return math.nan
    return (first - last) / first
