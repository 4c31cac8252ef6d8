"""State-vector evolution engine: propagators, pulses, typicality traces.

Propagation schemes:

* ``diagonal``: exact phase multiplication, valid only for the reduced
  (all-commuting) model; one pass per segment regardless of duration.
* ``chebyshev``: polynomial expansion of exp(-i t H) with Bessel-function
  coefficients on the spectrum rescaled by a safe bound; truncation chosen
  so the neglected tail is below a tolerance.  The iterate norm can only
  stay <= 1 when the bound really dominates ||H||, so any growth beyond
  1 + tol aborts with a divergence error rather than returning garbage.
* ``trotter``: second-order symmetric splitting into the diagonal part and
  the individual flip-flop pair rotations (lexicographic pair order).

Traces of observables are estimated by quantum typicality: a Haar-random
state |r> and its partner M_alpha |r> are co-propagated through the same
schedule, and <U r| M_alpha |U a> * 2^N estimates Tr[M U M U+] at each
record time.  Normalization against the t = 0 value is left to callers so
they can make the estimate exact at zero by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from . import kernels
from .errors import ConfigError, DivergenceError
from .model import (DENSE_LIMIT, PulseSchedule, SpinModel, VARIANT_REDUCED,
                    dense_collective, rotation_matrix)

METHOD_AUTO = "auto"
METHOD_DIAGONAL = "diagonal"
METHOD_CHEBYSHEV = "chebyshev"
METHOD_TROTTER = "trotter"

DEFAULT_TROTTER_SUBDIVISIONS = 256


@dataclass(frozen=True)
class EvolutionPlan:
    """How to turn exp(-i duration H) into kernel calls."""

    method: str = METHOD_AUTO
    trotter_step: float | None = None  # None: duration / 256 per segment
    chebyshev_tol: float = 1e-13
    divergence_tol: float = 1e-8
    bound_override: float | None = None

    def __post_init__(self):
        if self.method not in (METHOD_AUTO, METHOD_DIAGONAL,
                               METHOD_CHEBYSHEV, METHOD_TROTTER):
            raise ConfigError(f"unknown evolution method {self.method!r}")
        if self.trotter_step is not None and self.trotter_step <= 0:
            raise ConfigError("trotter_step must be positive")
        if not 0 < self.chebyshev_tol < 1e-3:
            raise ConfigError("chebyshev_tol out of range")


class Propagator:
    """Per-model evolution state: cached phases, scaled terms, scratch."""

    def __init__(self, model: SpinModel, plan: EvolutionPlan | None = None):
        self.model = model
        self.plan = plan or EvolutionPlan()
        method = self.plan.method
        if method == METHOD_AUTO:
            method = (METHOD_DIAGONAL if model.variant == VARIANT_REDUCED
                      else METHOD_CHEBYSHEV)
        if method == METHOD_DIAGONAL and model.variant != VARIANT_REDUCED:
            raise ConfigError(
                "diagonal propagation is exact only for the reduced model")
        self.method = method
        # kernel wants the bare zz coefficients, which sit at J/2 here
        self.diag = kernels.diag_energies(
            np.ascontiguousarray(0.5 * model.couplings, dtype=np.float64),
            np.ascontiguousarray(model.fields, dtype=np.float64),
            np.empty(model.dim))
        _, masks, weights = model.flip_flop_terms()
        self.masks = np.ascontiguousarray(masks)
        self.weights = np.ascontiguousarray(weights)
        self.bound = (self.plan.bound_override
                      if self.plan.bound_override is not None
                      else model.spectral_bound())
        if self.bound <= 0 and self.plan.bound_override is not None:
            raise ConfigError("spectral bound must be positive")
        if self.bound == 0.0:
            # H = 0: any positive scale works and keeps scaled terms finite
            self.bound = 1.0
        self._diag_scaled = self.diag / self.bound
        self._weights_scaled = self.weights / self.bound
        self._phase_cache: dict[float, np.ndarray] = {}
        self._trotter_cache: dict[float, tuple] = {}
        self._coeff_cache: dict[float, np.ndarray] = {}
        self._scratch: list[np.ndarray] | None = None
        self._scratch_cols: list[np.ndarray] | None = None

    # -- evolution ------------------------------------------------------------

    def evolve(self, state: np.ndarray, duration: float) -> np.ndarray:
        """Advance ``state`` by exp(-i duration H), in place."""
        if duration == 0.0:
            return state
        if self.method == METHOD_DIAGONAL:
            kernels.phase_multiply(state, self._phases(duration))
        elif self.method == METHOD_CHEBYSHEV:
            self._chebyshev(state, duration, cols=False)
        else:
            self._trotter(state, duration, cols=False)
        return state

    def evolve_cols(self, mat: np.ndarray, duration: float) -> np.ndarray:
        """Same as evolve, on a (dim, ncols) column block."""
        if duration == 0.0:
            return mat
        if self.method == METHOD_DIAGONAL:
            kernels.phase_multiply_cols(mat, self._phases(duration))
        elif self.method == METHOD_CHEBYSHEV:
            self._chebyshev(mat, duration, cols=True)
        else:
            self._trotter(mat, duration, cols=True)
        return mat

    def pulse(self, state: np.ndarray, azimuths: np.ndarray,
              angles: np.ndarray) -> np.ndarray:
        """Instantaneous product of single-spin rotations, in place."""
        return self._pulse_impl(state, azimuths, angles, cols=False)

    def pulse_cols(self, mat: np.ndarray, azimuths: np.ndarray,
                   angles: np.ndarray) -> np.ndarray:
        return self._pulse_impl(mat, azimuths, angles, cols=True)

    # -- internals --------------------------------------------------------------

    def _phases(self, duration: float) -> np.ndarray:
        cached = self._phase_cache.get(duration)
        if cached is None:
            if len(self._phase_cache) >= 4:
                self._phase_cache.clear()
            cached = np.exp(self.diag * (-1j * duration))
            self._phase_cache[duration] = cached
        return cached

    def _pulse_impl(self, target, azimuths, angles, cols):
        n = self.model.n_spins
        azimuths = np.asarray(azimuths, dtype=float)
        angles = np.asarray(angles, dtype=float)
        if azimuths.shape != (n,) or angles.shape != (n,):
            raise ConfigError("need one azimuth and one angle per spin")
        # exact pi rotations about +x/-x amount to a basis reversal times a
        # constant, which is one cheap pass instead of one pass per spin
        az0 = azimuths[0]
        if (np.all(angles == math.pi) and np.all(azimuths == az0)
                and az0 in (0.0, math.pi)):
            unit = -1j if az0 == 0.0 else 1j
            phase = unit ** n
            if cols:
                kernels.reversal_phase_cols(target, phase)
            else:
                kernels.reversal_phase(target, phase)
            return target
        for j in range(n):
            u = rotation_matrix(azimuths[j], angles[j])
            if cols:
                kernels.qubit_apply_cols(target, j, u[0, 0], u[0, 1],
                                         u[1, 0], u[1, 1])
            else:
                kernels.qubit_apply(target, j, u[0, 0], u[0, 1],
                                    u[1, 0], u[1, 1])
        return target

    def _coefficients(self, duration: float) -> np.ndarray:
        coeffs = self._coeff_cache.get(duration)
        if coeffs is None:
            if len(self._coeff_cache) >= 64:
                self._coeff_cache.clear()
            z = self.bound * abs(duration)
            tol = self.plan.chebyshev_tol
            k_max = int(z + 30 + 12 * z ** (1.0 / 3.0)) + 8
            bess = jv(np.arange(k_max + 1), z)
            tail = np.cumsum(np.abs(bess[::-1]))[::-1]
            keep = np.nonzero(tail < 0.25 * tol)[0]
            order = int(keep[0]) if keep.size else k_max
            order = max(order, 1)
            unit = -1j if duration > 0 else 1j
            coeffs = bess[:order + 1] * (2.0 * unit ** np.arange(order + 1))
            coeffs[0] *= 0.5
            self._coeff_cache[duration] = coeffs
        return coeffs

    def _buffers(self, template, cols):
        attr = "_scratch_cols" if cols else "_scratch"
        bufs = getattr(self, attr)
        if bufs is None or bufs[0].shape != template.shape:
            bufs = [np.empty_like(template) for _ in range(3)]
            setattr(self, attr, bufs)
        return bufs

    def _chebyshev(self, target, duration, cols):
        coeffs = self._coefficients(duration)
        acc, t_prev, t_cur = self._buffers(target, cols)
        step = kernels.cheb_step_cols if cols else kernels.cheb_step
        norm2 = kernels.sqnorm_cols if cols else kernels.sqnorm
        add = kernels.axpy_cols if cols else kernels.axpy
        # iterates of a properly bounded H' can never exceed the input norm
        limit = (1.0 + self.plan.divergence_tol) ** 2 * norm2(target)
        np.multiply(target, coeffs[0], out=acc)
        np.copyto(t_prev, target)
        self._hmatvec(t_cur, target, cols)
        add(acc, t_cur, coeffs[1])
        for k in range(2, coeffs.shape[0]):
            # cheb_step may alias out with prev: each element is read once
            # and then overwritten, so reusing t_prev as the output is safe
            t_next = t_prev
            step(t_next, t_cur, t_prev, self._diag_scaled, self.masks,
                 self._weights_scaled)
            if norm2(t_next) > limit:
                raise DivergenceError(
                    "Chebyshev iterate left the unit ball; spectral bound "
                    f"{self.bound:.6g} is too small for this model")
            add(acc, t_next, coeffs[k])
            t_prev, t_cur = t_cur, t_next
        np.copyto(target, acc)
        return target

    def _hmatvec(self, out, x, cols):
        if cols:
            kernels.scale_diag_cols(out, x, self._diag_scaled)
            kernels.hop_add_cols(out, x, self.masks, self._weights_scaled)
        else:
            kernels.hmatvec(out, x, self._diag_scaled, self.masks,
                            self._weights_scaled)

    def _trotter_tables(self, dt: float):
        tables = self._trotter_cache.get(dt)
        if tables is None:
            if len(self._trotter_cache) >= 4:
                self._trotter_cache.clear()
            half_phase = np.exp(self.diag * (-0.5j * dt))
            ang_half = 0.5 * dt * self.weights
            ang_full = dt * self.weights
            tables = (half_phase, np.cos(ang_half), np.sin(ang_half),
                      np.cos(ang_full), np.sin(ang_full))
            self._trotter_cache[dt] = tables
        return tables

    def _trotter(self, target, duration, cols):
        dt_req = self.plan.trotter_step
        if dt_req is None:
            dt_req = abs(duration) / DEFAULT_TROTTER_SUBDIVISIONS
        n_steps = max(1, math.ceil(abs(duration) / dt_req - 1e-12))
        dt = duration / n_steps
        half_phase, ch, sh, cf, sf = self._trotter_tables(dt)
        pm = kernels.phase_multiply_cols if cols else kernels.phase_multiply
        n_pairs = self.masks.shape[0]
        for _ in range(n_steps):
            pm(target, half_phase)
            for p in range(n_pairs - 1):
                self._pair_rot(target, p, ch[p], sh[p], cols)
            if n_pairs:
                self._pair_rot(target, n_pairs - 1, cf[n_pairs - 1],
                               sf[n_pairs - 1], cols)
            for p in range(n_pairs - 2, -1, -1):
                self._pair_rot(target, p, ch[p], sh[p], cols)
            pm(target, half_phase)
        return target

    def _pair_rot(self, target, p, c, s, cols):
        mask = int(self.masks[p])
        mask_i = mask & (-mask)  # lower of the two set bits
        mask_j = mask ^ mask_i
        if cols:
            kernels.pair_flip_rot_cols(target, mask_i, mask_j, c, s)
        else:
            kernels.pair_flip_rot(target, mask_i, mask_j, c, s)


# --- states and observables ----------------------------------------------------


def random_state(n_spins: int, seed) -> np.ndarray:
    """Haar-random unit vector via normalized complex Gaussians."""
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    dim = 1 << n_spins
    state = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    state /= math.sqrt(kernels.sqnorm(state))
    return state


def apply_collective(state: np.ndarray, alpha: str, n_spins: int
                     ) -> np.ndarray:
    """New vector M_alpha |state| for alpha in {x, y, z}."""
    out = np.empty_like(state)
    if alpha == "x":
        kernels.apply_mx(out, state, n_spins)
    elif alpha == "y":
        kernels.apply_my(out, state, n_spins)
    elif alpha == "z":
        zv = kernels.zvalues(n_spins, np.empty(state.shape[0]))
        np.multiply(state, zv, out=out)
    else:
        raise ConfigError(f"unknown collective axis {alpha!r}")
    return out


def collective_dot(phi: np.ndarray, psi: np.ndarray, alpha: str,
                   n_spins: int) -> complex:
    """<phi| M_alpha |psi>."""
    if alpha == "x":
        return kernels.dot_mx(phi, psi, n_spins)
    if alpha == "y":
        return kernels.dot_my(phi, psi, n_spins)
    if alpha == "z":
        zv = kernels.zvalues(n_spins, np.empty(phi.shape[0]))
        return kernels.dot_diag(phi, psi, zv)
    raise ConfigError(f"unknown collective axis {alpha!r}")


def collective_expectation(state: np.ndarray, alpha: str, n_spins: int
                           ) -> float:
    return collective_dot(state, state, alpha, n_spins).real


def apply_pulse(state: np.ndarray, azimuths, angles) -> np.ndarray:
    """Standalone pulse application (no Hamiltonian needed)."""
    n = int(round(math.log2(state.shape[0])))
    azimuths = np.asarray(azimuths, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if azimuths.shape != (n,) or angles.shape != (n,):
        raise ConfigError("need one azimuth and one angle per spin")
    for j in range(n):
        u = rotation_matrix(azimuths[j], angles[j])
        kernels.qubit_apply(state, j, u[0, 0], u[0, 1], u[1, 0], u[1, 1])
    return state


def evolve(model: SpinModel, state: np.ndarray, duration: float,
           plan: EvolutionPlan | None = None) -> np.ndarray:
    """One-shot evolution; use a Propagator directly for repeated segments."""
    return Propagator(model, plan).evolve(state, duration)


# --- typicality response ---------------------------------------------------------


def _checked_times(pulse_times, record_times, schedule
                   ) -> tuple[np.ndarray, np.ndarray]:
    pulse_times = np.asarray(pulse_times, dtype=float)
    record_times = np.asarray(record_times, dtype=float)
    if pulse_times.size and np.any(np.diff(pulse_times) <= 0):
        raise ConfigError("pulse times must be strictly increasing")
    if np.any(np.diff(record_times) < 0):
        raise ConfigError("record times must be sorted")
    if (pulse_times.size and pulse_times[0] < 0) or \
            (record_times.size and record_times[0] < 0):
        raise ConfigError("times must be non-negative")
    if pulse_times.size and schedule is None:
        raise ConfigError("pulses requested but no schedule given")
    return pulse_times, record_times


def response_estimate(model: SpinModel, schedule: PulseSchedule | None,
                      pulse_times, record_times, alpha: str, seed,
                      plan: EvolutionPlan | None = None) -> np.ndarray:
    """Raw typicality samples of 2^N <U r| M_alpha |U M_alpha r>.

    ``pulse_times`` are when instantaneous pulses fire (pulse k takes its
    angles from ``schedule.angles(k)``); ``record_times`` are when the
    estimator is sampled.  A record coinciding with a pulse samples before
    the pulse fires.  Returns one complex value per record time; callers
    normalize by the t = 0 sample (exactly Tr[M^2] up to typicality noise).
    """
    pulse_times, record_times = _checked_times(pulse_times, record_times,
                                               schedule)
    n = model.n_spins
    prop = Propagator(model, plan)
    r = random_state(n, seed)
    a = apply_collective(r, alpha, n)

    out = np.empty(record_times.shape[0], dtype=complex)
    scale = float(model.dim)
    cursor = 0.0
    next_pulse = 0
    for slot, t_rec in enumerate(record_times):
        # fire every pulse strictly before this record
        while next_pulse < pulse_times.size and \
                pulse_times[next_pulse] < t_rec:
            t_p = pulse_times[next_pulse]
            prop.evolve(r, t_p - cursor)
            prop.evolve(a, t_p - cursor)
            az, ang = schedule.angles(next_pulse)
            prop.pulse(r, az, ang)
            prop.pulse(a, az, ang)
            cursor = t_p
            next_pulse += 1
        prop.evolve(r, t_rec - cursor)
        prop.evolve(a, t_rec - cursor)
        cursor = t_rec
        out[slot] = collective_dot(r, a, alpha, n) * scale
    return out


def response_exact(model: SpinModel, schedule: PulseSchedule | None,
                   pulse_times, record_times, alpha: str,
                   plan: EvolutionPlan | None = None) -> np.ndarray:
    """Exact Tr[U+ M_alpha U M_alpha] at each record time.

    Same sequencing contract as response_estimate, with the trace summed
    over the complete basis instead of sampled from a random vector, so
    the only error left is propagation error.  Costs 4^N memory (three
    dim x dim blocks), hence the dense-size cap.
    """
    pulse_times, record_times = _checked_times(pulse_times, record_times,
                                               schedule)
    n = model.n_spins
    prop = Propagator(model, plan)
    u = np.eye(model.dim, dtype=complex)
    a = dense_collective(alpha, n).astype(complex)
    scratch = np.empty_like(a)

    out = np.empty(record_times.shape[0], dtype=complex)
    cursor = 0.0
    next_pulse = 0
    for slot, t_rec in enumerate(record_times):
        while next_pulse < pulse_times.size and \
                pulse_times[next_pulse] < t_rec:
            t_p = pulse_times[next_pulse]
            prop.evolve_cols(u, t_p - cursor)
            prop.evolve_cols(a, t_p - cursor)
            az, ang = schedule.angles(next_pulse)
            prop.pulse_cols(u, az, ang)
            prop.pulse_cols(a, az, ang)
            cursor = t_p
            next_pulse += 1
        prop.evolve_cols(u, t_rec - cursor)
        prop.evolve_cols(a, t_rec - cursor)
        cursor = t_rec
        # sum_m <u_m| M |a_m> as a Frobenius inner product
        if alpha == "x":
            kernels.apply_mx_cols(scratch, a, n)
        elif alpha == "y":
            kernels.apply_my_cols(scratch, a, n)
        else:
            zv = kernels.zvalues(n, np.empty(model.dim))
            kernels.scale_diag_cols(scratch, a, zv)
        out[slot] = np.vdot(u, scratch)
    return out
