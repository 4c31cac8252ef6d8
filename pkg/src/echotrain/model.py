"""Spin models and pulse schedules built on top of a disorder realization.

Two Hamiltonian variants share the same diagonal (Ising) part
sum_{i<j} (J_ij/2) S_iz S_jz + sum_j h_j S_jz:

* ``full`` adds the secular flip-flop part -(J_ij/8)(S_i+ S_j- + S_i- S_j+),
  i.e. the pair term (J_ij/4)(2 S_iz S_jz - S_ix S_jx - S_iy S_jy);
* ``reduced`` keeps only the diagonal, which makes every term commute and
  the dynamics exactly solvable per realization.

The half-scale convention is fixed by the closed-form echo factor
cos(J_ij t/4) per pair (see closedform.reduced_hahn_product); the density
calibration absorbs the overall coupling scale, so this is a choice of
units for J, not different physics.

Basis convention: computational basis index m has spin j up (s_j = +1/2)
when bit j of m is 0, so m = 0 is the all-up state and flipping spin j is
m ^ (1 << j).

Pulses are instantaneous global rotations by pi*(1 + eps_j) about a
transverse axis.  The rotation-error policy decides how eps varies: a fixed
scalar for every spin and pulse, frozen per-spin randomness (constant in
time), or fresh randomness at every pulse.  Pulse angle draws are keyed by
(seed, pulse index), never by call order, so any evaluation order
reproduces the same schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import DisorderRealization
from .errors import ConfigError, ResourceLimitError

VARIANT_FULL = "full"
VARIANT_REDUCED = "reduced"

EPSILON_UNIFORM = "uniform"
EPSILON_PER_SPIN = "per-spin"
EPSILON_PER_PULSE = "per-pulse"

AXIS_PLUS_X = "plus-x"
AXIS_ALTERNATING_X = "alternating-x"
AXIS_RANDOM_FIXED = "random-fixed"

DEFAULT_EPSILON_INTERVAL = (-0.07, 0.07)

# hard cap for anything that materializes a 2^N x 2^N matrix
DENSE_LIMIT = 14

# spectral-bound slack so Chebyshev scaling never sits exactly at the edge
BOUND_MARGIN = 1.1


@dataclass(frozen=True)
class SpinModel:
    """Hamiltonian data in a fixed bit-order basis."""

    n_spins: int
    couplings: np.ndarray  # (N, N) symmetric, zero diagonal
    fields: np.ndarray     # (N,)
    variant: str = VARIANT_FULL

    def __post_init__(self):
        if self.variant not in (VARIANT_FULL, VARIANT_REDUCED):
            raise ConfigError(f"unknown model variant {self.variant!r}")
        if self.n_spins < 1:
            raise ConfigError("need at least one spin")
        j = np.asarray(self.couplings)
        if j.shape != (self.n_spins, self.n_spins):
            raise ConfigError("couplings shape does not match n_spins")
        if np.asarray(self.fields).shape != (self.n_spins,):
            raise ConfigError("fields shape does not match n_spins")

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def diagonal_energies(self) -> np.ndarray:
        """E[m] = sum_{i<j} (J_ij/2) s_i s_j + sum_j h_j s_j over basis states."""
        n = self.n_spins
        m = np.arange(self.dim, dtype=np.int64)
        # s[j, m] = +-1/2 from bit j of m
        s = 0.5 - ((m[None, :] >> np.arange(n)[:, None]) & 1).astype(float)
        energy = self.fields @ s
        iu = np.triu_indices(n, k=1)
        energy += 0.5 * np.einsum("p,pm,pm->m", self.couplings[iu], s[iu[0]],
                                  s[iu[1]])
        return energy

    def flip_flop_terms(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pairs (i, j), bitmasks, and amplitudes -J_ij/8 of the hop terms.

        Empty for the reduced variant.  The amplitude multiplies
        |...down_i up_j...> <...up_i down_j...| + h.c., i.e. it connects m
        with m ^ mask when exactly one of bits i, j is set in m.
        """
        if self.variant == VARIANT_REDUCED:
            empty = np.zeros(0, dtype=np.int64)
            return empty.reshape(0, 2), empty, np.zeros(0)
        iu = np.triu_indices(self.n_spins, k=1)
        keep = self.couplings[iu] != 0.0
        i, j = iu[0][keep], iu[1][keep]
        pairs = np.stack([i, j], axis=1).astype(np.int64)
        masks = ((1 << i.astype(np.int64)) | (1 << j.astype(np.int64)))
        weights = -0.125 * self.couplings[iu][keep]
        return pairs, masks, weights

    def spectral_bound(self) -> float:
        """Safe overestimate of ||H||, with a fixed 10% margin on top.

        Triangle inequality per term: each field contributes |h|/2, each
        pair at most (3/8)|J| (|J|/8 from the Ising part, |J|/8 from the
        flip-flop block; 3/8 keeps one inequality for both variants).
        """
        iu = np.triu_indices(self.n_spins, k=1)
        raw = (0.5 * np.sum(np.abs(self.fields))
               + 0.375 * np.sum(np.abs(self.couplings[iu])))
        return BOUND_MARGIN * float(raw)

    def dense_hamiltonian(self) -> np.ndarray:
        """Explicit matrix, for small-system checks only."""
        if self.n_spins > DENSE_LIMIT:
            raise ResourceLimitError(
                f"dense Hamiltonian capped at {DENSE_LIMIT} spins")
        h = np.diag(self.diagonal_energies()).astype(complex)
        _, masks, weights = self.flip_flop_terms()
        m = np.arange(self.dim, dtype=np.int64)
        for mask, w in zip(masks, weights):
            sel = m & mask
            hit = (sel != 0) & (sel != mask)  # exactly one of the two bits
            rows = m[hit]
            h[rows, rows ^ mask] += w
        return h


def build_model(realization: DisorderRealization,
                variant: str = VARIANT_FULL) -> SpinModel:
    return SpinModel(n_spins=realization.n_spins,
                     couplings=realization.couplings,
                     fields=realization.fields, variant=variant)


# --- collective observables ---------------------------------------------------


def collective_values_z(n_spins: int) -> np.ndarray:
    """Diagonal of M_z = sum_j S_jz in the basis convention above."""
    m = np.arange(1 << n_spins, dtype=np.int64)
    bits = (m[:, None] >> np.arange(n_spins)[None, :]) & 1
    return np.sum(0.5 - bits.astype(float), axis=1)


def dense_collective(alpha: str, n_spins: int) -> np.ndarray:
    """Dense M_alpha = sum_j S_j,alpha, for small-system checks only."""
    if n_spins > DENSE_LIMIT:
        raise ResourceLimitError(
            f"dense observable capped at {DENSE_LIMIT} spins")
    if alpha == "z":
        return np.diag(collective_values_z(n_spins)).astype(complex)
    if alpha not in ("x", "y"):
        raise ConfigError(f"unknown collective axis {alpha!r}")
    dim = 1 << n_spins
    out = np.zeros((dim, dim), dtype=complex)
    m = np.arange(dim, dtype=np.int64)
    for j in range(n_spins):
        partner = m ^ (1 << j)
        up = (m >> j) & 1 == 0  # S^- connects down<-up
        if alpha == "x":
            out[m, partner] += 0.5
        else:
            out[m[up], partner[up]] += -0.5j
            out[m[~up], partner[~up]] += 0.5j
    return out


# --- pulses -------------------------------------------------------------------


@dataclass(frozen=True)
class PulseModel:
    """How pulse rotation angles and axes are generated."""

    epsilon: float = 0.0
    epsilon_policy: str = EPSILON_UNIFORM
    epsilon_interval: tuple[float, float] = DEFAULT_EPSILON_INTERVAL
    axis_policy: str = AXIS_PLUS_X

    def __post_init__(self):
        if self.epsilon_policy not in (EPSILON_UNIFORM, EPSILON_PER_SPIN,
                                       EPSILON_PER_PULSE):
            raise ConfigError(
                f"unknown epsilon policy {self.epsilon_policy!r}")
        if self.axis_policy not in (AXIS_PLUS_X, AXIS_ALTERNATING_X,
                                    AXIS_RANDOM_FIXED):
            raise ConfigError(f"unknown axis policy {self.axis_policy!r}")
        lo, hi = self.epsilon_interval
        if not lo <= hi:
            raise ConfigError("epsilon_interval must be ordered")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "epsilon_policy": self.epsilon_policy,
            "epsilon_interval": list(self.epsilon_interval),
            "axis_policy": self.axis_policy,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PulseModel":
        kwargs = dict(data)
        if "epsilon_interval" in kwargs:
            kwargs["epsilon_interval"] = tuple(kwargs["epsilon_interval"])
        return cls(**kwargs)


IDEAL_PULSES = PulseModel()


class PulseSchedule:
    """Concrete pulse angles for one realization.

    Frozen draws (per-spin errors, the random-fixed axis) come from child
    streams of the given seed; per-pulse draws are keyed by pulse index
    directly, so ``angles(k)`` is a pure function of (seed, k).
    """

    def __init__(self, model: PulseModel, n_spins: int, seed):
        self.model = model
        self.n_spins = n_spins
        base = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        if base.entropy is None:
            raise ConfigError("pulse schedule needs a real seed")
        self._base = base
        if model.epsilon_policy == EPSILON_PER_SPIN:
            rng = np.random.default_rng(self._child(0))
            lo, hi = model.epsilon_interval
            self._spin_eps = rng.uniform(lo, hi, size=n_spins)
        else:
            self._spin_eps = None
        if model.axis_policy == AXIS_RANDOM_FIXED:
            rng = np.random.default_rng(self._child(1))
            self._axis = float(rng.uniform(0.0, 2.0 * math.pi))
        else:
            self._axis = 0.0

    def _child(self, key: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self._base.entropy,
                                      spawn_key=self._base.spawn_key + (key,))

    def angles(self, pulse_index: int) -> tuple[np.ndarray, np.ndarray]:
        """(azimuths, rotation angles), each shape (n_spins,)."""
        if pulse_index < 0:
            raise ConfigError("pulse index must be >= 0")
        m = self.model
        if m.epsilon_policy == EPSILON_UNIFORM:
            eps = np.full(self.n_spins, m.epsilon)
        elif m.epsilon_policy == EPSILON_PER_SPIN:
            eps = self._spin_eps
        else:
            rng = np.random.default_rng(self._child(2 + pulse_index))
            lo, hi = m.epsilon_interval
            eps = rng.uniform(lo, hi, size=self.n_spins)
        angles = math.pi * (1.0 + eps)
        azimuth = self._axis
        if m.axis_policy == AXIS_ALTERNATING_X and pulse_index % 2 == 1:
            azimuth = math.pi
        azimuths = np.full(self.n_spins, azimuth)
        return azimuths, angles

    def is_ideal(self, pulse_index: int) -> bool:
        """True when pulse k is an exact pi rotation for every spin."""
        m = self.model
        if m.epsilon_policy != EPSILON_UNIFORM or m.epsilon != 0.0:
            return False
        return True


def pulse_angles(model: PulseModel, n_spins: int, seed, pulse_index: int
                 ) -> tuple[np.ndarray, np.ndarray]:
    """One-shot accessor; see PulseSchedule for the keying rules."""
    return PulseSchedule(model, n_spins, seed).angles(pulse_index)


def rotation_matrix(azimuth: float, angle: float) -> np.ndarray:
    """Spin-1/2 rotation by ``angle`` about the transverse axis at
    ``azimuth`` from +x, exp(-i angle (cos az Sx + sin az Sy))."""
    c = math.cos(0.5 * angle)
    s = math.sin(0.5 * angle)
    return np.array([
        [c, -1j * s * np.exp(-1j * azimuth)],
        [-1j * s * np.exp(1j * azimuth), c],
    ])
