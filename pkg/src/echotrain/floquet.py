"""One-period propagator spectra and what the drive does with them.

The stroboscopic dynamics of a pulse train is generated by the one-period
unitary U_F = U(tau) R[pi(1+eps)] U(tau).  Everything downstream lives in
its eigensystem: quasienergies phi_k on the principal branch (-pi, pi],
squared matrix elements of the collective operators between Floquet
states, the pair histogram of downfolded quasienergy differences on
[0, pi], and the element-weighted version of that histogram.  The response
after m periods is recovered from the spectrum alone, which is the main
cross-check against direct propagation.

Dense-matrix territory: everything here scales as 4^N in memory, so the
model-size cap from the dense helpers applies throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur

from . import kernels
from .engine import EvolutionPlan, Propagator
from .errors import ConfigError, ResourceLimitError
from .model import DENSE_LIMIT, PulseSchedule, SpinModel

# bins of width 2 beta cover [0, pi]
DEFAULT_BETA = math.pi * 5e-6

_UNITARY_TOL = 1e-10
_RECONSTRUCT_TOL = 1e-8


@dataclass
class FloquetSpectrum:
    """Eigensystem of a one-period unitary, vectors in columns."""

    quasienergies: np.ndarray
    vectors: np.ndarray
    n_spins: int
    _elements: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def element_matrix(self, alpha: str) -> np.ndarray:
        """Dense |<psi_j| M_alpha |psi_k>|^2, cached per axis."""
        w = self._elements.get(alpha)
        if w is None:
            d = self.dim
            mv = np.empty((d, d), dtype=complex)
            if alpha == "x":
                kernels.apply_mx_cols(mv, self.vectors, self.n_spins)
            elif alpha == "y":
                kernels.apply_my_cols(mv, self.vectors, self.n_spins)
            elif alpha == "z":
                zv = kernels.zvalues(self.n_spins, np.empty(d))
                kernels.scale_diag_cols(mv, self.vectors, zv)
            else:
                raise ConfigError(f"unknown collective axis {alpha!r}")
            b = self.vectors.conj().T @ mv
            w = (b.real ** 2 + b.imag ** 2)
            self._elements[alpha] = w
        return w


@dataclass(frozen=True)
class MatrixElementMap:
    """Entries of an element matrix above a display threshold.

    ``full_sum`` keeps the unthresholded total so sum rules survive the
    truncation.
    """

    j: np.ndarray
    k: np.ndarray
    value: np.ndarray
    phi_j: np.ndarray
    phi_k: np.ndarray
    alpha: str
    threshold: float
    full_sum: float


@dataclass(frozen=True)
class QuasienergyHistogram:
    """Binned pair statistics of downfolded quasienergy differences."""

    bin_centers: np.ndarray
    values: np.ndarray
    half_width: float
    kind: str  # "count" or "density"

    def total(self) -> float:
        if self.kind == "count":
            return float(self.values.sum())
        return float(self.values.sum() * 2.0 * self.half_width)


def build_floquet(model: SpinModel, schedule: PulseSchedule, tau: float,
                  plan: EvolutionPlan | None = None,
                  pulse_index: int = 0) -> np.ndarray:
    """Dense one-period unitary: evolve tau, pulse, evolve tau.

    The pulse angles are those of ``schedule.angles(pulse_index)``; a
    schedule with per-pulse randomness has no single period operator, so
    only the chosen pulse index defines the returned matrix.
    """
    if model.n_spins > DENSE_LIMIT:
        raise ResourceLimitError(
            f"one-period matrix capped at {DENSE_LIMIT} spins")
    if not tau > 0:
        raise ConfigError("pulse spacing tau must be positive")
    prop = Propagator(model, plan)
    u = np.eye(model.dim, dtype=complex)
    prop.evolve_cols(u, tau)
    az, ang = schedule.angles(pulse_index)
    prop.pulse_cols(u, az, ang)
    prop.evolve_cols(u, tau)
    return u


def diagonalize(u: np.ndarray, tol: float = _UNITARY_TOL) -> FloquetSpectrum:
    """Unitary eigensystem via a complex Schur decomposition.

    Schur keeps the vector basis orthonormal even through degenerate or
    tightly clustered eigenphases, which plain nonsymmetric
    diagonalization does not guarantee.
    """
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ConfigError("one-period operator must be square")
    dim = u.shape[0]
    n = dim.bit_length() - 1
    if (1 << n) != dim:
        raise ConfigError("operator dimension must be a power of two")
    gram = u.conj().T @ u
    gram[np.diag_indices(dim)] -= 1.0
    if np.abs(gram).max() > tol:
        raise ConfigError("input is not unitary within tolerance")
    t, z = schur(u, output="complex")
    phases = np.angle(np.diagonal(t))
    residual = np.abs((z * np.exp(1j * phases)) @ z.conj().T - u).max()
    if residual > _RECONSTRUCT_TOL:
        raise ConfigError(
            f"spectral reconstruction residual {residual:.2e} too large")
    return FloquetSpectrum(quasienergies=phases, vectors=np.ascontiguousarray(z),
                           n_spins=n)


def matrix_elements(spectrum: FloquetSpectrum, alpha: str,
                    threshold: float) -> MatrixElementMap:
    """All squared elements of M_alpha, emitting those >= threshold."""
    w = spectrum.element_matrix(alpha)
    j, k = np.nonzero(w >= threshold)
    phis = spectrum.quasienergies
    return MatrixElementMap(j=j, k=k, value=w[j, k], phi_j=phis[j],
                            phi_k=phis[k], alpha=alpha, threshold=threshold,
                            full_sum=float(w.sum()))


def reconstruct_response(spectrum: FloquetSpectrum, alpha: str, m
                         ) -> np.ndarray:
    """Normalized response after m periods from the spectrum alone.

    (4 / (N 2^N)) sum_jk e^{i (phi_j - phi_k) m} |M_alpha^{jk}|^2; the
    imaginary part cancels by symmetry of the element matrix and is
    discarded.
    """
    w = spectrum.element_matrix(alpha)
    phis = spectrum.quasienergies
    norm = 4.0 / (spectrum.n_spins * spectrum.dim)
    m_arr = np.atleast_1d(np.asarray(m))
    out = np.empty(m_arr.shape[0])
    for slot, steps in enumerate(m_arr):
        c = np.exp(1j * phis * steps)
        out[slot] = norm * np.real(c @ (w @ c.conj()))
    return out if np.ndim(m) else float(out[0])


def _pair_histogram(spectrum: FloquetSpectrum, beta: float,
                    weights: np.ndarray | None) -> np.ndarray:
    """Accumulate pairs (including j = k) by downfolded difference.

    Row-blocked so the full difference matrix is never materialized; with
    the default beta there are ~1e5 bins, far fewer than pairs.
    """
    if not beta > 0:
        raise ConfigError("bin half-width must be positive")
    phis = spectrum.quasienergies
    dim = phis.shape[0]
    width = 2.0 * beta
    n_bins = int(math.ceil(math.pi / width))
    hist = np.zeros(n_bins)
    block = max(1, (1 << 22) // max(dim, 1))
    for start in range(0, dim, block):
        stop = min(start + block, dim)
        diff = np.abs(phis[start:stop, None] - phis[None, :])
        np.minimum(diff, 2.0 * math.pi - diff, out=diff)
        # keep each unordered pair once: columns k <= row j
        rows, cols = np.tril_indices(stop - start, k=start, m=dim)
        idx = np.minimum((diff[rows, cols] / width).astype(np.int64),
                         n_bins - 1)
        w = None if weights is None else weights[rows + start, cols]
        hist += np.bincount(idx, weights=w, minlength=n_bins)
    return hist


def histogram_P(spectrum: FloquetSpectrum, beta: float = DEFAULT_BETA
                ) -> QuasienergyHistogram:
    """Pair counts of downfolded quasienergy differences on [0, pi]."""
    hist = _pair_histogram(spectrum, beta, None)
    centers = (np.arange(hist.shape[0]) + 0.5) * 2.0 * beta
    return QuasienergyHistogram(bin_centers=centers, values=hist,
                                half_width=beta, kind="count")


def weighted_sigma(spectrum: FloquetSpectrum, alpha: str,
                   beta: float = DEFAULT_BETA) -> QuasienergyHistogram:
    """Element-weighted difference distribution, normalized to unit integral."""
    w = spectrum.element_matrix(alpha)
    hist = _pair_histogram(spectrum, beta, w)
    total = hist.sum()
    if total > 0:
        hist = hist / (total * 2.0 * beta)
    centers = (np.arange(hist.shape[0]) + 0.5) * 2.0 * beta
    return QuasienergyHistogram(bin_centers=centers, values=hist,
                                half_width=beta, kind="density")
