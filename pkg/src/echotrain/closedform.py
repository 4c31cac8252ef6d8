"""Closed-form echo decay results for power-law-coupled disordered ensembles.

The free-induction / Hahn-echo decay of a positionally disordered ensemble
with couplings J(r, theta) = (1 - 3 cos^2 theta) / r^d_exponent admits a
closed form when each spin dephases independently in the static field of the
others: a stretched exponential exp(-(t/T2)^(d/3)) in d spatial dimensions,
with a T2 fixed entirely by the spin density and an angular integral.  This
module collects those formulas plus the finite-size product form they limit
to, so simulations can be checked against them without any fitting.

Dimensions enter only through d/3; everything here treats d as a float and
is exact for 1 <= d < 6.  At d >= 6 the governing lattice constant diverges
(the decay is no longer a pure stretched exponential) and the functions that
rely on it refuse to answer.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gamma as _gamma

from .errors import ConfigError

INFINITE = math.inf

# axis conventions for d = 2 planes
AXIS_NORMAL_TO_PLANE = "normal"
AXIS_IN_PLANE = "in-plane"


def lattice_constant(d: float) -> float:
    """Dimensionless constant tying spin density to the dephasing rate.

    Defined by the integral (1/3) * int_0^inf (1 - cos z) / z^(d/3 + 1) dz,
    which evaluates to -(1/3) cos(pi d / 6) Gamma(-d/3).  Computed here in
    the pole-free equivalent form pi / (6 Gamma(1 + d/3) sin(pi d / 6)), so
    d = 3 (where the naive form is 0 * inf) comes out exactly pi/6.

    Parameters
    ----------
    d
        Spatial dimension, 0 < d < 6.  Returns ``math.inf`` for d >= 6,
        where the defining integral diverges at its upper limit.
    """
    if d <= 0:
        raise ConfigError(f"dimension must be positive, got {d}")
    if d >= 6:
        return math.inf
    p = d / 3.0
    return math.pi / (6.0 * _gamma(1.0 + p) * math.sin(math.pi * p / 2.0))


def angular_integral(d: float, axis_mode: str = AXIS_NORMAL_TO_PLANE,
                     quad_points: int = 400) -> float:
    """Integral of |(1 - 3 cos^2 theta) / 4|^(d/3) over unit directions.

    theta is measured from the quantization axis.  For d = 2 the directions
    live on a circle in the sample plane and the result depends on where the
    axis points: ``AXIS_NORMAL_TO_PLANE`` makes every in-plane bond
    perpendicular to it (cos theta = 0, so the integrand is constant), while
    ``AXIS_IN_PLANE`` sweeps theta through the full circle.  For d >= 3 the
    axis choice is immaterial by symmetry.

    Uses Gauss-Legendre quadrature in u = cos(theta); the integrand has a
    kink at the magic angle but no singularity, so a few hundred points give
    ~1e-8 accuracy, plenty for seeding a density calibration.
    """
    if d < 1:
        raise ConfigError(f"dimension must be >= 1, got {d}")
    p = d / 3.0
    if d == 1:
        # two directions along the line, both at theta = 0
        return 2.0 * (2.0 / 4.0) ** p
    if d == 2:
        if axis_mode == AXIS_NORMAL_TO_PLANE:
            return 2.0 * math.pi * (1.0 / 4.0) ** p
        if axis_mode == AXIS_IN_PLANE:
            # |...|^p has kinks where cos^2 phi = 1/3; integrate panel-wise
            # between them so Gauss-Legendre converges spectrally again
            pm = math.acos(1.0 / math.sqrt(3.0))
            edges = [0.0, pm, math.pi - pm, math.pi + pm,
                     2.0 * math.pi - pm, 2.0 * math.pi]
            f = lambda phi: np.abs(1.0 - 3.0 * np.cos(phi) ** 2) ** p / 4.0**p
            return _panel_gauss(f, edges, quad_points)
        raise ConfigError(f"unknown axis mode {axis_mode!r}")
    # d >= 3: directions on S^(d-1); the polar measure sin^(d-2)(theta)
    # leaves an S^(d-2) shell at each theta. Parametrize u = cos(theta) =
    # sin(psi) so the (1-u^2)^((d-3)/2) factor becomes a smooth cos power,
    # and split panels at the magic-angle kinks u = +/- 1/sqrt(3).
    pm = math.asin(1.0 / math.sqrt(3.0))
    edges = [-math.pi / 2.0, -pm, pm, math.pi / 2.0]

    def f(psi):
        u = np.sin(psi)
        return (np.abs(1.0 - 3.0 * u**2) ** p / 4.0**p
                * np.cos(psi) ** (d - 2.0))

    return _sphere_area(d - 2) * _panel_gauss(f, edges, quad_points)


def t2_from_density(d: float, f_s: float,
                    axis_mode: str = AXIS_NORMAL_TO_PLANE) -> float:
    """Predicted 1/e echo time for spin density f_s in d dimensions.

    T2 = [f_s * Lambda(d) * A(d)]^(-3/d) with Lambda from
    :func:`lattice_constant` and A the angular integral above.  Only valid
    where the lattice constant is finite (d < 6).
    """
    if f_s <= 0:
        raise ConfigError(f"density must be positive, got {f_s}")
    lam = lattice_constant(d)
    if not math.isfinite(lam):
        raise ConfigError(
            f"no closed-form T2 for d = {d}: lattice constant diverges")
    a = angular_integral(d, axis_mode=axis_mode)
    return (f_s * lam * a) ** (-3.0 / d)


def density_from_t2(d: float, t2: float,
                    axis_mode: str = AXIS_NORMAL_TO_PLANE) -> float:
    """Inverse of :func:`t2_from_density`: density giving 1/e time t2."""
    if t2 <= 0:
        raise ConfigError(f"target T2 must be positive, got {t2}")
    lam = lattice_constant(d)
    if not math.isfinite(lam):
        raise ConfigError(
            f"no closed-form density for d = {d}: lattice constant diverges")
    a = angular_integral(d, axis_mode=axis_mode)
    return t2 ** (-d / 3.0) / (lam * a)


def hahn_analytic(d: float, t, t2: float = 1.0):
    """Ensemble-averaged Hahn-echo amplitude at total evolution time t.

    exp(-|t/t2|^(d/3)) for finite d < 6; the uniform-coupling (d = inf)
    limit is the Gaussian exp(-(t/t2)^2).  Vectorized over t.

    The stretch exponent d/3 dips below 1 for d < 3, giving the
    characteristic infinite initial slope of dilute low-dimensional
    ensembles; nothing here regularizes that, by design.
    """
    t = np.asarray(t, dtype=float)
    if math.isinf(d):
        return np.exp(-((t / t2) ** 2))
    if d >= 6:
        raise ConfigError(f"no closed-form echo decay for d = {d}")
    return np.exp(-np.abs(t / t2) ** (d / 3.0))


def reduced_hahn_product(couplings: np.ndarray, t) -> np.ndarray:
    """Exact Ising-model Hahn echo for one coupling matrix, no sampling.

    For purely longitudinal pair couplings the echo factorizes spin by
    spin: M(t) = (1/N) sum_i prod_{j != i} cos(J_ij t / 4).  Evaluating it
    costs O(N^2) per time point, so it doubles as a cheap oracle for the
    state-vector engine on the reduced model.

    Parameters
    ----------
    couplings
        Symmetric (N, N) matrix of pair couplings, zero diagonal.
    t
        Scalar or array of total evolution times.
    """
    j = np.asarray(couplings, dtype=float)
    if j.ndim != 2 or j.shape[0] != j.shape[1]:
        raise ConfigError("couplings must be a square matrix")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    # cos factors: (T, N, N); diagonal cos(0) = 1 never suppresses anything
    c = np.cos(0.25 * j[None, :, :] * t_arr[:, None, None])
    per_spin = np.prod(c, axis=2)
    out = per_spin.mean(axis=1)
    return out if np.ndim(t) else float(out[0])


def couplings_infinite_d(n_spins: int, target_t2: float = 1.0) -> float:
    """Uniform coupling strength J whose N-spin echo hits 1/e at target_t2.

    In the all-to-all limit every pair carries the same J and the Ising
    echo is cos^(N-1)(2 J t), so the calibration condition
    cos^(N-1)(2 J t2) = 1/e inverts in closed form.  Returned in the
    convention where the echo is cos^(N-1)(2 J t); the Hamiltonian matrix
    entry corresponding to it is 8 J (see disorder module).
    """
    if n_spins < 2:
        raise ConfigError("need at least two spins for a pair coupling")
    if target_t2 <= 0:
        raise ConfigError(f"target T2 must be positive, got {target_t2}")
    c = math.exp(-1.0 / (n_spins - 1))
    return math.acos(c) / (2.0 * target_t2)


def infinite_d_hahn_finite(n_spins: int, j: float, t) -> np.ndarray:
    """Finite-N uniform-coupling echo cos^(N-1)(2 J t), vectorized."""
    t = np.asarray(t, dtype=float)
    return np.cos(2.0 * j * t) ** (n_spins - 1)


def _sphere_area(n: int) -> float:
    # surface area of S^n embedded in R^(n+1)
    return 2.0 * math.pi ** ((n + 1) / 2.0) / _gamma((n + 1) / 2.0)


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GAUSS_CACHE:
        _GAUSS_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GAUSS_CACHE[n]


def _panel_gauss(f, edges, n: int) -> float:
    x, w = _gauss_nodes(n)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        h = 0.5 * (b - a)
        total += h * float(np.sum(w * f(a + h * (x + 1.0))))
    return total
