"""Pulse-driven dynamics of positionally disordered dipolar spin ensembles.

Simulates echo trains (Hahn, CPMG, alternating-phase CPMG) on spin-1/2
ensembles with power-law pair couplings and static disorder, via quantum
typicality on exact state vectors, and analyzes the drive's Floquet spectrum.
"""

from .closedform import (
    AXIS_IN_PLANE,
    AXIS_NORMAL_TO_PLANE,
    INFINITE,
    couplings_infinite_d,
    hahn_analytic,
    infinite_d_hahn_finite,
    lattice_constant,
    reduced_hahn_product,
    t2_from_density,
)
from .disorder import EnsembleConfig, calibrate_density, realize
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateGeometryError,
    DivergenceError,
    EchotrainError,
    ResourceLimitError,
)
from .floquet import (
    FloquetSpectrum,
    build_floquet,
    diagonalize,
    histogram_P,
    matrix_elements,
    reconstruct_response,
    weighted_sigma,
)
from .model import (
    VARIANT_FULL,
    VARIANT_REDUCED,
    PulseModel,
    PulseSchedule,
    SpinModel,
    build_model,
)
from .protocol import (
    MatrixCapture,
    ResponseSeries,
    even_odd_asymmetry,
    matched_even_odd_ratio,
    relative_tail_drop,
    run_apcp,
    run_cpmg,
    run_hahn,
    run_longitudinal,
    windowed_mean,
)
from .runner import RunConfig, run

__version__ = "0.1.0"
