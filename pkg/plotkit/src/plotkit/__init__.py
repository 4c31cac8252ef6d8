"""Figures from simulation run directories.

Reads the CSV-plus-metadata layout that the simulator CLI writes, and
renders three figure kinds: echo-response time series with optional
analytic overlays, thresholded matrix-element maps, and quasienergy
difference histograms.
"""

from .figures import FigureRequest, overlay_curve, parse_overlay, render
from .io import SCHEMA_VERSION, RunDirectory, SchemaError, load_run

__version__ = "0.1.0"
