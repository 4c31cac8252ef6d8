"""Figure rendering.

Three kinds, one run directory (or several, for series) per figure.
Rendering is pure consumption: input arrays are never written back, and
identical inputs give byte-identical image files under a fixed backend
and library version.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import RunDirectory, SchemaError, load_run

KINDS = ("series", "floquet_map", "histogram")

_SERIES_LABELS = {"hahn": "single-echo response",
                  "cpmg": "transverse response",
                  "apcp": "alternating-axis response",
                  "longitudinal": "z response"}


@dataclass(frozen=True)
class FigureRequest:
    kind: str
    inputs: tuple = ()
    overlays: tuple = ()        # parsed overlay dicts
    logx: bool = False
    logy: bool = False
    counts: bool = False        # histogram kind: raw pair counts, not density
    out: str = "figure.png"


def parse_overlay(text: str) -> dict:
    """Overlay spec like "d=2,t2=1" into {"d": 2.0, "t2": 1.0}."""
    fields = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        key = key.strip().lower()
        if key not in ("d", "t2") or not value:
            raise SchemaError(f"bad overlay spec {text!r}: expected "
                              "d=<dim>,t2=<time>")
        if value.strip().lower() in ("inf", "infinite"):
            fields[key] = math.inf
        else:
            try:
                fields[key] = float(value)
            except ValueError:
                raise SchemaError(f"bad overlay spec {text!r}: "
                                  f"{value!r} is not a number") from None
    fields.setdefault("t2", 1.0)
    if "d" not in fields:
        raise SchemaError(f"overlay spec {text!r} needs d=<dim>")
    return fields


def overlay_curve(d: float, t2: float, times: np.ndarray) -> np.ndarray:
    """Echo-decay law exp(-(t/T2)^(d/3)); the d -> inf limit is Gaussian."""
    scaled = np.asarray(times, dtype=float) / t2
    if math.isinf(d):
        return np.exp(-scaled ** 2)
    return np.exp(-scaled ** (d / 3.0))


def _overlay_label(spec: dict) -> str:
    if math.isinf(spec["d"]):
        return "exp(-(t/T2)^2)"
    num = spec["d"] / 3.0
    return f"exp(-(t/T2)^{num:.3g})"


def _render_series(runs: list[RunDirectory], request: FigureRequest, ax):
    for run in runs:
        table = run.table("response")
        label = _SERIES_LABELS.get(run.experiment, run.experiment)
        if len(runs) > 1:
            label = f"{run.path.name}: {label}"
        ax.errorbar(table["time"], table["mean"], yerr=table["stderr"],
                    fmt="o-", markersize=3, linewidth=0.8, capsize=2,
                    label=label)
    times = np.concatenate([run.table("response")["time"] for run in runs])
    grid = np.unique(times)
    for spec in request.overlays:
        ax.plot(grid, overlay_curve(spec["d"], spec["t2"], grid), "--",
                linewidth=1.0, label=_overlay_label(spec))
    ax.set_xlabel("time")
    ax.set_ylabel("response")
    if request.overlays or len(runs) > 1:
        ax.legend(frameon=False)


def _render_map(run: RunDirectory, ax, fig):
    table = run.table("map")
    if table["value"].size == 0:
        warnings.warn(f"matrix-element map in {run.path} is empty after "
                      "thresholding; rendering blank axes", stacklevel=2)
        ax.set_xlabel("phi_j")
        ax.set_ylabel("phi_k")
        return
    order = np.argsort(table["value"])   # strongest drawn last
    sc = ax.scatter(table["phi_j"][order], table["phi_k"][order],
                    c=table["value"][order], s=8, cmap="viridis")
    fig.colorbar(sc, ax=ax, label="squared matrix element")
    ax.set_xlabel("phi_j")
    ax.set_ylabel("phi_k")
    ax.set_aspect("equal")


def _render_histogram(run: RunDirectory, request: FigureRequest, ax):
    name = "histogram" if request.counts else "sigma"
    table = run.table(name)
    centers = table["bin_center"]
    if centers.size == 0:
        raise SchemaError(f"{name} table in {run.path} has no bins")
    width = 2.0 * centers[0]            # centers sit at (i + 1/2) * 2 beta
    ax.stairs(table["value"], np.append(centers - width / 2.0,
                                        centers[-1] + width / 2.0))
    ax.set_xlabel(f"quasienergy difference (bin width 2b = {width:.3g})")
    ax.set_ylabel("pair count" if request.counts else "normalized density")


def render(request: FigureRequest) -> Path:
    """Draw one figure and write it to request.out; returns the path."""
    if request.kind not in KINDS:
        raise SchemaError(f"unknown figure kind {request.kind!r}")
    if not request.inputs:
        raise SchemaError("no input directory given")
    runs = [load_run(p) for p in request.inputs]
    if request.kind != "series" and len(runs) > 1:
        raise SchemaError(f"{request.kind} takes a single input directory")

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    try:
        if request.kind == "series":
            _render_series(runs, request, ax)
        elif request.kind == "floquet_map":
            _render_map(runs[0], ax, fig)
        else:
            _render_histogram(runs[0], request, ax)
        if request.logx:
            ax.set_xscale("log")
        if request.logy:
            ax.set_yscale("log")
        fig.tight_layout()
        out = Path(request.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out, dpi=150)
    finally:
        plt.close(fig)
    return out
