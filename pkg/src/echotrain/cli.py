"""Command-line front end.

One subcommand per experiment.  Flags mirror RunConfig fields; a JSON
config file (--config) supplies defaults and explicit flags override it.
Exit codes: 0 success, 2 usage, 3 resource or I/O, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .engine import METHOD_AUTO, METHOD_CHEBYSHEV, METHOD_DIAGONAL, \
    METHOD_TROTTER
from .errors import ConfigError, DivergenceError, ResourceLimitError
from .model import (AXIS_ALTERNATING_X, AXIS_PLUS_X, AXIS_RANDOM_FIXED,
                    EPSILON_PER_PULSE, EPSILON_PER_SPIN, EPSILON_UNIFORM,
                    VARIANT_FULL, VARIANT_REDUCED)
from .runner import (AUTO, EXIT_DIVERGENCE, EXIT_OK, EXIT_RESOURCE,
                     EXIT_USAGE, RunConfig, run)

_AXIS_CHOICES = {"x": AXIS_PLUS_X, "apcp": AXIS_ALTERNATING_X,
                 "random-fixed": AXIS_RANDOM_FIXED}


def _parse_d(text: str) -> float:
    if text.lower() in ("inf", "infinite"):
        return math.inf
    return float(text)


def _parse_parallelism(text: str):
    return AUTO if text == AUTO else int(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="echotrain",
        description="pulse-train simulations of disordered dipolar ensembles")
    sub = parser.add_subparsers(dest="experiment", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="JSON file of RunConfig fields; flags override")
    common.add_argument("--out", default=None,
                        help="output directory (default results/<timestamp>)")
    common.add_argument("--seed", type=int, default=None, dest="master_seed")
    common.add_argument("--samples", type=int, default=None,
                        dest="n_realizations", help="disorder realizations")

    ensemble = argparse.ArgumentParser(add_help=False)
    ensemble.add_argument("--d", type=_parse_d, default=None,
                          help="spatial dimension, 2-8 or inf")
    ensemble.add_argument("--ns", type=int, default=None, dest="n_spins")
    ensemble.add_argument("--density", type=float, default=None)
    ensemble.add_argument("--t2", type=float, default=None, dest="target_t2",
                          help="calibrate density so the echo T2 equals this")
    ensemble.add_argument("--field-sigma", type=float, default=None,
                          dest="field_sigma")
    ensemble.add_argument("--model", choices=[VARIANT_FULL, VARIANT_REDUCED],
                          default=None, dest="variant")

    pulses = argparse.ArgumentParser(add_help=False)
    pulses.add_argument("--epsilon", type=float, default=None,
                        help="fractional rotation-angle error")
    pulses.add_argument("--epsilon-policy", default=None,
                        choices=[EPSILON_UNIFORM, EPSILON_PER_SPIN,
                                 EPSILON_PER_PULSE], dest="epsilon_policy")
    pulses.add_argument("--axis", choices=sorted(_AXIS_CHOICES), default=None,
                        help="pulse axis policy")

    train = argparse.ArgumentParser(add_help=False)
    train.add_argument("--tau", type=float, default=None,
                       help="half the pulse spacing: pulses at (2n+1) tau")
    train.add_argument("--pulses", type=int, default=None, dest="n_pulses",
                       help="number of pulses in the train")

    engine = argparse.ArgumentParser(add_help=False)
    engine.add_argument("--method", default=None,
                        choices=[METHOD_AUTO, METHOD_DIAGONAL,
                                 METHOD_CHEBYSHEV, METHOD_TROTTER])
    engine.add_argument("--trotter-step", type=float, default=None,
                        dest="trotter_step")
    engine.add_argument("--parallelism", type=_parse_parallelism,
                        default=None)

    hahn = sub.add_parser("hahn", parents=[common, ensemble, pulses, engine],
                          help="single-echo scan over total time")
    hahn.add_argument("--tmin", type=float, default=None)
    hahn.add_argument("--tmax", type=float, default=None)
    hahn.add_argument("--points", type=int, default=None)

    for name, blurb in (("cpmg", "periodic pulse train, transverse response"),
                        ("apcp", "alternating-axis pulse train"),
                        ("longitudinal", "pulse train, z response")):
        sub.add_parser(name, parents=[common, ensemble, pulses, train,
                                      engine], help=blurb)

    flo = sub.add_parser("floquet",
                         parents=[common, ensemble, pulses, train, engine],
                         help="one-period spectra, maps, and histograms")
    flo.add_argument("--alpha", choices=["x", "y", "z"], default=None)
    flo.add_argument("--threshold", type=float, default=None,
                     help="smallest squared element emitted to the map")
    flo.add_argument("--beta", type=float, default=None,
                     help="histogram bin half-width")

    sub.add_parser("calibrate", parents=[common, ensemble],
                   help="find the density matching a target echo T2")
    sub.add_parser("tables", parents=[common],
                   help="closed-form constants as CSV")
    return parser


def cli_parse(argv) -> RunConfig:
    """Parse argv into a RunConfig; raises ConfigError on bad combinations."""
    args = vars(_build_parser().parse_args(argv))
    experiment = args.pop("experiment")
    config_path = args.pop("config", None)

    merged: dict = {}
    if config_path is not None:
        try:
            merged.update(json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        merged.pop("experiment", None)
    if "axis" in args:
        axis = args.pop("axis")
        if axis is not None:
            args["axis_policy"] = _AXIS_CHOICES[axis]
    explicit = {k: v for k, v in args.items() if v is not None}
    merged.update(explicit)

    # density and target_t2 are mutually exclusive; an explicit density
    # replaces the default calibration target unless t2 was also given
    if merged.get("density") is not None and "target_t2" not in merged:
        merged["target_t2"] = None

    # floquet operators must fit the dense limit; keep small by default
    if experiment == "floquet":
        merged.setdefault("n_spins", 10)
        merged.setdefault("n_realizations", 10)

    config = RunConfig.from_dict({"experiment": experiment, **merged})
    if experiment != "tables":
        config.ensemble()  # surface contradictions (e.g. --d inf --density)
    return config


def main(argv=None) -> int:
    try:
        config = cli_parse(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # argparse reports usage problems itself
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        record = run(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    print(record.out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
