"""Run-directory reading.

A run directory is complete when metadata.json exists; the metadata
names every data file, so readers never glob.  Only schema_version 1
is understood.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class SchemaError(Exception):
    """Input directory does not follow the expected layout or version."""


@dataclass(frozen=True)
class RunDirectory:
    path: Path
    metadata: dict

    @property
    def experiment(self) -> str:
        return self.metadata.get("experiment", "")

    def config(self) -> dict:
        return self.metadata.get("config", {})

    def table_path(self, name: str) -> Path:
        outputs = self.metadata.get("outputs", {})
        if name not in outputs:
            raise SchemaError(
                f"run at {self.path} has no {name!r} output "
                f"(found: {sorted(outputs) or 'none'})")
        return self.path / outputs[name]

    def table(self, name: str) -> dict[str, np.ndarray]:
        return read_csv(self.table_path(name))


def load_run(path) -> RunDirectory:
    path = Path(path)
    meta_path = path / "metadata.json"
    if not meta_path.is_file():
        raise SchemaError(f"no metadata.json in {path}: not a run directory "
                          "or the run did not finish")
    try:
        metadata = json.loads(meta_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"unreadable metadata in {path}: {exc}") from exc
    version = metadata.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"schema_version {version!r} in {path}, "
                          f"this reader understands {SCHEMA_VERSION}")
    return RunDirectory(path=path, metadata=metadata)


def read_csv(path) -> dict[str, np.ndarray]:
    """Header-keyed float columns; empty data sections give empty arrays."""
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip()
            if not header:
                raise SchemaError(f"{path} is empty")
            names = header.split(",")
            body = fh.read()
        if not body.strip():
            return {name: np.empty(0) for name in names}
        data = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise SchemaError(f"{path} is not numeric CSV: {exc}") from exc
    if data.shape[1] != len(names):
        raise SchemaError(f"{path}: {data.shape[1]} columns under "
                          f"{len(names)} headers")
    return {name: data[:, i] for i, name in enumerate(names)}
