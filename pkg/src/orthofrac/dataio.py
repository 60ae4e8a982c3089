"""File formats: measurement CSVs, crack-surface grids, run manifests.

All tabular data moves through small CSV dialects with explicit units
in the column names (mm, N, m/s), so files are self-describing and
diff-friendly. Run manifests are JSON documents listing every input
and output with a content hash, which is what makes reruns auditable.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .crack import GRID_STEP, CrackSurface
from .curves import LoadDeflectionCurve


class DataFormatError(ValueError):
    """A data file does not match its expected layout."""


def _open_rows(path) -> tuple[list[dict], list[str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        rows = list(reader)
        names = reader.fieldnames or []
    return rows, [n.strip() for n in names]


def _require_columns(path, names: list[str], required: tuple[str, ...]) -> None:
    missing = [c for c in required if c not in names]
    if missing:
        raise DataFormatError(f"{path}: missing columns {missing}, found {names}")


def read_velocity_csv(path) -> dict[tuple[str, str], float]:
    """Wave speeds keyed by (propagation, particle) direction.

    Expects columns propagation_dir, particle_dir, velocity_m_per_s;
    directions are case-insensitive V/T/H labels.
    """
    rows, names = _open_rows(path)
    _require_columns(path, names,
                     ("propagation_dir", "particle_dir", "velocity_m_per_s"))
    speeds: dict[tuple[str, str], float] = {}
    for row in rows:
        key = (row["propagation_dir"].strip().upper(),
               row["particle_dir"].strip().upper())
        try:
            value = float(row["velocity_m_per_s"])
        except ValueError as exc:
            raise DataFormatError(f"{path}: bad speed for {key}: {exc}") from exc
        if key in speeds:
            raise DataFormatError(f"{path}: duplicate velocity row for {key}")
        speeds[key] = value
    if not speeds:
        raise DataFormatError(f"{path}: no velocity rows")
    return speeds


def read_curve_csv(path) -> LoadDeflectionCurve:
    """Load-deflection samples from columns displacement_mm, force_N."""
    rows, names = _open_rows(path)
    _require_columns(path, names, ("displacement_mm", "force_N"))
    if not rows:
        raise DataFormatError(f"{path}: no samples")
    u = np.array([float(r["displacement_mm"]) for r in rows])
    f = np.array([float(r["force_N"]) for r in rows])
    return LoadDeflectionCurve(u, f)


def write_curve_csv(path, curve: LoadDeflectionCurve) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("displacement_mm,force_N\n")
        for u, f in zip(curve.displacement, curve.force):
            fh.write(f"{u:.10g},{f:.10g}\n")


def write_history_csv(path, steps) -> None:
    """Per-step summary of a simulation run (StepRecord sequence)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("step,u_mm,F_N,iterations,elastic_energy_Nmm,"
                 "dissipated_energy_Nmm\n")
        for i, rec in enumerate(steps):
            fh.write(f"{i},{rec.u_bar:.10g},{rec.force:.10g},"
                     f"{rec.iterations},{rec.elastic_energy:.10g},"
                     f"{rec.dissipated_energy:.10g}\n")


def read_history_csv(path) -> dict[str, np.ndarray]:
    rows, names = _open_rows(path)
    _require_columns(path, names, ("step", "u_mm", "F_N"))
    if not rows:
        raise DataFormatError(f"{path}: no steps")
    return {name: np.array([float(r[name]) for r in rows]) for name in names}


def read_repetition_manifest(path) -> dict[str, list[Path]]:
    """Repetition files per test id, from a YAML mapping.

    Relative paths are resolved against the manifest's directory.
    Every referenced file must exist.
    """
    base = Path(path).parent
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or not raw:
        raise DataFormatError(f"{path}: expected a mapping of test id to file list")
    out: dict[str, list[Path]] = {}
    for test_id, entries in raw.items():
        if not isinstance(entries, list) or not entries:
            raise DataFormatError(f"{path}: test {test_id!r} needs a file list")
        files = []
        for entry in entries:
            p = Path(entry)
            if not p.is_absolute():
                p = base / p
            if not p.is_file():
                raise DataFormatError(f"{path}: missing repetition file {p}")
            files.append(p)
        out[str(test_id)] = files
    return out


def write_surface_csv(path, surface: CrackSurface) -> None:
    """Crack surface as a (y_mm, z_mm, x_mm) lattice grid.

    Header comments pin the lattice origin and pitch; undefined nodes
    are written as nan so the rectangular layout round-trips.
    """
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# origin_y_mm = {surface.y[0]:.10g}\n")
        fh.write(f"# origin_z_mm = {surface.z[0]:.10g}\n")
        fh.write(f"# step_mm = {GRID_STEP:.10g}\n")
        fh.write(f"# variant = {surface.variant}\n")
        fh.write("y_mm,z_mm,x_mm\n")
        for i, yv in enumerate(surface.y):
            for j, zv in enumerate(surface.z):
                fh.write(f"{yv:.10g},{zv:.10g},{surface.x[i, j]:.10g}\n")


def read_surface_csv(path, variant: str | None = None) -> CrackSurface:
    """Read a (y_mm, z_mm, x_mm) lattice grid back into a surface.

    The node set may be sparse; nodes absent from the file stay
    undefined. ``variant`` overrides the stored tag (scans ingested
    from external tools rarely carry one).
    """
    header: dict[str, str] = {}
    with open(path) as fh:
        raw = fh.readlines()
    for line in raw:
        if line.startswith("#") and "=" in line:
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
    step = float(header.get("step_mm", GRID_STEP))
    if abs(step - GRID_STEP) > 1e-9:
        raise DataFormatError(f"{path}: lattice step {step} is not {GRID_STEP}")
    rows, names = _open_rows(path)
    _require_columns(path, names, ("y_mm", "z_mm", "x_mm"))
    if not rows:
        raise DataFormatError(f"{path}: no lattice nodes")
    y = np.array([float(r["y_mm"]) for r in rows])
    z = np.array([float(r["z_mm"]) for r in rows])
    x = np.array([float(r["x_mm"]) for r in rows])
    iy = np.round(y / GRID_STEP).astype(np.int64)
    iz = np.round(z / GRID_STEP).astype(np.int64)
    if np.max(np.abs(y - iy * GRID_STEP)) > 1e-6 or \
            np.max(np.abs(z - iz * GRID_STEP)) > 1e-6:
        raise DataFormatError(f"{path}: node coordinates are off the lattice")
    y_axis = np.arange(iy.min(), iy.max() + 1) * GRID_STEP
    z_axis = np.arange(iz.min(), iz.max() + 1) * GRID_STEP
    values = np.full((len(y_axis), len(z_axis)), np.nan)
    values[iy - iy.min(), iz - iz.min()] = x
    tag = variant if variant is not None else header.get("variant", "scan")
    return CrackSurface(y=y_axis, z=z_axis, x=values, variant=tag)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Audit record of one command invocation."""

    command: str
    version: str
    config_hash: str
    started: str
    finished: str = ""
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_sha256(path)

    def add_output(self, path) -> None:
        self.outputs[str(path)] = file_sha256(path)


def write_manifest(path, manifest: RunManifest) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
