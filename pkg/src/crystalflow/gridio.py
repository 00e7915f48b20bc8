"""Field snapshots (.f64grid) and CSV metrics.

A .f64grid file is a single JSON header line

    {"dims": [...], "spacing": dx, "origin": [...], "time": t, "quantity": "..."}

terminated by a newline, followed by raw little-endian 8-byte floats in
row-major order.  Mask snapshots are fields with values in {0, 1} and
quantity "mask".
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .grids import Grid, ScalarField, SetMask

QUANTITIES = ("signed_distance", "levelset", "mask", "resolvent", "forcing", "generic")


def write_field(path, field: ScalarField, quantity: str = "generic", time: float = 0.0) -> None:
    if quantity not in QUANTITIES:
        raise InputError(f"unknown quantity '{quantity}' (expected one of {QUANTITIES})")
    header = {
        "dims": list(field.grid.shape),
        "spacing": field.grid.spacing,
        "origin": list(field.grid.origin),
        "time": float(time),
        "quantity": quantity,
    }
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_field(path) -> tuple[ScalarField, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: malformed .f64grid header") from exc
        dims = tuple(int(n) for n in header["dims"])
        payload = fh.read()
    expected = int(np.prod(dims)) * 8
    if len(payload) != expected:
        raise InputError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(dims)
    grid = Grid(shape=dims, spacing=float(header["spacing"]), origin=tuple(header["origin"]))
    return ScalarField(grid, values.astype(float)), header


def write_mask(path, mask: SetMask, time: float = 0.0) -> None:
    write_field(path, ScalarField(mask.grid, mask.cells.astype(float)), "mask", time)


def read_mask(path) -> tuple[SetMask, dict]:
    field, header = read_field(path)
    if header.get("quantity") != "mask":
        raise InputError(f"{path}: not a mask snapshot")
    return SetMask(field.grid, field.values >= 0.5), header


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path, rows: list, columns: list | None = None) -> None:
    """Rows of dicts with deterministic float formatting."""
    if not rows:
        raise InputError("no rows to write")
    columns = columns or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def dump_resolvent(out_dir, solution, time: float = 0.0) -> None:
    """Debug dump of a per-step solution: u and the dual components as
    .f64grid files plus the residual history as CSV."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / "resolvent_u.f64grid", solution.u, "resolvent", time)
    grid = solution.u.grid
    for a in range(grid.dim):
        write_field(
            out / f"resolvent_z{a}.f64grid",
            ScalarField(grid, solution.z[a]),
            "generic",
            time,
        )
    history = solution.diagnostics.get("residual_history", [])
    rows = [
        {"iteration": it, "residual": res, "alignment_gap": gap if gap is not None else float("nan")}
        for (it, res, gap) in history
    ] or [{"iteration": solution.iterations, "residual": solution.residual,
           "alignment_gap": float("nan")}]
    write_csv(out / "resolvent_history.csv", rows, ["iteration", "residual", "alignment_gap"])


METRICS_COLUMNS = [
    "step",
    "t",
    "volume",
    "perimeter_staircase",
    "inradius",
    "outradius",
    "residual",
    "max_psi_grad",
    "max_divz_d05",
    "extinct_flag",
]


def write_metrics_csv(path, rows: list) -> None:
    write_csv(path, rows, METRICS_COLUMNS)
