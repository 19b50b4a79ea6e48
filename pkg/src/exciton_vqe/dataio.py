"""JSON and CSV formats shared by the command-line tools.

System files hold either a bare JSON array of monomer records or an object
``{"monomers": [...], "connectivity": {...}}``; a bare array gets cyclic
nearest-neighbour connectivity. Result files are JSON objects written with
Python's shortest round-trip float repr, so reading one back reproduces every
value bit for bit.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .pauli_model import Connectivity, ModelError, MonomerData

RESULTS_FORMAT = "exciton-vqe-results/1"
REPORT_FORMAT = "exciton-vqe-report/1"


class SchemaError(ModelError):
    """A file parsed as JSON but does not have the expected structure."""


def _read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None


def to_plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path: str | Path, data: Any) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_plain(data), fh, indent=1, allow_nan=False)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------


def system_to_dict(monomers: Sequence[MonomerData], conn: Connectivity, meta: dict | None = None) -> dict:
    out: dict[str, Any] = {"monomers": [m.to_dict() for m in monomers], "connectivity": conn.to_dict()}
    if meta:
        out["meta"] = meta
    return out


def system_from_data(data: Any) -> tuple[list[MonomerData], Connectivity]:
    if isinstance(data, list):
        records, conn_block = data, {}
    elif isinstance(data, dict) and isinstance(data.get("monomers"), list):
        records, conn_block = data["monomers"], data.get("connectivity", {})
    else:
        raise SchemaError("expected a monomer array or an object with a 'monomers' array")
    if not records:
        raise SchemaError("no monomer records")
    if not all(isinstance(r, dict) for r in records):
        raise SchemaError("monomer records must be JSON objects")
    if not isinstance(conn_block, dict):
        raise SchemaError("'connectivity' must be an object")
    monomers = [MonomerData.from_dict(r) for r in records]
    monomers.sort(key=lambda m: m.index)
    return monomers, Connectivity.from_dict(conn_block, len(monomers))


def load_system(path: str | Path) -> tuple[list[MonomerData], Connectivity]:
    return system_from_data(_read_json(path))


def save_system(path: str | Path, monomers: Sequence[MonomerData], conn: Connectivity, meta: dict | None = None) -> None:
    write_json(path, system_to_dict(monomers, conn, meta))


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


def load_results(path: str | Path) -> dict:
    data = _read_json(path)
    if not isinstance(data, dict) or data.get("format") != RESULTS_FORMAT:
        raise SchemaError(f"{path}: not a results file (expected format {RESULTS_FORMAT!r})")
    for key in ("method", "energies_hartree", "excitation_energies_ev", "oscillator_strengths"):
        if key not in data:
            raise SchemaError(f"{path}: results file lacks {key!r}")
    return data


def write_spectrum_csv(path: str | Path, grid: np.ndarray, intensity: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["energy_ev", "intensity"])
        for e, i in zip(grid, intensity):
            w.writerow([repr(float(e)), repr(float(i))])


def read_spectrum_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["energy_ev", "intensity"]:
        raise SchemaError(f"{path}: missing 'energy_ev,intensity' header")
    arr = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return arr[:, 0], arr[:, 1]
