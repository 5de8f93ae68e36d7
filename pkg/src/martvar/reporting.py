"""Report serialization: JSON-lines for verification reports, CSV for
per-cell fields and plot-ready summaries.

Every JSONL record is stamped with the package version; reports embed
their full parameter set and witness manifest so a line can be replayed
in isolation.  CSV files are the delimited companions the figure
renderer (and any external plotting) consumes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

__version__ = "0.1.0"

__all__ = [
    "write_jsonl",
    "read_jsonl",
    "field_to_csv",
    "field_from_csv",
    "reports_to_csv",
    "profile_to_csv",
    "write_json",
    "read_json",
    "__version__",
]


def _stamp(obj: dict) -> dict:
    out = dict(obj)
    out.setdefault("version", __version__)
    return out


def write_jsonl(path, records) -> int:
    """Write one JSON object per line; records may carry to_json()."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w") as fh:
        for rec in records:
            obj = rec.to_json() if hasattr(rec, "to_json") else rec
            fh.write(json.dumps(_stamp(obj), sort_keys=True))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_stamp(obj.to_json() if hasattr(obj, "to_json") else obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def field_to_csv(path, values, header: str = "value") -> None:
    """Per-cell operator output as (cell, value) rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", header])
        for i, v in enumerate(np.asarray(values, dtype=float)):
            writer.writerow([i, repr(float(v))])


def field_from_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return np.array([float(row[1]) for row in reader])


def reports_to_csv(path, reports) -> None:
    """Plot-ready flat summary of verification reports."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "lhs", "rhs", "empirical_constant", "pass", "lambda", "delta", "r", "trial"])
        for rep in reports:
            obj = rep.to_json() if hasattr(rep, "to_json") else rep
            params = obj.get("params", {})
            writer.writerow(
                [
                    obj["name"],
                    repr(obj["lhs"]),
                    repr(obj["rhs"]),
                    repr(obj["empirical_constant"]),
                    int(obj["pass"]),
                    params.get("lambda", ""),
                    params.get("delta", ""),
                    params.get("r", ""),
                    params.get("trial", ""),
                ]
            )


def profile_to_csv(path, profile) -> None:
    """Concentration profile as (gamma, epsilon) rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gamma", "epsilon"])
        for g, e in zip(profile.gammas, profile.epsilons):
            writer.writerow([repr(float(g)), repr(float(e))])
