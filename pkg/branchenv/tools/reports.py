import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from branchenv import __version__


def provenance(subcommand: str, seed, config: dict) -> dict:
    """
    Build the provenance block echoed into every artifact.

    Args:
        subcommand: The CLI subcommand (or API entry point) that produced the artifact.
        seed: Master seed, or None for deterministic computations.
        config: Fully resolved configuration (flags and settings).

    Returns:
        dict: Tool name, version, seed, subcommand and configuration.
    """
    return {
        "tool": "branchenv",
        "version": __version__,
        "seed": seed,
        "subcommand": subcommand,
        "config": to_jsonable(config),
    }


def to_jsonable(value):
    """
    Convert numpy scalars/arrays, tuples and non-finite floats into JSON-safe values.
    Non-finite floats become the strings "inf", "-inf" and "nan".
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path, payload: dict, meta: dict) -> Path:
    """
    Write a JSON report with a provenance block, byte-stable across runs.

    Args:
        path: Destination file.
        payload: Report body.
        meta: Provenance block from provenance().

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"provenance": meta, **to_jsonable(payload)}
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(document, handle, sort_keys=True, indent=2, ensure_ascii=False)
        handle.write("\n")
    return path


def write_csv(
    path, header: Sequence[str], rows: Iterable[Sequence], meta: dict
) -> Path:
    """
    Write a CSV table preceded by '# key=value' provenance comment lines.

    Args:
        path: Destination file.
        header: Column names.
        rows: Row values; floats are written with repr() for exact round-trip.
        meta: Provenance block from provenance().

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for key in ("tool", "version", "seed", "subcommand"):
            handle.write(f"# {key}={meta.get(key)}\n")
        handle.write(
            "# config=" + json.dumps(meta.get("config", {}), sort_keys=True) + "\n"
        )
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(cell) for cell in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """
    Read a CSV written by write_csv, skipping provenance comments.

    Returns:
        tuple: (header, rows) with rows as lists of strings.
    """
    with open(path, encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]


def _format_cell(cell):
    if isinstance(cell, (bool, np.bool_)):
        return int(bool(cell))
    if isinstance(cell, (np.integer, int)):
        return int(cell)
    if isinstance(cell, (np.floating, float)):
        return repr(float(cell))
    return cell
