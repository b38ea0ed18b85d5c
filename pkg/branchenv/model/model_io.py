"""
JSON codec for model files.

Schema::

    {
      "d": 2,
      "name": "optional label",
      "schedule": [
        {"start": 0, "laws": [[{"offspring": [0, 0], "p": 0.5}, ...],   # type 1
                              [...]]},                                  # type 2
        ...
      ],
      "tail": {"mode": "repeat_last"}  or  {"mode": "periodic", "period": 2}
    }

Unknown fields anywhere in the document are rejected. A top-level "provenance"
object, written by the skip command, is accepted and ignored.
"""

import json
from pathlib import Path
from typing import Optional

from branchenv.model.branching_model import BranchingModel, ScheduleEntry, TailPolicy
from branchenv.model.offspring_law import OffspringLaw
from branchenv.tools.errors import ModelValidationError

MODEL_FIELDS = {"d", "schedule", "tail", "name", "provenance"}
ENTRY_FIELDS = {"start", "laws"}
ATOM_FIELDS = {"offspring", "p"}
TAIL_FIELDS = {"mode", "period"}


def check_fields(obj, allowed: set, required: set, where: str):
    if not isinstance(obj, dict):
        raise ModelValidationError(f"{where} must be a JSON object")
    unknown = set(obj) - allowed
    if unknown:
        raise ModelValidationError(f"unknown field(s) {sorted(unknown)} in {where}")
    missing = required - set(obj)
    if missing:
        raise ModelValidationError(f"missing field(s) {sorted(missing)} in {where}")


def parse_law(atoms, where: str) -> OffspringLaw:
    """
    Parse one law given as a list of {offspring, p} objects.

    Args:
        atoms: The decoded JSON list.
        where: Location used in error messages.
    """
    if not isinstance(atoms, list) or not atoms:
        raise ModelValidationError(f"{where} must be a non-empty list of atoms")
    offspring, probs = [], []
    for index, atom in enumerate(atoms):
        check_fields(atom, ATOM_FIELDS, ATOM_FIELDS, f"{where}[{index}]")
        vector = atom["offspring"]
        if not isinstance(vector, list) or not all(
            isinstance(c, int) and not isinstance(c, bool) for c in vector
        ):
            raise ModelValidationError(f"{where}[{index}].offspring must be a list of integers")
        if not isinstance(atom["p"], (int, float)) or isinstance(atom["p"], bool):
            raise ModelValidationError(f"{where}[{index}].p must be a number")
        offspring.append(vector)
        probs.append(float(atom["p"]))
    if len({len(v) for v in offspring}) != 1:
        raise ModelValidationError(f"{where}: offspring vectors differ in length")
    try:
        return OffspringLaw(offspring, probs)
    except ModelValidationError as e:
        raise ModelValidationError(f"{where}: {e}") from None


def model_from_dict(document: dict) -> BranchingModel:
    """
    Build a BranchingModel from a decoded model document.

    Args:
        document: Decoded JSON object following the module schema.

    Returns:
        BranchingModel: The validated model.
    """
    check_fields(document, MODEL_FIELDS, {"d", "schedule", "tail"}, "model")
    d = document["d"]
    if not isinstance(d, int) or isinstance(d, bool):
        raise ModelValidationError("model.d must be an integer")

    tail_doc = document["tail"]
    check_fields(tail_doc, TAIL_FIELDS, {"mode"}, "model.tail")
    tail = TailPolicy(tail_doc["mode"], tail_doc.get("period"))

    if not isinstance(document["schedule"], list):
        raise ModelValidationError("model.schedule must be a list")
    schedule = []
    for index, entry in enumerate(document["schedule"]):
        where = f"model.schedule[{index}]"
        check_fields(entry, ENTRY_FIELDS, ENTRY_FIELDS, where)
        if not isinstance(entry["start"], int) or isinstance(entry["start"], bool):
            raise ModelValidationError(f"{where}.start must be an integer")
        if not isinstance(entry["laws"], list):
            raise ModelValidationError(f"{where}.laws must be a list")
        laws = tuple(
            parse_law(atoms, f"{where}.laws[{j}]") for j, atoms in enumerate(entry["laws"])
        )
        schedule.append(ScheduleEntry(entry["start"], laws))

    return BranchingModel(
        d=d,
        schedule=tuple(schedule),
        tail=tail,
        name=str(document.get("name", "model")),
    )


def model_to_dict(model: BranchingModel) -> dict:
    """Encode a model as a JSON-ready document (inverse of model_from_dict)."""
    return {
        "d": model.d,
        "name": model.name,
        "schedule": [
            {"start": entry.start, "laws": [law.to_entries() for law in entry.laws]}
            for entry in model.schedule
        ],
        "tail": model.tail.to_dict(),
    }


def load_model(path) -> BranchingModel:
    """
    Read and validate a model file.

    Args:
        path: Path to a JSON model file.

    Returns:
        BranchingModel: The validated model, named after the file stem unless the file names it.
    """
    path = Path(path)
    if not path.is_file():
        raise ModelValidationError(f"model file not found: {path}")
    try:
        with open(path, encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise ModelValidationError(f"malformed JSON in {path}: {e}") from None
    if isinstance(document, dict) and "name" not in document:
        document = {**document, "name": path.stem}
    return model_from_dict(document)


def dump_model(model: BranchingModel, path, meta: Optional[dict] = None) -> Path:
    """
    Write a model as a JSON model file.

    Args:
        model: The model to write.
        path: Destination path.
        meta: Optional provenance block stored under "provenance".

    Returns:
        Path: The written file.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        document = model_to_dict(model)
        if meta is not None:
            document["provenance"] = meta
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path
